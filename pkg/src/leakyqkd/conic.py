"""Dense primal-dual interior-point solvers for small LPs and SDPs.

Both problem types are lowered to one internal cone program

    minimize  <C, X>   s.t.  <A_i, X> = b_i,   X in K

where K is a product of real PSD blocks and a nonnegative orthant.
Inequalities receive a scalar slack in the orthant. Search directions are
HKM with a Mehrotra predictor-corrector.

Reported dual values are *certified*: weak duality is evaluated on the
returned multipliers with any residual dual infeasibility charged against
a bound on the primal variables, so a maximization's ``dual_value`` is a
true upper bound whenever ``certified`` is set.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "Relation",
    "Status",
    "LinearProgram",
    "SemidefiniteProgram",
    "ConicSolution",
    "SolverSettings",
    "solve_lp",
    "solve_sdp",
    "hermitian_real_embedding",
    "dump_lp",
    "dump_sdp",
    "load_problem",
]

GAP_TOL = 1e-7
FEAS_TOL = 1e-8
MAX_ITER = 200
# iterations without improvement before giving up
STALL_ITERS = 10
# LE/GE pairs narrower than this (relative) are solved as equalities
RANGE_EQ_TOL = 1e-14
REFINE_STEPS = 3


class Relation(str, enum.Enum):
    LE = "<="
    GE = ">="
    EQ = "=="

    @classmethod
    def parse(cls, value) -> "Relation":
        if isinstance(value, Relation):
            return value
        aliases = {"<=": cls.LE, "≤": cls.LE, "le": cls.LE, ">=": cls.GE, "≥": cls.GE,
                   "ge": cls.GE, "=": cls.EQ, "==": cls.EQ, "eq": cls.EQ}
        try:
            return aliases[str(value).strip().lower()]
        except KeyError:
            raise ValueError(f"unknown relation {value!r}") from None


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolverSettings:
    tol_gap: float = GAP_TOL
    tol_feas: float = FEAS_TOL
    max_iter: int = MAX_ITER
    verbose: bool = False


@dataclass
class LinearProgram:
    """``objective . x`` subject to rows ``(coeffs, relation, bound)`` and
    per-variable closed intervals (default ``[0, 1]``)."""

    objective: np.ndarray
    constraint_rows: list = field(default_factory=list)
    variable_bounds: list | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        n = self.objective.size
        rows = []
        for coeffs, rel, bound in self.constraint_rows:
            coeffs = np.asarray(coeffs, dtype=float).ravel()
            if coeffs.size != n:
                raise ValueError(f"constraint row has {coeffs.size} entries, expected {n}")
            rows.append((coeffs, Relation.parse(rel), float(bound)))
        self.constraint_rows = rows
        if self.variable_bounds is None:
            self.variable_bounds = [(0.0, 1.0)] * n
        if len(self.variable_bounds) != n:
            raise ValueError("one bound interval per variable is required")
        bounds = []
        for lo, hi in self.variable_bounds:
            lo, hi = float(lo), float(hi)
            if not lo <= hi:
                raise ValueError(f"empty variable interval [{lo}, {hi}]")
            if not math.isfinite(lo):
                raise ValueError("variables must have a finite lower bound")
            bounds.append((lo, hi))
        self.variable_bounds = bounds

    @property
    def n_vars(self) -> int:
        return self.objective.size


@dataclass
class SemidefiniteProgram:
    """``Tr(A0 G)`` subject to ``Tr(A_i G) (rel) b_i`` and ``G >= 0``.

    ``blocks`` optionally restricts G to a block-diagonal structure (sizes
    summing to ``dim``); coefficients outside the blocks are ignored.
    ``trace_bound`` is an a-priori bound on ``Tr G`` over the feasible set,
    used to certify the dual value when multipliers are slightly infeasible.
    """

    dim: int
    objective: np.ndarray
    constraints: list
    blocks: tuple | None = None
    trace_bound: float | None = None
    offset: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.constraints:
            raise ValueError("at least one constraint is required")
        self.objective = _check_sym(self.objective, self.dim, "objective")
        self.constraints = [
            (_check_sym(a, self.dim, f"constraint {k}"), Relation.parse(rel), float(b))
            for k, (a, rel, b) in enumerate(self.constraints)
        ]
        if self.blocks is None:
            self.blocks = (self.dim,)
        self.blocks = tuple(int(b) for b in self.blocks)
        if sum(self.blocks) != self.dim or min(self.blocks) < 1:
            raise ValueError("block sizes must be positive and sum to dim")


def _check_sym(a, dim, what):
    a = np.asarray(a, dtype=float)
    if a.shape != (dim, dim):
        raise ValueError(f"{what} has shape {a.shape}, expected {(dim, dim)}")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12):
        raise ValueError(f"{what} is not symmetric")
    return 0.5 * (a + a.T)


@dataclass
class ConicSolution:
    status: Status
    primal_value: float
    dual_value: float
    primal_point: np.ndarray | None
    duality_gap: float
    max_residual: float
    iterations: int = 0
    certified: bool = False
    dual_point: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


# ---------------------------------------------------------------------------
# internal cone program


@dataclass
class _Cone:
    """min <C,X> s.t. A(X) = b over PSD blocks and an orthant."""

    sizes: list  # PSD block sizes
    A_blk: list  # per block: (m, n, n)
    C_blk: list  # per block: (n, n)
    A_lin: np.ndarray  # (m, l)
    c_lin: np.ndarray  # (l,)
    b: np.ndarray  # (m,)
    blk_trace_bound: list  # per block, may be inf
    lin_upper: np.ndarray  # per orthant coordinate, may be inf

    @property
    def m(self):
        return self.b.size

    def apply(self, X_blk, x_lin):
        out = self.A_lin @ x_lin if self.A_lin.shape[1] else np.zeros(self.m)
        for A, X in zip(self.A_blk, X_blk):
            out = out + A.reshape(self.m, -1) @ X.ravel()
        return out

    def adjoint(self, y):
        return [np.tensordot(y, A, axes=1) for A in self.A_blk], self.A_lin.T @ y

    def flat(self):
        parts = [A.reshape(self.m, -1) for A in self.A_blk] + [self.A_lin]
        return np.hstack(parts) if parts else np.zeros((self.m, 0))


def _drop_dependent_rows(cone: _Cone):
    """Remove linearly dependent equality rows; report inconsistency."""
    F = cone.flat()
    scale = np.maximum(np.linalg.norm(F, axis=1), 1e-300)
    Fn = F / scale[:, None]
    bn = cone.b / scale
    if F.shape[1] == 0:
        return cone, True
    _, R, piv = scipy.linalg.qr(Fn.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > 1e-10 * max(diag.max(initial=0.0), 1.0)))
    if rank == cone.m:
        return cone, True
    keep = np.sort(piv[:rank])
    drop = np.setdiff1d(np.arange(cone.m), keep)
    coef, *_ = np.linalg.lstsq(Fn[keep].T, Fn[drop].T, rcond=None)
    consistent = np.allclose(coef.T @ bn[keep], bn[drop], atol=1e-9, rtol=1e-9)
    reduced = _Cone(
        sizes=cone.sizes,
        A_blk=[A[keep] for A in cone.A_blk],
        C_blk=cone.C_blk,
        A_lin=cone.A_lin[keep],
        c_lin=cone.c_lin,
        b=cone.b[keep],
        blk_trace_bound=cone.blk_trace_bound,
        lin_upper=cone.lin_upper,
    )
    return reduced, consistent


def _max_step(X, dX):
    """Largest a in (0, inf) keeping X + a dX PSD (X positive definite)."""
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    Li = scipy.linalg.solve_triangular(L, np.eye(len(X)), lower=True)
    lam = np.linalg.eigvalsh(Li @ dX @ Li.T).min()
    return math.inf if lam >= 0 else -1.0 / lam


def _max_step_lin(x, dx):
    neg = dx < 0
    if not np.any(neg):
        return math.inf
    return float(np.min(-x[neg] / dx[neg]))


def _inner(U_blk, u_lin, V_blk, v_lin):
    return float(sum(np.vdot(U, V) for U, V in zip(U_blk, V_blk)) + u_lin @ v_lin)


def _psd_factor(X):
    """L with L L^T = X (Cholesky, eigen fallback for borderline X)."""
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        lam, V = np.linalg.eigh(X)
        return V * np.sqrt(np.maximum(lam, 0.0))


def _inv_factor(Z):
    """R with R^T R = Z^-1."""
    try:
        L = np.linalg.cholesky(Z)
        return scipy.linalg.solve_triangular(L, np.eye(len(Z)), lower=True)
    except np.linalg.LinAlgError:
        lam, V = np.linalg.eigh(Z)
        return (V / np.sqrt(np.maximum(lam, 1e-300))).T


def _nt_scaling(X, Z):
    """G, G^-1 and d with G^-1 X G^-T = G^T Z G = diag(d)."""
    Lx = np.linalg.cholesky(X)
    Lz = np.linalg.cholesky(Z)
    U, sv, Vt = np.linalg.svd(Lz.T @ Lx)
    G = Lx @ Vt.T / np.sqrt(sv)
    Gi = (np.sqrt(sv)[:, None] * Vt) @ scipy.linalg.solve_triangular(Lx, np.eye(len(X)), lower=True)
    return G, Gi, sv


def _schur_solver(B):
    """Solve (B B^T) dy = r from a QR factorization of B^T, which keeps the
    accuracy tied to cond(B) instead of its square. Refinement steps run
    against the product form."""
    m = B.shape[0]
    if m == 0:
        return lambda r: np.zeros(0)
    R = scipy.linalg.qr(B.T, mode="r")[0][:m]
    if R.shape[0] < m:
        R = np.vstack([R, np.zeros((m - R.shape[0], m))])
    dg = np.abs(np.diag(R))
    floor = 1e-15 * max(dg.max(initial=0.0), 1e-300)
    if np.any(dg <= floor):
        # rank-deficient direction: regularize the tiny pivots only
        R = R + np.diag(np.where(dg <= floor, floor, 0.0))

    def base(r):
        w = scipy.linalg.solve_triangular(R, r, trans="T")
        return scipy.linalg.solve_triangular(R, w)

    def solve(r):
        x = base(r)
        for _ in range(REFINE_STEPS):
            res = r - B @ (B.T @ x)
            x = x + base(res)
        return x

    return solve


def _solve_cone(cone: _Cone, settings: SolverSettings):
    cone, consistent = _drop_dependent_rows(cone)
    sizes = cone.sizes
    l = cone.c_lin.size
    n_tot = sum(sizes) + l
    m = cone.m
    if not consistent:
        return dict(status=Status.INFEASIBLE, iterations=0)
    row_scale = 1.0 / np.maximum(np.linalg.norm(cone.flat(), axis=1), 1e-300) if m else np.ones(0)
    cone = _Cone(sizes, [A * row_scale[:, None, None] for A in cone.A_blk], cone.C_blk,
                 cone.A_lin * row_scale[:, None], cone.c_lin, cone.b * row_scale,
                 cone.blk_trace_bound, cone.lin_upper)

    norm_b = np.linalg.norm(cone.b, np.inf)
    norm_C = max([np.abs(C).max(initial=0.0) for C in cone.C_blk] + [np.abs(cone.c_lin).max(initial=0.0)])
    # norm of constraint rows
    row_norm = np.linalg.norm(cone.flat(), axis=1) if m else np.zeros(0)
    xi = max(1.0, math.sqrt(n_tot), np.max((1 + np.abs(cone.b)) / (1 + row_norm), initial=1.0) * math.sqrt(n_tot))
    eta = max(1.0, math.sqrt(n_tot), norm_C, row_norm.max(initial=0.0))
    X = [xi * np.eye(n) for n in sizes]
    Z = [eta * np.eye(n) for n in sizes]
    x = np.full(l, xi)
    z = np.full(l, eta)
    y = np.zeros(m)

    status = Status.NUMERICAL_FAILURE
    it = 0
    best, best_merit, best_it = None, math.inf, 0
    for it in range(1, settings.max_iter + 1):
        ATy_blk, ATy_lin = cone.adjoint(y)
        rp = cone.b - cone.apply(X, x)
        Rd = [C - Zs - At for C, Zs, At in zip(cone.C_blk, Z, ATy_blk)]
        rd_lin = cone.c_lin - z - ATy_lin
        pobj = _inner(cone.C_blk, cone.c_lin, X, x)
        dobj = float(cone.b @ y)
        xz = _inner(X, x, Z, z)
        mu = xz / n_tot
        pres = np.abs(rp / row_scale).max(initial=0.0)
        dres = max([np.abs(R).max(initial=0.0) for R in Rd] + [np.abs(rd_lin).max(initial=0.0)])
        gap = max(abs(pobj - dobj), xz)
        if settings.verbose:
            print(f"{it:3d} pobj={pobj:+.6e} dobj={dobj:+.6e} pres={pres:.1e} dres={dres:.1e} xz={xz:.1e}")
        merit = max(pres / settings.tol_feas, dres / settings.tol_feas, gap / settings.tol_gap)
        if merit < best_merit:
            best_merit, best, best_it = merit, (X, x, y, Z, z), it
        elif it - best_it >= STALL_ITERS:
            break
        if pres <= settings.tol_feas and dres <= settings.tol_feas and gap <= settings.tol_gap:
            status = Status.OPTIMAL
            break
        # infeasibility certificates
        if dobj > 0:
            ray_res = max([np.abs(C - R).max(initial=0.0) for C, R in zip(cone.C_blk, Rd)]
                          + [np.abs(cone.c_lin - rd_lin).max(initial=0.0)])
            if dobj > 1e8 * max(1.0, norm_C) and ray_res / dobj < 1e-8 * max(1.0, norm_C) + 1e-10:
                status = Status.INFEASIBLE
                break
        if pobj < 0:
            ax = np.abs(cone.b - rp).max(initial=0.0)
            if -pobj > 1e8 * max(1.0, norm_b) and ax / -pobj < 1e-8 * max(1.0, norm_b) + 1e-10:
                status = Status.UNBOUNDED
                break

        # Nesterov-Todd scaling: X = G D G^T, Z = G^-T D G^-1, D diagonal
        try:
            scal = [_nt_scaling(Xs, Zs) for Xs, Zs in zip(X, Z)]
        except np.linalg.LinAlgError:
            break
        # M = B B^T; factor B^T by QR rather than forming M's Cholesky
        B = np.hstack([np.matmul(np.matmul(G.T, A), G).reshape(m, -1) for A, (G, _, _) in zip(cone.A_blk, scal)]
                      + [cone.A_lin * np.sqrt(x / z)])
        if not np.all(np.isfinite(B)):
            break
        solve = _schur_solver(B)
        WRW = [G @ (G.T @ R @ G) @ G.T for (G, _, _), R in zip(scal, Rd)]

        def direction(sigma, corr_blk=None, corr_lin=None):
            # scaled complementarity: dXh + dZh = 2 R_ij / (d_i + d_j)
            Rc = []
            for q, (G, Gi, d) in enumerate(scal):
                R = sigma * mu * np.eye(len(d)) - np.diag(d * d)
                if corr_blk is not None:
                    R = R - corr_blk[q]
                Rc.append(G @ (2.0 * R / (d[:, None] + d[None, :])) @ G.T)
            rc_lin = (sigma * mu - x * z - (corr_lin if corr_lin is not None else 0.0)) / z
            rhs = rp - cone.apply([Rb - V for Rb, V in zip(Rc, WRW)], rc_lin - x / z * rd_lin)
            dy = solve(rhs)
            ATdy_blk, ATdy_lin = cone.adjoint(dy)
            dZ = [R - At for R, At in zip(Rd, ATdy_blk)]
            dz = rd_lin - ATdy_lin
            dX = []
            for (G, _, _), Rb, D in zip(scal, Rc, dZ):
                T = Rb - G @ (G.T @ D @ G) @ G.T
                dX.append(0.5 * (T + T.T))
            dx = rc_lin - x / z * dz
            return dX, dx, dy, dZ, dz

        def steps(dX, dx, dZ, dz):
            ap = min([_max_step(Xs, D) for Xs, D in zip(X, dX)] + [_max_step_lin(x, dx)])
            ad = min([_max_step(Zs, D) for Zs, D in zip(Z, dZ)] + [_max_step_lin(z, dz)])
            return ap, ad

        dXa, dxa, dya, dZa, dza = direction(0.0)
        ap, ad = steps(dXa, dxa, dZa, dza)
        ap, ad = min(1.0, ap), min(1.0, ad)
        xz_aff = _inner([Xs + ap * D for Xs, D in zip(X, dXa)], x + ap * dxa,
                        [Zs + ad * D for Zs, D in zip(Z, dZa)], z + ad * dza)
        sigma = min(1.0, max(0.0, xz_aff / xz)) ** 3 if xz > 0 else 0.0
        corr_blk = []
        for (G, Gi, d), D1, D2 in zip(scal, dXa, dZa):
            P = (Gi @ D1 @ Gi.T) @ (G.T @ D2 @ G)
            corr_blk.append(0.5 * (P + P.T))
        corr_lin = dxa * dza
        dX, dx, dy, dZ, dz = direction(sigma, corr_blk, corr_lin)
        ap, ad = steps(dX, dx, dZ, dz)
        gamma = 0.9 + 0.09 * min(1.0, ap, ad)
        ap, ad = min(1.0, gamma * ap), min(1.0, gamma * ad)
        if ap < 1e-12 and ad < 1e-12:
            break
        X = [Xs + ap * D for Xs, D in zip(X, dX)]
        x = x + ap * dx
        y = y + ad * dy
        Z = [Zs + ad * D for Zs, D in zip(Z, dZ)]
        z = z + ad * dz
        X = [0.5 * (S + S.T) for S in X]
        Z = [0.5 * (S + S.T) for S in Z]

    if status is Status.NUMERICAL_FAILURE and best is not None:
        X, x, y, Z, z = best
    ATy_blk, ATy_lin = cone.adjoint(y)
    rp = cone.b - cone.apply(X, x)
    pobj = _inner(cone.C_blk, cone.c_lin, X, x)
    dobj = float(cone.b @ y)
    # certified lower bound on the minimum via weak duality
    S_blk = [C - At for C, At in zip(cone.C_blk, ATy_blk)]
    s_lin = cone.c_lin - ATy_lin
    certified = True
    cert = dobj
    for S, tb in zip(S_blk, cone.blk_trace_bound):
        lam = np.linalg.eigvalsh(S).min() if S.size else 0.0
        if lam < 0:
            if math.isfinite(tb):
                cert += lam * tb
            else:
                certified = False
    for sj, ub in zip(s_lin, cone.lin_upper):
        if sj < 0:
            if math.isfinite(ub):
                cert += sj * ub
            else:
                certified = False
    Rd_max = max([np.abs(C - Zs - At).max(initial=0.0) for C, Zs, At in zip(cone.C_blk, Z, ATy_blk)]
                 + [np.abs(cone.c_lin - z - ATy_lin).max(initial=0.0)])
    min_eig = min([np.linalg.eigvalsh(Xs).min() for Xs in X] + [x.min(initial=np.inf)])
    return dict(
        status=status,
        iterations=it,
        X=X,
        x=x,
        y=y * row_scale,
        pobj=pobj,
        dobj=dobj,
        cert=cert,
        certified=certified,
        pres=float(np.abs(rp / row_scale).max(initial=0.0)),
        dres=float(Rd_max),
        gap=float(max(abs(pobj - dobj), _inner(X, x, Z, z))),
        min_eig=float(min_eig),
    )


# ---------------------------------------------------------------------------
# LP front end


def _merge_ranged_rows(rows):
    """Fold an LE row and a GE row with identical coefficients into one
    ranged row ``(coeffs, lo, hi)``. A pair whose range is below double
    resolution becomes an equality at the midpoint. Other rows pass
    through as ``(coeffs, rel, bound)``."""
    groups = {}
    for r, (coeffs, rel, bound) in enumerate(rows):
        groups.setdefault(coeffs.tobytes(), []).append(r)
    out = []
    for idx in groups.values():
        rels = [rows[r][1] for r in idx]
        if len(idx) == 2 and set(rels) == {Relation.LE, Relation.GE}:
            coeffs = rows[idx[0]][0]
            hi = next(rows[r][2] for r in idx if rows[r][1] is Relation.LE)
            lo = next(rows[r][2] for r in idx if rows[r][1] is Relation.GE)
            if hi - lo <= RANGE_EQ_TOL * max(1.0, abs(hi), abs(lo)) and lo - hi <= RANGE_EQ_TOL:
                out.append((coeffs, Relation.EQ, 0.5 * (lo + hi)))
                continue
            if lo < hi:
                out.append((coeffs, "range", (lo, hi)))
                continue
        out.extend(rows[r] for r in idx)
    return out


def _lp_to_cone(lp: LinearProgram, sense: str):
    n = lp.n_vars
    lo = np.array([b[0] for b in lp.variable_bounds])
    hi = np.array([b[1] for b in lp.variable_bounds])
    sign = -1.0 if sense == "max" else 1.0
    span = np.where(np.isfinite(hi), hi - lo, np.inf)
    rows, rhs, slack_cols, slack_ub, slack_hard = [], [], [], [], []
    for coeffs, rel, bound in _merge_ranged_rows(lp.constraint_rows):
        shift = coeffs @ lo
        rows.append(coeffs)
        if rel == "range":
            # coeffs . x + s = hi with 0 <= s <= hi - lo
            rhs.append(bound[1] - shift)
            slack_cols.append(1.0)
            slack_ub.append(bound[1] - bound[0])
            slack_hard.append(True)
            continue
        rhs.append(bound - shift)
        if rel is Relation.EQ:
            slack_cols.append(0.0)
        else:
            slack_cols.append(1.0 if rel is Relation.LE else -1.0)
            reach = np.sum(np.abs(coeffs) * span) + abs(bound - shift)
            slack_ub.append(reach if np.isfinite(reach) else np.inf)
            slack_hard.append(False)
    n_slack = len(slack_ub)
    # upper-bound rows: finite variable boxes, then ranged slacks
    ub_cols = [(j, span[j]) for j in np.flatnonzero(np.isfinite(hi))]
    ub_cols += [(n + q, slack_ub[q]) for q in range(n_slack) if slack_hard[q]]
    n_ub = len(ub_cols)
    m = len(rows) + n_ub
    l = n + n_slack + n_ub
    A = np.zeros((m, l))
    b = np.zeros(m)
    k = n
    for r, (coeffs, s) in enumerate(zip(rows, slack_cols)):
        A[r, :n] = coeffs
        b[r] = rhs[r]
        if s != 0.0:
            A[r, k] = s
            k += 1
    for q, (j, width) in enumerate(ub_cols):
        r = len(rows) + q
        A[r, j] = 1.0
        A[r, n + n_slack + q] = 1.0
        b[r] = width
    c = np.zeros(l)
    c[:n] = sign * lp.objective
    upper = np.concatenate([span, slack_ub, [w for _, w in ub_cols]])
    cone = _Cone(sizes=[], A_blk=[], C_blk=[], A_lin=A, c_lin=c, b=b, blk_trace_bound=[], lin_upper=upper)
    offset = float(lp.objective @ lo)
    return cone, sign, offset, lo


def solve_lp(lp: LinearProgram, sense: str = "max", settings: SolverSettings | None = None) -> ConicSolution:
    """Solve ``lp`` in the requested sense ("max" or "min")."""
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    settings = settings or SolverSettings()
    if lp.constraint_rows == [] and lp.n_vars == 0:
        raise ValueError("empty linear program")
    cone, sign, offset, lo = _lp_to_cone(lp, sense)
    if cone.m == 0:
        # only unbounded-above variables and no rows
        cone.A_lin = np.zeros((1, cone.c_lin.size))
        cone.b = np.zeros(1)
    res = _solve_cone(cone, settings)
    return _finish(res, sign, offset, lambda r: lo + r["x"][: lp.n_vars], settings)


def _finish(res, sign, offset, point_fn, settings):
    status = res["status"]
    if "X" not in res:
        return ConicSolution(status, math.nan, math.nan, None, math.inf, math.inf, res["iterations"])
    primal = sign * res["pobj"] + offset
    dual = sign * res["cert"] + offset
    gap = res["gap"]
    resid = max(res["pres"], res["dres"])
    if status is Status.OPTIMAL and (resid > settings.tol_feas * 10 and gap > settings.tol_gap):
        status = Status.NUMERICAL_FAILURE
    return ConicSolution(
        status=status,
        primal_value=primal,
        dual_value=dual,
        primal_point=point_fn(res),
        duality_gap=gap if status is not Status.OPTIMAL else max(gap, abs(dual - primal)),
        max_residual=resid,
        iterations=res["iterations"],
        certified=res["certified"],
        dual_point=res["y"],
    )


# ---------------------------------------------------------------------------
# SDP front end


def _sdp_to_cone(sdp: SemidefiniteProgram, sense: str):
    sign = -1.0 if sense == "max" else 1.0
    starts = np.concatenate([[0], np.cumsum(sdp.blocks)])
    psd = [(s, e) for s, e in zip(starts[:-1], starts[1:]) if e - s > 1]
    scal = [s for s, e in zip(starts[:-1], starts[1:]) if e - s == 1]
    ineq = [k for k, (_, rel, _) in enumerate(sdp.constraints) if rel is not Relation.EQ]
    m = len(sdp.constraints)
    l = len(scal) + len(ineq)
    A_blk = [np.empty((m, e - s, e - s)) for s, e in psd]
    A_lin = np.zeros((m, l))
    b = np.empty(m)
    for k, (A, rel, bound) in enumerate(sdp.constraints):
        for q, (s, e) in enumerate(psd):
            A_blk[q][k] = A[s:e, s:e]
        for q, s in enumerate(scal):
            A_lin[k, q] = A[s, s]
        b[k] = bound
    for q, k in enumerate(ineq):
        A_lin[k, len(scal) + q] = 1.0 if sdp.constraints[k][1] is Relation.LE else -1.0
    C_blk = [sign * sdp.objective[s:e, s:e] for s, e in psd]
    c_lin = np.zeros(l)
    c_lin[: len(scal)] = [sign * sdp.objective[s, s] for s in scal]
    tb = sdp.trace_bound if sdp.trace_bound is not None else math.inf
    upper = np.full(l, math.inf)
    upper[: len(scal)] = tb
    if math.isfinite(tb):
        # slack of a row is bounded by |<A_k, G>| + |b_k| <= ||A_k||_2 Tr G + |b_k|
        for q, k in enumerate(ineq):
            A = sdp.constraints[k][0]
            upper[len(scal) + q] = np.abs(np.linalg.eigvalsh(A)).max() * tb + abs(sdp.constraints[k][2])
    cone = _Cone(sizes=[e - s for s, e in psd], A_blk=A_blk, C_blk=C_blk, A_lin=A_lin, c_lin=c_lin, b=b,
                 blk_trace_bound=[tb] * len(psd), lin_upper=upper)
    return cone, sign, psd, scal


def solve_sdp(sdp: SemidefiniteProgram, sense: str = "max", settings: SolverSettings | None = None) -> ConicSolution:
    """Solve ``sdp``; ``dual_value`` bounds the optimum in the requested sense."""
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    settings = settings or SolverSettings()
    cone, sign, psd, scal = _sdp_to_cone(sdp, sense)
    res = _solve_cone(cone, settings)

    def point(r):
        G = np.zeros((sdp.dim, sdp.dim))
        for (s, e), Xs in zip(psd, r["X"]):
            G[s:e, s:e] = Xs
        for q, s in enumerate(scal):
            G[s, s] = r["x"][q]
        return G

    sol = _finish(res, sign, sdp.offset, point, settings)
    return sol


# ---------------------------------------------------------------------------


def hermitian_real_embedding(H) -> np.ndarray:
    """Return ``[[Re H, -Im H], [Im H, Re H]]`` for a Hermitian ``H``.

    The embedding is PSD exactly when ``H`` is, each eigenvalue appears
    twice, and ``Tr emb(A) emb(B) = 2 Re Tr(A B)``.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.allclose(H, H.conj().T, rtol=0.0, atol=1e-12):
        raise ValueError("matrix is not Hermitian")
    re, im = H.real, H.imag
    return np.block([[re, -im], [im, re]])


# ---------------------------------------------------------------------------
# line-oriented debug dump


def _entries(vec, tol=0.0):
    idx = np.flatnonzero(np.abs(vec) > tol)
    return " ".join(f"{i}:{vec[i]:.17g}" for i in idx)


def dump_lp(lp: LinearProgram, sense: str = "max") -> str:
    lines = [f"lp {lp.n_vars}", f"objective {sense} {_entries(lp.objective)}".rstrip()]
    for coeffs, rel, bound in lp.constraint_rows:
        lines.append(f"{rel.value} {bound:.17g} {_entries(coeffs)}".rstrip())
    for j, (lo, hi) in enumerate(lp.variable_bounds):
        lines.append(f"bound {j} {lo:.17g} {hi:.17g}")
    return "\n".join(lines) + "\n"


def dump_sdp(sdp: SemidefiniteProgram, sense: str = "max") -> str:
    lines = [f"sdp {sdp.dim}", "blocks " + " ".join(str(b) for b in sdp.blocks),
             f"objective {sense} {_entries(sdp.objective.ravel())}".rstrip()]
    for A, rel, bound in sdp.constraints:
        lines.append(f"{rel.value} {bound:.17g} {_entries(A.ravel())}".rstrip())
    return "\n".join(lines) + "\n"


def _parse_entries(tokens, size):
    vec = np.zeros(size)
    for tok in tokens:
        i, v = tok.split(":")
        vec[int(i)] = float(v)
    return vec


def load_problem(text: str):
    """Parse a dump produced by :func:`dump_lp` or :func:`dump_sdp`.

    Returns ``(problem, sense)``.
    """
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    kind, size = lines[0][0], int(lines[0][1])
    if kind == "lp":
        _, sense, *toks = lines[1]
        obj = _parse_entries(toks, size)
        rows, bounds = [], [None] * size
        for ln in lines[2:]:
            if ln[0] == "bound":
                bounds[int(ln[1])] = (float(ln[2]), float(ln[3]))
            else:
                rows.append((_parse_entries(ln[2:], size), ln[0], float(ln[1])))
        return LinearProgram(obj, rows, bounds), sense
    if kind == "sdp":
        blocks = tuple(int(t) for t in lines[1][1:])
        _, sense, *toks = lines[2]
        obj = _parse_entries(toks, size * size).reshape(size, size)
        cons = [(_parse_entries(ln[2:], size * size).reshape(size, size), ln[0], float(ln[1])) for ln in lines[3:]]
        return SemidefiniteProgram(size, obj, cons, blocks=blocks), sense
    raise ValueError(f"unknown problem kind {kind!r}")


def lp_as_diagonal_sdp(lp: LinearProgram) -> SemidefiniteProgram:
    """Embed an LP with lower bounds 0 as an SDP constraining only the diagonal."""
    n = lp.n_vars
    if any(lo != 0.0 for lo, _ in lp.variable_bounds):
        raise ValueError("diagonal embedding needs zero lower bounds")
    cons = [(np.diag(a), rel, b) for a, rel, b in lp.constraint_rows]
    for j, (_, hi) in enumerate(lp.variable_bounds):
        if math.isfinite(hi):
            e = np.zeros(n)
            e[j] = 1.0
            cons.append((np.diag(e), Relation.LE, hi))
    return SemidefiniteProgram(n, np.diag(lp.objective), cons)
