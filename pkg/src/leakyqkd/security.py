"""Phase-error SDP and key-rate formulas.

Eve's vectors |e_{s,z}> (s a joint setting, z in {P, F}) enter only through
the two blocks G_P and G_F of her Gram matrix: the inner-product
constraints involve G_P + G_F and everything else involves G_P alone, so
the P-F cross block is unconstrained and any PSD pair completes to a PSD
G_E. Complex blocks are handled through the real embedding; the
unstructured real relaxation is exact because averaging a feasible point
with its conjugate-symmetric image keeps it feasible and optimal.

The relay announces the singlet, while the phase-error expression is
written for a Phi+ target. Bob's key bits are therefore relabeled (his
logical bit 0 is the state with phase pi) and the logical bit-1 key
states of both parties carry a global phase i, which maps the singlet
onto Phi+ up to a local unitary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conic import Relation, SemidefiniteProgram, SolverSettings, Status, solve_sdp
from .optics import SignalGram

__all__ = [
    "InconsistentInputsError",
    "PhaseErrorProblem",
    "KeyRateResult",
    "bob_logical_order",
    "relabel_phases",
    "build_phase_error_sdp",
    "build_reduced_sdp",
    "max_phase_error",
    "binary_entropy",
    "key_bit_error",
    "key_rate_single_photon",
    "key_rate_decoy",
]

KEY_BASIS = (0, 0)
# exact pass probabilities at or below this are treated as structural zeros
ZERO_PASS = 1e-15


class InconsistentInputsError(RuntimeError):
    """Detection statistics cannot arise from the given signal states."""


def bob_logical_order(states_b: list) -> list:
    """Swap Bob's two key-basis states so that correct events have x = y."""
    out = list(states_b)
    out[0], out[1] = out[1], out[0]
    return out


def relabel_phases(n_states: int) -> np.ndarray:
    """Global phases: i on the logical bit-1 key state, 1 elsewhere."""
    ph = np.ones(n_states, dtype=complex)
    ph[1] = 1j
    return ph


@dataclass
class PhaseErrorProblem:
    """Signal Gram plus detection data ``lower``/``upper`` keyed by (i, j, x, y).

    Single-photon sources give ``lower == upper``. ``denominator`` is the
    normalization of e_ph; by default the sum of the key-basis UPPER values
    (with ``Re N >= 0`` enforced this only over-estimates e_ph).
    """

    gram: SignalGram
    lower: dict
    upper: dict
    use_mismatch: bool = True
    denominator: float | None = None
    key_basis: tuple = KEY_BASIS

    def __post_init__(self):
        if set(self.lower) != set(self.upper):
            raise ValueError("lower and upper detection maps must share keys")
        for key in self.lower:
            if self.lower[key] > self.upper[key]:
                raise ValueError(f"p_lower > p_upper at {key}")
            if tuple(key) not in self.gram.labels:
                raise ValueError(f"detection label {key} not in the Gram labels")
        for key in self.key_settings():
            if key not in self.lower:
                raise ValueError(f"missing key-basis statistic {key}")
        if self.denominator is None:
            self.denominator = float(sum(self.upper[k] for k in self.key_settings()))
        if self.denominator <= 0:
            raise ValueError("key-basis pass probability must be positive")

    @classmethod
    def exact(cls, gram: SignalGram, p_pass: dict, **kw) -> "PhaseErrorProblem":
        return cls(gram, dict(p_pass), dict(p_pass), **kw)

    @classmethod
    def from_bounds(cls, gram: SignalGram, bounds, **kw) -> "PhaseErrorProblem":
        lo = {k: v[0] for k, v in bounds.bounds.items()}
        hi = {k: v[1] for k, v in bounds.bounds.items()}
        return cls(gram, lo, hi, **kw)

    def key_settings(self) -> list:
        i, j = self.key_basis
        return [(i, j, x, y) for x in (0, 1) for y in (0, 1)]


def _same_basis(a, b) -> bool:
    return a[0] == b[0] and a[1] == b[1]


class _Embed:
    """Linear functionals Re/Im G[a, b] on the real embedding of one block."""

    def __init__(self, n: int, dim: int):
        self.n = n
        self.dim = dim

    def re(self, a, b, offset=0, weight=1.0, out=None):
        A = np.zeros((self.dim, self.dim)) if out is None else out
        n, o = self.n, offset
        for p, q in ((a, b), (a + n, b + n)):
            A[o + p, o + q] += weight / 4
            A[o + q, o + p] += weight / 4
        return A

    def im(self, a, b, offset=0, weight=1.0, out=None):
        A = np.zeros((self.dim, self.dim)) if out is None else out
        n, o = self.n, offset
        for p, q, s in ((a + n, b, 1.0), (a, b + n, -1.0)):
            A[o + p, o + q] += s * weight / 4
            A[o + q, o + p] += s * weight / 4
        return A


def build_phase_error_sdp(problem: PhaseErrorProblem) -> SemidefiniteProgram:
    """SDP maximizing e_ph over block-diagonal G_P (+) G_F, real-embedded."""
    gram = problem.gram
    n = gram.size
    blk = 2 * n
    dim = 2 * blk
    emb = _Embed(n, dim)
    labels = [tuple(l) for l in gram.labels]
    cons = []
    for a in range(n):
        for b in range(a, n):
            if not problem.use_mismatch and not _same_basis(labels[a], labels[b]):
                continue
            g = gram.entries[a, b]
            A = emb.re(a, b)
            emb.re(a, b, offset=blk, out=A)
            cons.append((A, Relation.EQ, float(g.real)))
            if a != b:
                A = emb.im(a, b)
                emb.im(a, b, offset=blk, out=A)
                cons.append((A, Relation.EQ, float(g.imag)))
    for key in sorted(problem.lower):
        if not problem.use_mismatch and key[0] != key[1]:
            continue
        s = gram.index(key)
        A = emb.re(s, s)
        lo, hi = problem.lower[key], problem.upper[key]
        if lo == hi:
            cons.append((A, Relation.EQ, lo))
        else:
            cons.append((A, Relation.GE, lo))
            cons.append((A, Relation.LE, hi))
    # Re N = Re(<e00|e11> + <e01|e10>) on the P block
    idx = {k: gram.index(k) for k in problem.key_settings()}
    i, j = problem.key_basis
    N = emb.re(idx[(i, j, 0, 0)], idx[(i, j, 1, 1)])
    emb.re(idx[(i, j, 0, 1)], idx[(i, j, 1, 0)], out=N)
    D = problem.denominator
    cons.append((N, Relation.GE, 0.0))  # e_ph <= 1/2
    cons.append((N, Relation.LE, D / 2))  # e_ph >= 0
    return SemidefiniteProgram(
        dim=dim,
        objective=-N / D,
        constraints=cons,
        blocks=(blk, blk),
        # Tr(G_P + G_F) = Tr(signal Gram) = n, doubled by the embedding
        trace_bound=2.0 * float(np.trace(gram.entries).real),
        offset=0.5,
    )


def _range_factors(G: np.ndarray, rel_tol: float = 1e-13):
    """W with W^dag W = G restricted to eigenvalues above ``rel_tol * max``."""
    lam, V = np.linalg.eigh(G)
    keep = lam > rel_tol * max(lam.max(), 1.0)
    return np.sqrt(lam[keep])[:, None] * V[:, keep].conj().T


def _re_form(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Symmetric A with <A, emb(P)> = Re(a^dag P b) for Hermitian P."""
    ra = np.concatenate([a.real, a.imag])
    rb = np.concatenate([b.real, b.imag])
    ja = np.concatenate([-a.imag, a.real])
    jb = np.concatenate([-b.imag, b.real])
    A = np.outer(ra, rb) + np.outer(ja, jb)
    return (A + A.T) / 4


def build_reduced_sdp(problem: PhaseErrorProblem) -> SemidefiniteProgram:
    """Facially reduced form used by :func:`max_phase_error`.

    Inside each group of settings whose mutual overlaps are constrained
    (all settings, or one basis pair without mismatch data) the signal
    Gram factors as W^dag W. Any feasible G_P, G_F then read T^dag Pi T and
    T^dag S T with T = diag(W_k), Pi, S >= 0 and the group blocks of Pi + S
    equal to identity. This has strictly feasible points even when the
    signal Gram is singular.
    """
    gram = problem.gram
    labels = [tuple(l) for l in gram.labels]
    if problem.use_mismatch:
        groups = [list(range(gram.size))]
    else:
        bases = sorted({l[:2] for l in labels})
        groups = [[k for k, l in enumerate(labels) if l[:2] == b] for b in bases]
    factors = [_range_factors(gram.entries[np.ix_(g, g)]) for g in groups]
    r = sum(W.shape[0] for W in factors)
    T = np.zeros((r, gram.size), dtype=complex)
    spans = []
    row = 0
    for g, W in zip(groups, factors):
        T[row:row + W.shape[0], g] = W
        spans.append((row, row + W.shape[0]))
        row += W.shape[0]
    # settings Eve never passes pin Pi to the complement of their vectors
    skip = {k for k in problem.lower if problem.upper[k] <= ZERO_PASS}
    dead = [T[:, gram.index(k)] for k in sorted(skip)]
    Q = np.eye(r, dtype=complex)
    if dead:
        U, sv, _ = np.linalg.svd(np.array(dead).T, full_matrices=True)
        rank = int(np.sum(sv > 1e-12 * max(sv.max(), 1.0)))
        Q = U[:, rank:]
    Qr = np.block([[Q.real, -Q.imag], [Q.imag, Q.real]])
    bp, bs = Qr.shape[1], 2 * r
    dim = bp + bs
    cons = []

    def lift(B_pi, B_s=None):
        A = np.zeros((dim, dim))
        A[:bp, :bp] = Qr.T @ B_pi @ Qr
        if B_s is not None:
            A[bp:, bp:] = B_s
        return A

    # (Pi + S) restricted to each group block is the identity
    for lo, hi in spans:
        coords = list(range(lo, hi)) + list(range(lo + r, hi + r))
        for k, p in enumerate(coords):
            for q in coords[k:]:
                E = np.zeros((bs, bs))
                E[p, q] += 0.5
                E[q, p] += 0.5
                cons.append((lift(E, E), Relation.EQ, 1.0 if p == q else 0.0))

    def p_form(a, b):
        return lift(_re_form(T[:, a], T[:, b]))

    for key in sorted(problem.lower):
        if key in skip or (not problem.use_mismatch and key[0] != key[1]):
            continue
        A = p_form(gram.index(key), gram.index(key))
        lo, hi = problem.lower[key], problem.upper[key]
        if lo == hi:
            cons.append((A, Relation.EQ, lo))
        else:
            cons.append((A, Relation.GE, lo))
            cons.append((A, Relation.LE, hi))
    i, j = problem.key_basis
    idx = {k: gram.index(k) for k in problem.key_settings()}
    N = p_form(idx[(i, j, 0, 0)], idx[(i, j, 1, 1)]) + p_form(idx[(i, j, 0, 1)], idx[(i, j, 1, 0)])
    D = problem.denominator
    # only the e_ph <= 1/2 cut is kept: dropping e_ph >= 0 can only raise
    # the maximum, and keeps an interior when the ideal value is exactly 0
    cons.append((N, Relation.GE, 0.0))
    return SemidefiniteProgram(
        dim=dim,
        objective=-N / D,
        constraints=cons,
        blocks=(bp, bs),
        trace_bound=float(dim),
        offset=0.5,
    )


@dataclass
class PhaseErrorDiagnostics:
    status: Status
    primal_value: float
    dual_value: float
    duality_gap: float
    max_residual: float
    iterations: int
    conservative: bool = False


def max_phase_error(problem: PhaseErrorProblem, settings: SolverSettings | None = None):
    """Certified upper bound on e_ph and solver diagnostics.

    The dual value is used, clipped to [0, 1/2]. A numerical failure gives
    the conservative 1/2. If the e_ph <= 1/2 cut alone empties the feasible
    set, the true phase error exceeds 1/2 and 1/2 is returned as well.
    """
    sdp = build_reduced_sdp(problem)
    sol = solve_sdp(sdp, "max", settings)
    diag = PhaseErrorDiagnostics(sol.status, sol.primal_value, sol.dual_value, sol.duality_gap,
                                 sol.max_residual, sol.iterations)
    if sol.status is Status.OPTIMAL:
        return float(min(0.5, max(0.0, sol.dual_value))), diag
    if sol.status is Status.INFEASIBLE:
        relaxed = SemidefiniteProgram(sdp.dim, sdp.objective, sdp.constraints[:-1], sdp.blocks,
                                      sdp.trace_bound, sdp.offset)
        if solve_sdp(relaxed, "max", settings).status is Status.INFEASIBLE:
            raise InconsistentInputsError("detection statistics are incompatible with the signal Gram")
    diag.conservative = True
    return 0.5, diag


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy argument {x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return float(-x * math.log2(x) - (1 - x) * math.log2(1 - x))


def key_bit_error(stats: dict, key_basis=KEY_BASIS) -> tuple:
    """(total key-basis pass probability, bit error rate) from a (i,j,x,y) map."""
    i, j = key_basis
    total = sum(stats[(i, j, x, y)] for x in (0, 1) for y in (0, 1))
    wrong = stats[(i, j, 0, 1)] + stats[(i, j, 1, 0)]
    return total, (wrong / total if total > 0 else 0.5)


@dataclass
class KeyRateResult:
    rate: float
    e_ph_bound: float
    e_bit: float
    p_pass_key: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rate < 0 or not 0 <= self.e_ph_bound <= 0.5:
            raise ValueError("invalid key-rate result")


def _prob(name, v):
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name}={v} is not a probability")


def key_rate_single_photon(p_pass_key: float, e_bit: float, e_ph: float) -> KeyRateResult:
    for name, v in (("p_pass_key", p_pass_key), ("e_bit", e_bit), ("e_ph", e_ph)):
        _prob(name, v)
    e_ph = min(e_ph, 0.5)
    raw = p_pass_key * (1.0 - binary_entropy(e_ph) - binary_entropy(e_bit))
    return KeyRateResult(max(0.0, raw), e_ph, e_bit, p_pass_key, {"raw_rate": raw})


def key_rate_decoy(q_key: float, e_bit: float, p11_lower: float, e_ph_upper: float) -> KeyRateResult:
    """``p11_lower`` is the single-photon pass probability entering the
    rate as given (the caller decides on photon-number weighting)."""
    for name, v in (("q_key", q_key), ("e_bit", e_bit), ("p11_lower", p11_lower), ("e_ph", e_ph_upper)):
        _prob(name, v)
    e_ph_upper = min(e_ph_upper, 0.5)
    raw = p11_lower * (1.0 - binary_entropy(e_ph_upper)) - q_key * binary_entropy(e_bit)
    return KeyRateResult(max(0.0, raw), e_ph_upper, e_bit, p11_lower, {"raw_rate": raw, "q_key": q_key})
