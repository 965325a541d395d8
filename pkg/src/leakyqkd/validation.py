"""Oracle suite behind ``leakyqkd validate``.

Every check compares a production code path against an independent
reference: brute-force Fock enumeration, planted decoy yields, LP vertex
enumeration, dense quadrature of the phase profile, explicit attacks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .conic import LinearProgram, Relation, SolverSettings, Status, solve_lp
from .decoy import bound_single_photon_yields, poisson_weights
from .detection import (
    ChannelParams,
    DetectionTable,
    fock_oracle_pass_prob,
    poisson_mixture_oracle,
    single_photon_pass_probs,
    wcp_detection_table,
)
from .optics import (
    LeakageModel,
    PhaseProfile,
    PolarizationAngles,
    Protocol,
    fractional_phase_profile,
    jones_vector,
    leakage_gram,
    make_leakage,
    profile_knots,
    protocol_states,
    signal_gram,
)
from .security import PhaseErrorProblem, bob_logical_order, max_phase_error, relabel_phases

__all__ = [
    "CheckResult",
    "check_fock_oracle",
    "check_poisson_oracle",
    "check_decoy_brackets",
    "check_lp_vertices",
    "check_phase_profile",
    "check_planted_eve",
    "check_certificates",
    "planted_decoy_table",
    "planted_eve_instance",
    "run_validation",
]

CERT_GAP = 1e-7
_trapezoid = getattr(np, "trapezoid", None) or np.trapz
CERT_RESIDUAL = 1e-8


@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: residual {self.residual:.3e} {self.detail}".rstrip()


def _random_angles(rng) -> PolarizationAngles:
    return PolarizationAngles(float(rng.uniform(0, math.pi / 2)), float(rng.uniform(-math.pi, math.pi)))


def _random_channel(rng) -> ChannelParams:
    return ChannelParams(
        distance_a_km=float(rng.uniform(0, 60)),
        distance_b_km=float(rng.uniform(0, 60)),
        detector_efficiency=float(rng.uniform(0.2, 1.0)),
        dark_count_prob=float(10 ** rng.uniform(-7, -3)),
        misalignment=float(rng.uniform(0, 0.05)),
    )


def check_fock_oracle(n: int = 50, seed: int = 0, tol: float = 1e-10) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        sa, sb, params = _random_angles(rng), _random_angles(rng), _random_channel(rng)
        fast = single_photon_pass_probs([sa], [sb], params, [(0, 0)], [(0, 0)]).p_pass[(0, 0, 0, 0)]
        ref = fock_oracle_pass_prob((sa, sb), params, truncation=2)
        worst = max(worst, abs(fast - ref))
    return CheckResult("single-photon pass vs Fock oracle", worst <= tol, worst, f"({n} settings)")


def check_poisson_oracle(n: int = 10, seed: int = 1, tol: float = 1e-9) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        sa, sb, params = _random_angles(rng), _random_angles(rng), _random_channel(rng)
        mu, nu = (float(x) for x in rng.uniform(1e-5, 1e-3, 2))
        table = wcp_detection_table([sa], [sb], [mu], [nu], params, labels_a=[(0, 0)], labels_b=[(0, 0)])
        ref = poisson_mixture_oracle((sa, sb), mu, nu, params, max_photons=4)
        worst = max(worst, abs(table[(0, 0, 0, 0, 0, 0)] - ref))
    return CheckResult("WCP table vs Poisson-mixture oracle", worst <= tol, worst, f"({n} settings, mu <= 1e-3)")


def planted_decoy_table(rng, intensities=(0.05, 0.1, 0.6), cutoff: int = 30):
    """Table generated from random yields y[m, n]; returns (table, y)."""
    y = rng.uniform(0, 1, size=(cutoff + 1, cutoff + 1))
    y[0, 0] = rng.uniform(0, 1e-3)
    q = {}
    for k, mu in enumerate(intensities):
        for l, nu in enumerate(intensities):
            q[(k, l, 0, 0, 0, 0)] = float(np.sum(poisson_weights(mu, nu, cutoff) * y))
    return DetectionTable(q, list(intensities), list(intensities)), y


def check_decoy_brackets(n: int = 100, seed: int = 2, n_max: int = 10, settings=None,
                         tol: float = 1e-9) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, failures = 0.0, 0
    for _ in range(n):
        table, y = planted_decoy_table(rng)
        try:
            lo, hi = bound_single_photon_yields(table, n_max, settings).bounds[(0, 0, 0, 0)]
        except RuntimeError:
            # a table the LP rejects is as much a failure as a missed bracket
            failures += 1
            worst = math.inf
            continue
        miss = max(lo - y[1, 1], y[1, 1] - hi, 0.0)
        worst = max(worst, miss)
        failures += miss > tol
    return CheckResult("planted-yield decoy brackets", failures == 0, worst, f"({failures}/{n} misses)")


def _vertex_optimum(lp: LinearProgram) -> float | None:
    """Max of the objective by enumerating basic solutions (small LPs only)."""
    n = lp.n_vars
    rows = [(c, b) for c, rel, b in lp.constraint_rows if rel is Relation.LE]
    rows += [(-c, -b) for c, rel, b in lp.constraint_rows if rel is Relation.GE]
    for k, (lo, hi) in enumerate(lp.variable_bounds):
        e = np.zeros(n)
        e[k] = 1.0
        rows += [(e, hi), (-e, -lo)]
    A = np.array([r[0] for r in rows])
    b = np.array([r[1] for r in rows])
    best = None
    for idx in itertools.combinations(range(len(rows)), n):
        sub = A[list(idx)]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        x = np.linalg.solve(sub, b[list(idx)])
        if np.all(A @ x <= b + 1e-9):
            v = float(lp.objective @ x)
            best = v if best is None else max(best, v)
    return best


def check_lp_vertices(n: int = 30, seed: int = 3, tol: float = 1e-6, settings=None) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        nv = int(rng.integers(2, 4))
        rows = [(rng.normal(size=nv), Relation.LE, float(rng.uniform(0.2, 2))) for _ in range(int(rng.integers(1, 4)))]
        lp = LinearProgram(rng.normal(size=nv), rows, [(0.0, float(rng.uniform(0.5, 2)))] * nv)
        ref = _vertex_optimum(lp)
        sol = solve_lp(lp, "max", settings)
        if ref is None or sol.status is not Status.OPTIMAL:
            worst = math.inf
            continue
        worst = max(worst, abs(sol.dual_value - ref))
    return CheckResult("LP optimum vs vertex enumeration", worst <= tol, worst, f"({n} programs)")


def check_phase_profile(L: float = 150.0, w: float = 200.0, tol: float = 1e-9) -> CheckResult:
    prof = PhaseProfile(L, w)
    knots = profile_knots(prof)
    peak = max(fractional_phase_profile(np.array(knots), prof))
    exact_area = float(_trapezoid(fractional_phase_profile(np.array(knots), prof), knots))
    quad_area = integrate.quad(lambda t: fractional_phase_profile(t, prof), -50, knots[-1] + 50,
                               points=knots, limit=200)[0]
    t = np.linspace(-50, knots[-1] + 50, 200001)
    riemann = float(np.sum(fractional_phase_profile(t, prof)) * (t[1] - t[0]))
    expected_peak = min(w / (2 * L), 1.0)
    res = max(abs(peak - expected_peak), abs(knots[-1] - knots[0] - (w + 2 * L)), abs(quad_area - exact_area))
    ok = res <= tol and abs(riemann - exact_area) <= 1e-6 * max(exact_area, 1.0)
    return CheckResult("phase-profile peak, support and quadrature", ok, res,
                       f"(peak {peak:.12g}, support {knots[-1] - knots[0]:.12g})")


def _party_vectors(states, phases, leak_specs):
    """Columns (encoded, leakage) with encoded_gram * leakage_gram as Gram."""
    enc = np.array([p * jones_vector(s) for s, p in zip(states, phases)]).T
    w, U = np.linalg.eigh(leakage_gram(leak_specs))
    keep = w > 1e-14 * w.max()
    leak = (U[:, keep] * np.sqrt(w[keep])).conj().T
    return enc, leak


def _bell_states() -> list:
    s = 1 / math.sqrt(2)
    return [np.array(v, dtype=complex) * s for v in ([1, 0, 0, 1], [1, 0, 0, -1], [0, 1, 1, 0], [0, 1, -1, 0])]


def planted_eve_instance(rng, settings: SolverSettings | None = None):
    """Explicit attack on explicit signal vectors.

    Eve projects the encoded qubits onto a Bell state (ignoring the
    leakage) and mixes in a random operator that also reads the leakage.
    Returns (true e_ph, SDP bound, diagnostics).
    """
    protocol = Protocol.BB84 if rng.random() < 0.5 else Protocol.THREE_STATE
    model = list(LeakageModel)[int(rng.integers(3))]
    alpha_sq = float(10 ** rng.uniform(-4, -1))
    sa = protocol_states(protocol)
    sb = bob_logical_order(sa)
    ph = relabel_phases(len(sa))
    la, lb = make_leakage(sa, model, alpha_sq), make_leakage(sb, model, alpha_sq)
    gram = signal_gram(la, lb, ph, ph)
    ea, xa = _party_vectors(sa, ph, [lk for _, lk in la])
    eb, xb = _party_vectors(sb, ph, [lk for _, lk in lb])
    # joint vectors ordered (enc_a, enc_b, leak_a, leak_b), settings a-major
    V = np.array([np.kron(np.kron(ea[:, s], eb[:, t]), np.kron(xa[:, s], xb[:, t]))
                  for s in range(len(sa)) for t in range(len(sb))]).T
    if np.abs(V.conj().T @ V - gram.entries).max() > 1e-10:
        raise AssertionError("explicit signal vectors do not reproduce the Gram")
    dim_leak = V.shape[0] // 4
    K = rng.normal(size=(V.shape[0],) * 2) + 1j * rng.normal(size=(V.shape[0],) * 2)
    R = K.conj().T @ K
    R /= np.linalg.eigvalsh(R).max()
    t = float(rng.uniform(0.0, 0.3))
    scale = float(rng.uniform(0.2, 1.0))
    idx = {tuple(l): k for k, l in enumerate(gram.labels)}
    best = None
    for bell in _bell_states():
        E = scale * ((1 - t) * np.kron(np.outer(bell, bell.conj()), np.eye(dim_leak)) + t * R)
        GP = V.conj().T @ E @ V
        p_pass = {tuple(l): float(GP[k, k].real) for k, l in enumerate(gram.labels)}
        D = sum(p_pass[(0, 0, x, y)] for x in (0, 1) for y in (0, 1))
        if D <= 1e-9:
            continue
        N = (GP[idx[(0, 0, 0, 0)], idx[(0, 0, 1, 1)]] + GP[idx[(0, 0, 0, 1)], idx[(0, 0, 1, 0)]]).real
        true = 0.5 - N / D
        if best is None or true < best[0]:
            best = (true, p_pass)
    true, p_pass = best
    bound, diag = max_phase_error(PhaseErrorProblem.exact(gram, p_pass), settings)
    return true, bound, diag


def check_planted_eve(n: int = 20, seed: int = 4, tol: float = 1e-6, settings=None) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(n):
        true, bound, _ = planted_eve_instance(rng, settings)
        worst = max(worst, min(true, 0.5) - bound)
    return CheckResult("planted-attack phase error below SDP bound", worst <= tol, max(worst, 0.0),
                       f"({n} attacks)")


def check_certificates(settings: SolverSettings | None = None) -> CheckResult:
    """Reference solves must meet the certification thresholds."""
    params = ChannelParams(10.0)
    worst_gap = worst_res = 0.0
    ok = True
    for model in LeakageModel:
        sa = protocol_states(Protocol.BB84)
        sb = bob_logical_order(sa)
        ph = relabel_phases(len(sa))
        gram = signal_gram(make_leakage(sa, model, 1e-4), make_leakage(sb, model, 1e-4), ph, ph)
        p = single_photon_pass_probs(sa, sb, params).p_pass
        _, diag = max_phase_error(PhaseErrorProblem.exact(gram, p), settings)
        ok &= diag.status is Status.OPTIMAL
        worst_gap, worst_res = max(worst_gap, diag.duality_gap), max(worst_res, diag.max_residual)
    for lo, hi in bound_single_photon_yields(
            wcp_detection_table(sa, sb, [0.05, 0.1, 0.6], [0.05, 0.1, 0.6], params), 10, settings).bounds.values():
        ok &= lo <= hi
    ok &= worst_gap <= CERT_GAP and worst_res <= CERT_RESIDUAL
    return CheckResult("solver certificates (gap, residual)", bool(ok), max(worst_gap, worst_res),
                       f"(gap {worst_gap:.2e}, residual {worst_res:.2e})")


def run_validation(settings: SolverSettings | None = None, quick: bool = False) -> list:
    scale = 5 if quick else 1
    return [
        check_phase_profile(),
        check_fock_oracle(n=50 // scale),
        check_poisson_oracle(n=10 // scale),
        check_decoy_brackets(n=100 // scale, settings=settings),
        check_lp_vertices(n=30 // scale, settings=settings),
        check_planted_eve(n=20 // scale, settings=settings),
        check_certificates(settings),
    ]
