"""Linear-program relaxation of the phase-error bound (qubit plus leakage split).

Each joint signal is written as a |q~> + b |perp>, with |q~> inside a
two-qubit space spanned by the encoded states times a fixed leakage
reference. Eve's pass functional on the qubit space is parametrized by
Pauli transmission rates q_mn = E(sigma_m (x) sigma_n); the leakage part
of every detection probability is only bounded through the eigenvalues
of the 2x2 matrix [[0, a b*], [a* b, |b|^2]].

The qubit frame of each party is its logical key basis (phase i on the
logical bit-1 state, Bob's bits flipped), the same convention as the
SDP, so the phase-error numerator is E((I - X (x) X) / 2).

Box rows |q_mn| <= q_II hold because I (x) I +/- sigma_m (x) sigma_n >= 0
and E is a positive functional; q_II = E(I) <= 4 since E <= identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .conic import LinearProgram, Relation, SolverSettings, Status, solve_lp
from .detection import ChannelParams, single_photon_pass_probs
from .optics import PolarizationAngles, Protocol, SignalGram, assemble_gram, encoded_gram, jones_vector, \
    protocol_states, setting_labels
from .security import bob_logical_order, relabel_phases

__all__ = [
    "PAULI",
    "QubitLeakageSplit",
    "qubit_leakage_split",
    "reference_overlaps",
    "logical_frame",
    "m_matrix_eigbounds",
    "build_pereira_lp",
    "pereira_phase_error",
    "ToyProblem",
    "leaky_third_state_toy",
]

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}
_NAMES = [m + n for m in "IXYZ" for n in "IXYZ"]
_OPS = [np.kron(PAULI[m], PAULI[n]) for m in "IXYZ" for n in "IXYZ"]


@dataclass(frozen=True)
class QubitLeakageSplit:
    a: complex
    b: complex
    qubit_part: np.ndarray  # normalized two-qubit coefficients in the logical frame

    def __post_init__(self):
        if abs(abs(self.a) ** 2 + abs(self.b) ** 2 - 1.0) > 1e-12:
            raise ValueError("|a|^2 + |b|^2 must equal 1")


def qubit_leakage_split(qubit_vector: np.ndarray, reference_overlap: complex) -> QubitLeakageSplit:
    """Split given the encoded two-qubit vector and <R|leak> for the setting."""
    v = np.asarray(qubit_vector, dtype=complex)
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        raise ValueError("zero-norm projection onto the qubit space")
    a = complex(reference_overlap)
    if abs(a) < 1e-15:
        raise ValueError("signal has no overlap with the leakage reference")
    b = math.sqrt(max(0.0, 1.0 - abs(a) ** 2))
    return QubitLeakageSplit(a, b, v / norm)


def reference_overlaps(leak_gram: np.ndarray, reference: Sequence[int]) -> np.ndarray:
    """<R|chi_s> for every s, with R the normalized sum of the reference leakage states."""
    G = np.asarray(leak_gram, dtype=complex)
    ref = list(reference)
    norm2 = G[np.ix_(ref, ref)].sum().real
    if norm2 <= 0:
        raise ValueError("reference leakage state has zero norm")
    return G[ref, :].sum(axis=0) / math.sqrt(norm2)


def logical_frame(states: Sequence[PolarizationAngles], phases: Sequence[complex]) -> np.ndarray:
    """Coefficients (n, 2) of each encoded state in the party's logical key basis."""
    vecs = [p * jones_vector(s) for s, p in zip(states, phases)]
    frame = np.array(vecs[:2])
    if abs(np.vdot(frame[0], frame[1])) > 1e-12:
        raise ValueError("key-basis states must be orthogonal")
    return np.array([frame.conj() @ v for v in vecs])


def m_matrix_eigbounds(a: complex, b: complex) -> tuple:
    if abs(a) ** 2 + abs(b) ** 2 > 1 + 1e-9:
        raise ValueError("|a|^2 + |b|^2 exceeds 1")
    b2 = abs(b) ** 2
    root = math.sqrt(b2 * b2 + 4 * abs(a) ** 2 * b2)
    return (b2 - root) / 2, (b2 + root) / 2


def _pauli_row(c: np.ndarray) -> np.ndarray:
    """E(|c><c|) = row . q, using |c><c| = 1/4 sum <c|P|c> P."""
    return np.array([np.real(np.vdot(c, P @ c)) for P in _OPS]) / 4


def build_pereira_lp(splits: dict, p_pass: dict, key_basis=(0, 0)) -> LinearProgram:
    """LP in the 16 Pauli rates; objective is e_ph with the exact key-basis
    normalization. ``p_pass`` must hold exact (single-photon) values."""
    for key, v in p_pass.items():
        if isinstance(v, (tuple, list)):
            raise ValueError("interval detection statistics are not supported")
    i, j = key_basis
    keys = [(i, j, x, y) for x in (0, 1) for y in (0, 1)]
    for k in keys:
        if abs(splits[k].b) > 1e-12:
            raise ValueError("key-basis signals must lie in the qubit space")
    D = sum(p_pass[k] for k in keys)
    if D <= 0:
        raise ValueError("key-basis pass probability must be positive")
    rows = []
    for key in sorted(p_pass):
        sp = splits[key]
        row = abs(sp.a) ** 2 * _pauli_row(sp.qubit_part)
        lam_lo, lam_hi = m_matrix_eigbounds(sp.a, sp.b)
        p = p_pass[key]
        if lam_lo == lam_hi:
            rows.append((row, Relation.EQ, p - lam_lo))
        else:
            rows.append((row, Relation.LE, p - lam_lo))
            rows.append((row, Relation.GE, p - lam_hi))
    ii = _NAMES.index("II")
    for k in range(16):
        if k == ii:
            continue
        for sgn in (1.0, -1.0):
            r = np.zeros(16)
            r[k], r[ii] = sgn, -1.0
            rows.append((r, Relation.LE, 0.0))
    obj = np.zeros(16)
    obj[ii] = 0.5 / D
    obj[_NAMES.index("XX")] = -0.5 / D
    bounds = [(-4.0, 4.0)] * 16
    bounds[ii] = (0.0, 4.0)
    return LinearProgram(obj, rows, bounds)


def pereira_phase_error(lp: LinearProgram, settings: SolverSettings | None = None):
    """Dual-certified maximum of e_ph, clipped to [0, 1/2]; 1/2 on failure."""
    sol = solve_lp(lp, "max", settings)
    if sol.status is Status.INFEASIBLE:
        raise RuntimeError("Pauli-rate LP is infeasible")
    if sol.status is not Status.OPTIMAL:
        return 0.5, sol
    return float(min(0.5, max(0.0, sol.dual_value))), sol


# ---------------------------------------------------------------------------
# leaky third-state toy


@dataclass
class ToyProblem:
    gram: SignalGram
    p_pass: dict
    splits: dict


def leaky_third_state_toy(epsilon: float, params: ChannelParams) -> ToyProblem:
    """Three-state protocol whose third (test) state carries leakage
    sqrt(eps)|vac> + sqrt(1 - eps)|1> on both sides; key states do not leak."""
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    sa = protocol_states(Protocol.THREE_STATE)
    sb = bob_logical_order(sa)
    ph = relabel_phases(len(sa))
    s = math.sqrt(epsilon)
    leak = np.array([[1, 1, s], [1, 1, s], [s, s, 1]], dtype=complex)
    la, lb = setting_labels(len(sa)), setting_labels(len(sb))
    gram = assemble_gram(encoded_gram(sa, ph) * leak, encoded_gram(sb, ph) * leak, la, lb)
    gram.check()
    p_pass = single_photon_pass_probs(sa, sb, params).p_pass
    # reference: the vacuum, i.e. the key-state leakage
    ov = reference_overlaps(np.kron(leak, leak), [0])
    fa, fb = logical_frame(sa, ph), logical_frame(sb, ph)
    splits = {}
    for ka, (i, x) in enumerate(la):
        for kb, (j, y) in enumerate(lb):
            splits[(i, j, x, y)] = qubit_leakage_split(np.kron(fa[ka], fb[kb]), ov[ka * len(lb) + kb])
    return ToyProblem(gram, p_pass, splits)
