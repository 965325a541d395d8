"""Polarization states, leakage-light models and the joint signal Gram matrix."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "PolarizationAngles",
    "PhaseProfile",
    "LeakageModel",
    "LeakageSpec",
    "SignalGram",
    "Protocol",
    "fractional_phase_profile",
    "profile_knots",
    "protocol_states",
    "setting_labels",
    "jones_vector",
    "encoded_overlap",
    "leakage_overlap",
    "leakage_gram",
    "encoded_gram",
    "assemble_gram",
    "signal_gram",
    "wrap_phase",
    "make_leakage",
]

LEAK_THETA = math.pi / 4


def wrap_phase(phi: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = math.remainder(float(phi), 2 * math.pi)
    if w <= -math.pi + 1e-15:
        w += 2 * math.pi
    return w


@dataclass(frozen=True)
class PolarizationAngles:
    """Bloch-sphere angles of ``cos(theta)|H> + sin(theta) e^{i phi}|V>``.

    Note the polar angle is half the usual Bloch convention: theta = pi/4 is
    the equator.
    """

    theta: float
    phi: float

    def __post_init__(self):
        if not -1e-12 <= self.theta <= math.pi + 1e-12:
            raise ValueError(f"theta={self.theta} outside [0, pi]")
        object.__setattr__(self, "phi", wrap_phase(self.phi))

    def bloch_vector(self) -> np.ndarray:
        s = math.sin(2 * self.theta)
        return np.array([s * math.cos(self.phi), s * math.sin(self.phi), math.cos(2 * self.theta)])


def jones_vector(a: PolarizationAngles) -> np.ndarray:
    return np.array([math.cos(a.theta), math.sin(a.theta) * np.exp(1j * a.phi)])


def encoded_overlap(a: PolarizationAngles, b: PolarizationAngles) -> complex:
    """Single-photon inner product <a|b>."""
    return complex(
        math.cos(a.theta) * math.cos(b.theta)
        + math.sin(a.theta) * math.sin(b.theta) * np.exp(1j * (b.phi - a.phi))
    )


# ---------------------------------------------------------------------------
# modulator phase profile


@dataclass(frozen=True)
class PhaseProfile:
    """Counter-propagating transit through a phase modulator.

    ``pm_length_L`` is the modulator transit time and ``pulse_width_w`` the
    square voltage pulse width, both in ps.
    """

    pm_length_L: float = 150.0
    pulse_width_w: float = 200.0

    def __post_init__(self):
        if not self.pm_length_L > 0:
            raise ValueError("pm_length_L must be positive")
        if self.pulse_width_w < 0:
            raise ValueError("pulse_width_w must be non-negative")

    @property
    def support_length(self) -> float:
        return self.pulse_width_w + 2 * self.pm_length_L

    @property
    def peak(self) -> float:
        return min(self.pulse_width_w / (2 * self.pm_length_L), 1.0)


def fractional_phase_profile(t, profile: PhaseProfile = PhaseProfile()):
    """Fraction of the encoded phase picked up by the leakage slice crossing
    the modulator exit at time ``t`` (ps).

    Piecewise linear with knots at 0, min(w, 2L), max(w, 2L) and w + 2L.
    Accepts scalars or arrays.
    """
    L, w = profile.pm_length_L, profile.pulse_width_w
    t = np.asarray(t, dtype=float)
    upper = np.minimum(t + L, (t + 2 * L + w) / 2)
    lower = np.maximum(t, (t + 2 * L) / 2)
    f = np.clip(upper - lower, 0.0, None) / L
    f = np.where(t < 0, 0.0, f)
    return float(f) if f.ndim == 0 else f


def profile_knots(profile: PhaseProfile) -> tuple:
    L, w = profile.pm_length_L, profile.pulse_width_w
    return (0.0, min(w, 2 * L), max(w, 2 * L), w + 2 * L)


# ---------------------------------------------------------------------------
# protocols


class Protocol(str, enum.Enum):
    THREE_STATE = "three_state"
    BB84 = "bb84"
    N_STATE = "n_state"


def setting_labels(n_states: int) -> list:
    """(basis, bit) labels by position: pairs of states share a basis."""
    return [(k // 2, k % 2) for k in range(n_states)]


def protocol_states(
    protocol,
    flaw_delta: float = 0.0,
    test_phi_override: float | None = None,
    phis: Sequence[float] | None = None,
) -> list:
    """Equatorial encoded states for ``protocol``.

    The key basis is {phi = 0, pi}. BB84 adds the test pair {pi/2, -pi/2};
    the three-state protocol keeps only pi/2. A preparation flaw shifts the
    test azimuths by ``flaw_delta``; ``test_phi_override`` puts the test
    pair at (|H> +- e^{i phi}|V>)/sqrt2, i.e. azimuths {phi, phi + pi}.
    ``phis`` gives the azimuths for ``Protocol.N_STATE``.
    """
    protocol = Protocol(protocol)
    if abs(flaw_delta) >= math.pi / 4:
        raise ValueError("flaw_delta must satisfy |delta| < pi/4")
    if protocol is Protocol.N_STATE:
        if phis is None or len(phis) < 3:
            raise ValueError("n_state needs at least three azimuths")
        wrapped = [wrap_phase(p) for p in phis]
        for i in range(len(wrapped)):
            for j in range(i):
                if abs(wrap_phase(wrapped[i] - wrapped[j])) < 1e-12:
                    raise ValueError("duplicate azimuth in n_state protocol")
        key, test = wrapped[:2], wrapped[2:]
    else:
        key = [0.0, math.pi]
        test = [math.pi / 2, -math.pi / 2]
        if test_phi_override is not None:
            test = [test_phi_override, test_phi_override + math.pi]
        if protocol is Protocol.THREE_STATE:
            test = test[:1]
    test = [p + flaw_delta for p in test]
    return [PolarizationAngles(math.pi / 4, p) for p in key + test]


# ---------------------------------------------------------------------------
# leakage light


class LeakageModel(str, enum.Enum):
    FULL_INFO = "model1"
    STATIC_COHERENT = "model2"
    TIME_DEPENDENT = "model3"


@dataclass(frozen=True)
class LeakageSpec:
    """Leakage state accompanying one encoded setting.

    ``intensity_alpha_sq`` is the total mean photon number |alpha|^2 and
    ``duration_delta`` (ps) the window carrying encoding information.
    """

    model: LeakageModel
    intensity_alpha_sq: float
    encoded_angles: PolarizationAngles
    profile: PhaseProfile = field(default_factory=PhaseProfile)
    duration_delta: float = 500.0

    def __post_init__(self):
        object.__setattr__(self, "model", LeakageModel(self.model))
        if self.intensity_alpha_sq < 0:
            raise ValueError("intensity_alpha_sq must be non-negative")
        if self.model is LeakageModel.TIME_DEPENDENT and not self.duration_delta > 0:
            raise ValueError("duration_delta must be positive")

    @property
    def vacuum_amplitude(self) -> float:
        """<vac|chi>, identical for all three models."""
        return math.exp(-self.intensity_alpha_sq / 2)


@lru_cache(maxsize=4096)
def _time_dependent_exponent(dphi_a: float, dphi_b: float, profile: PhaseProfile, delta: float) -> complex:
    """Integral over the window of (1 - u_a(t)^dag u_b(t)), per unit intensity."""
    c2 = math.cos(LEAK_THETA) ** 2
    s2 = math.sin(LEAK_THETA) ** 2
    diff = dphi_b - dphi_a

    def re(s):
        return 1.0 - c2 - s2 * math.cos(fractional_phase_profile(s, profile) * diff)

    def im(s):
        return -s2 * math.sin(fractional_phase_profile(s, profile) * diff)

    knots = [k for k in profile_knots(profile) if 0.0 < k < delta]
    opts = dict(points=knots or None, epsabs=1e-13, epsrel=1e-13, limit=200)
    r, _ = integrate.quad(re, 0.0, delta, **opts)
    i, _ = integrate.quad(im, 0.0, delta, **opts)
    return complex(r, i)


def leakage_overlap(a: LeakageSpec, b: LeakageSpec) -> complex:
    """<chi_a|chi_b> for two leakage states of the same model and intensity."""
    if a.model is not b.model:
        raise ValueError("leakage specs use different models")
    if not math.isclose(a.intensity_alpha_sq, b.intensity_alpha_sq, rel_tol=1e-12, abs_tol=0.0):
        raise ValueError("leakage intensity must be identical across settings")
    mu = a.intensity_alpha_sq
    if mu == 0.0:
        return 1.0 + 0.0j
    if a.model is LeakageModel.FULL_INFO:
        same = a.encoded_angles == b.encoded_angles
        eps = math.exp(-mu)
        return complex(1.0 if same else eps)
    if a.model is LeakageModel.STATIC_COHERENT:
        ip = encoded_overlap(a.encoded_angles, b.encoded_angles)
        return complex(np.exp(-mu * (1.0 - ip)))
    if a.profile != b.profile or a.duration_delta != b.duration_delta:
        raise ValueError("time-dependent specs need a common profile and window")
    # window [-delta/2, delta/2] is aligned with the start of the profile support
    expo = _time_dependent_exponent(a.encoded_angles.phi, b.encoded_angles.phi, a.profile, a.duration_delta)
    return complex(np.exp(-(mu / a.duration_delta) * expo))


def leakage_gram(specs: Sequence[LeakageSpec]) -> np.ndarray:
    n = len(specs)
    L = np.empty((n, n), dtype=complex)
    for r in range(n):
        L[r, r] = 1.0
        for c in range(r + 1, n):
            v = leakage_overlap(specs[r], specs[c])
            L[r, c] = v
            L[c, r] = np.conj(v)
    return L


def encoded_gram(states: Sequence[PolarizationAngles], phases: Sequence[complex] | None = None) -> np.ndarray:
    V = np.array([jones_vector(s) for s in states]).T
    if phases is not None:
        V = V * np.asarray(phases, dtype=complex)[None, :]
    return V.conj().T @ V


# ---------------------------------------------------------------------------
# joint Gram


@dataclass
class SignalGram:
    """Pairwise overlaps of joint signal states, ``entries[s', s] = <s'|s>``.

    ``labels[k] = (i, j, x, y)``.
    """

    labels: list
    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        n = len(self.labels)
        if self.entries.shape != (n, n):
            raise ValueError("entries shape does not match labels")

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        return self.labels.index(tuple(label))

    def check(self, tol: float = 1e-10) -> None:
        G = self.entries
        if not np.allclose(np.diag(G), 1.0, atol=1e-12):
            raise ValueError("Gram diagonal is not unit")
        if not np.allclose(G, G.conj().T, atol=1e-12):
            raise ValueError("Gram is not Hermitian")
        if np.linalg.eigvalsh(G).min() < -tol:
            raise ValueError("Gram is not positive semidefinite")
        if np.abs(G).max() > 1 + 1e-12:
            raise ValueError("Gram entry exceeds unit magnitude")


def assemble_gram(party_a: np.ndarray, party_b: np.ndarray, labels_a, labels_b) -> SignalGram:
    """Joint Gram from per-party overlap matrices (encoded x leakage already
    multiplied elementwise)."""
    labels = [(i, j, x, y) for (i, x) in labels_a for (j, y) in labels_b]
    return SignalGram(labels, np.kron(party_a, party_b))


def signal_gram(
    states_a: Sequence[tuple],
    states_b: Sequence[tuple],
    phases_a: Sequence[complex] | None = None,
    phases_b: Sequence[complex] | None = None,
    labels_a=None,
    labels_b=None,
) -> SignalGram:
    """Gram of |psi_a phi_b>_enc (x) |chi_a zeta_b>_leak.

    Each party entry is ``(PolarizationAngles, LeakageSpec)``; optional
    global phases multiply the encoded states.
    """
    labels_a = labels_a or setting_labels(len(states_a))
    labels_b = labels_b or setting_labels(len(states_b))
    party = []
    for states, phases in ((states_a, phases_a), (states_b, phases_b)):
        enc = encoded_gram([s for s, _ in states], phases)
        leak = leakage_gram([lk for _, lk in states])
        party.append(enc * leak)
    gram = assemble_gram(party[0], party[1], labels_a, labels_b)
    gram.check()
    return gram


def make_leakage(states: Sequence[PolarizationAngles], model, alpha_sq: float, **kw) -> list:
    """Pair each encoded state with its leakage spec."""
    return [(s, LeakageSpec(model, alpha_sq, s, **kw)) for s in states]
