"""Detection statistics for the MDI Bell-state measurement.

Linear-optics model: Alice's and Bob's pulses meet on a 50:50 beamsplitter
whose outputs c, d each feed a polarizing splitter and two threshold
detectors (cH, cV, dH, dV). A round passes on the singlet signature: exactly
the pair {cH, dV} or {cV, dH} clicks. Loss and detector efficiency act as
a per-photon transmission; dark counts are independent per detector.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .optics import PolarizationAngles, jones_vector, setting_labels

__all__ = [
    "ChannelParams",
    "DetectionTable",
    "SinglePhotonStats",
    "transmittance",
    "single_photon_pass_probs",
    "wcp_detection_table",
    "fock_oracle_pass_prob",
    "poisson_mixture_oracle",
    "PASS_PATTERNS",
]

# detector order: cH, cV, dH, dV
PASS_PATTERNS = ((0, 3), (1, 2))
_BS = np.array(
    [
        [1, 0, 1, 0],
        [0, 1, 0, 1],
        [1, 0, -1, 0],
        [0, 1, 0, -1],
    ]
) / math.sqrt(2)


@dataclass(frozen=True)
class ChannelParams:
    distance_a_km: float = 0.0
    distance_b_km: float | None = None
    loss_db_per_km: float = 0.2
    detector_efficiency: float = 0.5
    dark_count_prob: float = 1e-6
    misalignment: float = 0.0

    def __post_init__(self):
        if self.distance_b_km is None:
            object.__setattr__(self, "distance_b_km", self.distance_a_km)
        if self.distance_a_km < 0 or self.distance_b_km < 0:
            raise ValueError("distances must be non-negative")
        if self.loss_db_per_km < 0:
            raise ValueError("loss must be non-negative")
        for name in ("detector_efficiency", "dark_count_prob", "misalignment"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")

    @property
    def eta_a(self) -> float:
        return transmittance(self.distance_a_km, self.loss_db_per_km) * self.detector_efficiency

    @property
    def eta_b(self) -> float:
        return transmittance(self.distance_b_km, self.loss_db_per_km) * self.detector_efficiency

    def swapped(self) -> "ChannelParams":
        return ChannelParams(self.distance_b_km, self.distance_a_km, self.loss_db_per_km,
                             self.detector_efficiency, self.dark_count_prob, self.misalignment)


def transmittance(distance_km: float, loss_db_per_km: float = 0.2) -> float:
    if distance_km < 0:
        raise ValueError("distance must be non-negative")
    return 10.0 ** (-loss_db_per_km * distance_km / 10.0)


def _bob_jones(state: PolarizationAngles, params: ChannelParams) -> np.ndarray:
    v = jones_vector(state)
    if params.misalignment > 0:
        # unitary phase rotation at Bob's source output
        shift = 2 * math.asin(math.sqrt(params.misalignment))
        v = v * np.array([1.0, np.exp(1j * shift)])
    return v


def _mode_amplitudes(u: np.ndarray, v: np.ndarray):
    """Detector amplitudes of one photon from Alice (u) and from Bob (v)."""
    return _BS[:, :2] @ u, _BS[:, 2:] @ v


def _pattern_prob(occupied: frozenset, dark: float) -> float:
    """P(click set is exactly a pass pattern | detectors in ``occupied`` lit)."""
    total = 0.0
    for pat in PASS_PATTERNS:
        if not occupied <= set(pat):
            continue
        p = 1.0
        for k in range(4):
            if k in pat:
                p *= 1.0 if k in occupied else dark
            else:
                p *= 1.0 - dark
        total += p
    return total


@dataclass
class SinglePhotonStats:
    """``p_pass[(i, j, x, y)]`` for single-photon inputs."""

    p_pass: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.p_pass[tuple(key)]


def _single_photon_pass(u, v, params: ChannelParams) -> float:
    al, be = _mode_amplitudes(u, v)
    ea, eb, d = params.eta_a, params.eta_b, params.dark_count_prob
    p = (1 - ea) * (1 - eb) * _pattern_prob(frozenset(), d)
    for k in range(4):
        p += ea * (1 - eb) * abs(al[k]) ** 2 * _pattern_prob(frozenset([k]), d)
        p += (1 - ea) * eb * abs(be[k]) ** 2 * _pattern_prob(frozenset([k]), d)
    for k in range(4):
        p += ea * eb * 2 * abs(al[k] * be[k]) ** 2 * _pattern_prob(frozenset([k]), d)
        for l in range(k + 1, 4):
            amp = al[k] * be[l] + al[l] * be[k]
            p += ea * eb * abs(amp) ** 2 * _pattern_prob(frozenset([k, l]), d)
    return float(p)


def single_photon_pass_probs(
    states_a: Sequence[PolarizationAngles],
    states_b: Sequence[PolarizationAngles],
    params: ChannelParams,
    labels_a=None,
    labels_b=None,
) -> SinglePhotonStats:
    """Exact singlet-signature pass probability for one photon per party."""
    labels_a = labels_a or setting_labels(len(states_a))
    labels_b = labels_b or setting_labels(len(states_b))
    out = {}
    for (i, x), sa in zip(labels_a, states_a):
        u = jones_vector(sa)
        for (j, y), sb in zip(labels_b, states_b):
            out[(i, j, x, y)] = _single_photon_pass(u, _bob_jones(sb, params), params)
    return SinglePhotonStats(out)


# ---------------------------------------------------------------------------
# phase-randomized weak coherent pulses


@dataclass
class DetectionTable:
    """Observed pass probabilities ``q[(k, l, i, j, x, y)]``."""

    q: dict
    intensities_a: list
    intensities_b: list

    def __getitem__(self, key):
        return self.q[tuple(key)]

    def settings(self) -> list:
        return sorted({key[2:] for key in self.q})

    def for_setting(self, setting) -> np.ndarray:
        """Q as an (n_a, n_b) array for one (i, j, x, y)."""
        setting = tuple(setting)
        out = np.empty((len(self.intensities_a), len(self.intensities_b)))
        for k in range(len(self.intensities_a)):
            for l in range(len(self.intensities_b)):
                out[k, l] = self.q[(k, l) + setting]
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "l", "i", "j", "x", "y", "Q"])
            for key in sorted(self.q):
                w.writerow([*key, f"{self.q[key]:.15g}"])

    @classmethod
    def from_csv(cls, path, intensities_a, intensities_b) -> "DetectionTable":
        q = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                key = tuple(int(row[c]) for c in ("k", "l", "i", "j", "x", "y"))
                q[key] = float(row["Q"])
        return cls(q, list(intensities_a), list(intensities_b))


def _wcp_pass(u, v, mu, nu, params: ChannelParams, n_grid: int) -> float:
    al, be = _mode_amplitudes(u, v)
    theta = 2 * np.pi * np.arange(n_grid) / n_grid
    amp = (math.sqrt(mu * params.eta_a) * np.exp(1j * theta)[:, None] * al[None, :]
           + math.sqrt(nu * params.eta_b) * be[None, :])
    click = 1.0 - (1.0 - params.dark_count_prob) * np.exp(-np.abs(amp) ** 2)
    idle = 1.0 - click
    total = np.zeros(n_grid)
    for pat in PASS_PATTERNS:
        term = np.ones(n_grid)
        for k in range(4):
            term = term * (click[:, k] if k in pat else idle[:, k])
        total += term
    return float(total.mean())


def wcp_detection_table(
    states_a: Sequence[PolarizationAngles],
    states_b: Sequence[PolarizationAngles],
    intensities_a: Sequence[float],
    intensities_b: Sequence[float],
    params: ChannelParams,
    phase_grid_points: int = 128,
    labels_a=None,
    labels_b=None,
) -> DetectionTable:
    """Q for phase-randomized coherent pulses, averaged over the relative
    phase on a uniform grid (deterministic, no sampling)."""
    if phase_grid_points < 16:
        raise ValueError("phase_grid_points must be at least 16")
    if min(intensities_a, default=0) < 0 or min(intensities_b, default=0) < 0:
        raise ValueError("intensities must be non-negative")
    labels_a = labels_a or setting_labels(len(states_a))
    labels_b = labels_b or setting_labels(len(states_b))
    q = {}
    worst = 0.0
    for (i, x), sa in zip(labels_a, states_a):
        u = jones_vector(sa)
        for (j, y), sb in zip(labels_b, states_b):
            v = _bob_jones(sb, params)
            for k, mu in enumerate(intensities_a):
                for l, nu in enumerate(intensities_b):
                    val = _wcp_pass(u, v, mu, nu, params, phase_grid_points)
                    coarse = _wcp_pass(u, v, mu, nu, params, phase_grid_points // 2)
                    worst = max(worst, abs(val - coarse))
                    q[(k, l, i, j, x, y)] = val
    if worst > 1e-10:
        raise ValueError(f"phase grid of {phase_grid_points} points is too coarse (refinement change {worst:.2e})")
    return DetectionTable(q, list(intensities_a), list(intensities_b))


# ---------------------------------------------------------------------------
# brute-force test oracles


def _permanent(M: np.ndarray) -> complex:
    n = M.shape[0]
    if n == 0:
        return 1.0 + 0j
    return sum(np.prod([M[r, p[r]] for r in range(n)]) for p in itertools.permutations(range(n)))


def _compositions(total: int, parts: int, cap: int):
    if parts == 1:
        if total <= cap:
            yield (total,)
        return
    for first in range(min(total, cap) + 1):
        for rest in _compositions(total - first, parts - 1, cap):
            yield (first,) + rest


def fock_oracle_pass_prob(
    states: tuple,
    params: ChannelParams,
    truncation: int,
    photons: tuple = (1, 1),
) -> float:
    """Pass probability for Fock inputs by explicit enumeration.

    Losses are beamsplitters into two loss modes; every output occupation
    with at most ``truncation`` photons per mode is weighted by the
    permanent formula, then all 16 dark-count subsets are enumerated.
    """
    if truncation < 1:
        raise ValueError("truncation must be at least 1")
    sa, sb = states
    u, v = jones_vector(sa), _bob_jones(sb, params)
    al, be = _mode_amplitudes(u, v)
    ea, eb = params.eta_a, params.eta_b
    V = np.zeros((6, 2), dtype=complex)
    V[:4, 0] = math.sqrt(ea) * al
    V[4, 0] = math.sqrt(1 - ea)
    V[:4, 1] = math.sqrt(eb) * be
    V[5, 1] = math.sqrt(1 - eb)
    m, n = photons
    cols = [0] * m + [1] * n
    norm_in = math.factorial(m) * math.factorial(n)
    d = params.dark_count_prob
    total = 0.0
    for occ in _compositions(m + n, 6, truncation):
        rows = [r for r, c in enumerate(occ) for _ in range(c)]
        sub = V[np.ix_(rows, cols)] if rows else np.zeros((0, 0))
        prob = abs(_permanent(sub)) ** 2 / (norm_in * np.prod([math.factorial(c) for c in occ]))
        if prob == 0.0:
            continue
        lit = {k for k in range(4) if occ[k] > 0}
        for darks in itertools.product((False, True), repeat=4):
            p_dark = np.prod([d if dk else 1 - d for dk in darks])
            clicks = {k for k in range(4) if darks[k]} | lit
            if any(clicks == set(pat) for pat in PASS_PATTERNS):
                total += prob * p_dark
    return float(total)


def poisson_mixture_oracle(states: tuple, mu: float, nu: float, params: ChannelParams, max_photons: int = 4) -> float:
    """Q for phase-randomized pulses as a Poisson mixture of Fock terms."""
    total = 0.0
    for m in range(max_photons + 1):
        for n in range(max_photons + 1 - m):
            w = math.exp(-mu - nu) * mu**m * nu**n / (math.factorial(m) * math.factorial(n))
            total += w * fock_oracle_pass_prob(states, params, truncation=max_photons, photons=(m, n))
    return total
