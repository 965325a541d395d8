"""Decoy-state linear programs for single-photon pass probabilities.

The bounds refer to rounds where both parties emitted one photon *together
with* their leakage states; the leakage is part of the source, not of the
photon-number decomposition.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .conic import LinearProgram, Relation, SolverSettings, Status, solve_lp
from .detection import DetectionTable

__all__ = [
    "DecoyBounds",
    "DecoyInfeasibleError",
    "poisson_weights",
    "build_decoy_lp",
    "bound_single_photon_yields",
]


class DecoyInfeasibleError(RuntimeError):
    """The observed statistics admit no yields (corrupted table)."""


@dataclass
class DecoyBounds:
    """``bounds[(i, j, x, y)] = (p_lower, p_upper)`` for the (1, 1) yield."""

    bounds: dict = field(default_factory=dict)
    n_max: int = 10

    def __post_init__(self):
        for key, (lo, hi) in self.bounds.items():
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"invalid bracket {lo}, {hi} at {key}")

    def lower(self, setting) -> float:
        return self.bounds[tuple(setting)][0]

    def upper(self, setting) -> float:
        return self.bounds[tuple(setting)][1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "x", "y", "p_lower", "p_upper"])
            for key in sorted(self.bounds):
                lo, hi = self.bounds[key]
                w.writerow([*key, f"{lo:.15g}", f"{hi:.15g}"])

    @classmethod
    def from_csv(cls, path, n_max: int = 10) -> "DecoyBounds":
        out = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                key = tuple(int(row[c]) for c in ("i", "j", "x", "y"))
                out[key] = (float(row["p_lower"]), float(row["p_upper"]))
        return cls(out, n_max)


def poisson_weights(mu: float, nu: float, n_max: int) -> np.ndarray:
    """``w[m, n] = e^{-(mu+nu)} mu^m nu^n / (m! n!)`` for m, n <= n_max."""
    m = np.arange(n_max + 1)
    fact = np.array([math.factorial(int(k)) for k in m], dtype=float)
    pa = math.exp(-mu) * np.power(float(mu), m) / fact
    pb = math.exp(-nu) * np.power(float(nu), m) / fact
    return np.outer(pa, pb)


def build_decoy_lp(table: DetectionTable, setting, n_max: int = 10, target=(1, 1)) -> LinearProgram:
    """LP over yields p[m, n] (flattened row-major) for one setting."""
    if n_max < 0 or (n_max < 1 and tuple(target) != (0, 0)):
        raise ValueError("n_max must be at least 1")
    if max(target) > n_max:
        raise ValueError("target photon numbers exceed n_max")
    setting = tuple(setting)
    size = (n_max + 1) ** 2
    rows = []
    for k, mu in enumerate(table.intensities_a):
        for l, nu in enumerate(table.intensities_b):
            key = (k, l) + setting
            if key not in table.q:
                raise KeyError(f"table is missing entry {key}")
            q = table.q[key]
            w = poisson_weights(mu, nu, n_max).ravel()
            # truncated sum never exceeds Q; the tail can add at most 1 - sum(w)
            rows.append((w, Relation.LE, q))
            rows.append((w, Relation.GE, q + w.sum() - 1.0))
    obj = np.zeros(size)
    obj[target[0] * (n_max + 1) + target[1]] = 1.0
    return LinearProgram(obj, rows, [(0.0, 1.0)] * size)


def _bracket(table, setting, n_max, settings):
    lp = build_decoy_lp(table, setting, n_max)
    out = []
    for sense in ("min", "max"):
        sol = solve_lp(lp, sense=sense, settings=settings)
        if sol.status == Status.INFEASIBLE:
            raise DecoyInfeasibleError(f"decoy LP infeasible for setting {setting}")
        if sol.status != Status.OPTIMAL:
            raise RuntimeError(f"decoy LP failed for setting {setting}: {sol.status}")
        out.append(sol.dual_value)
    lo = min(max(out[0], 0.0), 1.0)
    hi = min(max(out[1], 0.0), 1.0)
    return setting, (lo, max(lo, hi))


def bound_single_photon_yields(
    table: DetectionTable,
    n_max: int = 10,
    settings: SolverSettings | None = None,
    jobs: int = 1,
) -> DecoyBounds:
    """Certified (min, max) of p_pass,1,1 for every setting in ``table``."""
    if len(set(table.intensities_a)) < 2 or len(set(table.intensities_b)) < 2:
        raise ValueError("need at least two distinct intensities per party")
    keys = table.settings()
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(lambda s: _bracket(table, s, n_max, settings), keys))
    else:
        results = [_bracket(table, s, n_max, settings) for s in keys]
    return DecoyBounds(dict(results), n_max)
