"""Scenario runner: sweep points, per-point pipeline and CSV emission."""

from __future__ import annotations

import csv
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .config import ScenarioConfig
from .decoy import DecoyInfeasibleError, bound_single_photon_yields
from .detection import ChannelParams, single_photon_pass_probs, wcp_detection_table
from .optics import PhaseProfile, Protocol, make_leakage, protocol_states, setting_labels, signal_gram
from .pereira import build_pereira_lp, leaky_third_state_toy, logical_frame, pereira_phase_error, \
    qubit_leakage_split
from .security import (
    InconsistentInputsError,
    KEY_BASIS,
    PhaseErrorProblem,
    bob_logical_order,
    key_bit_error,
    key_rate_decoy,
    key_rate_single_photon,
    max_phase_error,
    relabel_phases,
)
from .conic import Status

__all__ = ["SweepPoint", "ResultRow", "ScenarioSolverError", "sweep_points", "run_point", "run_scenario",
           "emit", "read_rows", "point_gram"]


class ScenarioSolverError(RuntimeError):
    """A solve failed at a sweep point; ``point`` names the coordinate."""

    def __init__(self, point, message):
        super().__init__(f"{message} at {point}")
        self.point = point


@dataclass(frozen=True, order=True)
class SweepPoint:
    method: str
    protocol: str
    model: str
    leak_param: float
    test_phi: float  # nan selects the protocol's default test states
    distance_km: float


@dataclass
class ResultRow:
    method: str
    protocol: str
    n_states: int
    source_kind: str
    model: str
    alpha_sq: float
    epsilon: float
    test_phi: float
    distance_km: float
    e_bit: float
    e_ph_upper: float
    rate: float
    raw_rate: float
    p_pass_key: float
    q_key: float
    solver_status: str
    solver_gap: float
    solver_residual: float
    conservative: bool
    seconds: float = 0.0


CSV_FIELDS = [f.name for f in fields(ResultRow) if f.name != "seconds"]


def sweep_points(config: ScenarioConfig) -> list:
    phis = [math.nan if p is None else p for p in config.phi_grid]
    pts = itertools.product(config.method, config.protocol, config.leakage_model, config.leak_params, phis,
                            config.distances_km)
    return sorted(SweepPoint(*p) for p in pts)


# ---------------------------------------------------------------------------
# per-point pipeline


def _states(config, point):
    phi = None if math.isnan(point.test_phi) else point.test_phi
    sa = protocol_states(point.protocol, config.flaw_delta, phi, config.phis or None)
    return sa, bob_logical_order(sa)


def _channel(config, point) -> ChannelParams:
    return ChannelParams(point.distance_km, None, config.loss_db_per_km, config.detector_efficiency,
                         config.dark_count_prob, config.misalignment)


def point_gram(config: ScenarioConfig, point: SweepPoint):
    """Joint signal Gram for a sweep point."""
    if config.is_toy:
        return leaky_third_state_toy(point.leak_param, _channel(config, point)).gram
    sa, sb = _states(config, point)
    ph = relabel_phases(len(sa))
    kw = dict(profile=PhaseProfile(config.pm_length_L, config.pulse_width_w), duration_delta=config.duration_delta)
    return signal_gram(make_leakage(sa, point.model, point.leak_param, **kw),
                       make_leakage(sb, point.model, point.leak_param, **kw), ph, ph)


def _leak_free_splits(sa, sb):
    ph = relabel_phases(len(sa))
    fa, fb = logical_frame(sa, ph), logical_frame(sb, ph)
    la, lb = setting_labels(len(sa)), setting_labels(len(sb))
    return {(i, j, x, y): qubit_leakage_split(np.kron(fa[ka], fb[kb]), 1.0)
            for ka, (i, x) in enumerate(la) for kb, (j, y) in enumerate(lb)}


def _sdp_bound(config, point, problem):
    try:
        e_ph, diag = max_phase_error(problem, config.solver_settings())
    except InconsistentInputsError as exc:
        raise ScenarioSolverError(point, str(exc)) from None
    if diag.conservative and not config.conservative:
        raise ScenarioSolverError(point, f"phase-error SDP returned {diag.status.value}")
    return e_ph, diag.status.value, diag.duality_gap, diag.max_residual, diag.conservative


def _pereira_bound(config, point, splits, p_pass):
    lp = build_pereira_lp(splits, p_pass)
    try:
        e_ph, sol = pereira_phase_error(lp, config.solver_settings())
    except RuntimeError as exc:
        raise ScenarioSolverError(point, str(exc)) from None
    failed = sol.status is not Status.OPTIMAL
    if failed and not config.conservative:
        raise ScenarioSolverError(point, f"Pauli-rate LP returned {sol.status.value}")
    return e_ph, sol.status.value, sol.duality_gap, sol.max_residual, failed


def _single_photon(config, point):
    params = _channel(config, point)
    if config.is_toy:
        toy = leaky_third_state_toy(point.leak_param, params)
        gram, p_pass, splits = toy.gram, toy.p_pass, toy.splits
    else:
        sa, sb = _states(config, point)
        p_pass = single_photon_pass_probs(sa, sb, params).p_pass
        gram = point_gram(config, point)
        splits = _leak_free_splits(sa, sb) if point.method == "pereira" else None
    if point.method == "pereira":
        cert = _pereira_bound(config, point, splits, p_pass)
    else:
        cert = _sdp_bound(config, point, PhaseErrorProblem.exact(gram, p_pass, use_mismatch=config.use_mismatch))
    p_key, e_bit = key_bit_error(p_pass)
    res = key_rate_single_photon(p_key, e_bit, cert[0])
    return res, p_key, cert


def _decoy(config, point):
    params = _channel(config, point)
    sa, sb = _states(config, point)
    mus = config.all_intensities
    table = wcp_detection_table(sa, sb, mus, mus, params, config.phase_grid_points)
    try:
        bounds = bound_single_photon_yields(table, config.n_max, config.solver_settings())
    except (DecoyInfeasibleError, RuntimeError) as exc:
        raise ScenarioSolverError(point, str(exc)) from None
    problem = PhaseErrorProblem.from_bounds(point_gram(config, point), bounds, use_mismatch=config.use_mismatch)
    cert = _sdp_bound(config, point, problem)
    s = int(np.argmax(mus))
    mu = mus[s]
    i, j = KEY_BASIS
    q = {(i, j, x, y): table.q[(s, s, i, j, x, y)] for x in (0, 1) for y in (0, 1)}
    q_key, e_bit = key_bit_error(q)
    # single-photon pair weight at the signal intensity
    p11 = mu * mu * math.exp(-2 * mu) * sum(bounds.lower((i, j, x, y)) for x in (0, 1) for y in (0, 1))
    res = key_rate_decoy(q_key, e_bit, min(p11, 1.0), cert[0])
    return res, q_key, cert


def run_point(config: ScenarioConfig, point: SweepPoint) -> ResultRow:
    t0 = time.perf_counter()
    if config.source == "decoy_wcp":
        res, q_key, cert = _decoy(config, point)
    else:
        res, q_key, cert = _single_photon(config, point)
    _, status, gap, resid, conservative = cert
    n = len(config.phis) if point.protocol == Protocol.N_STATE.value else (3 if point.protocol == "three_state" else 4)
    phi = math.pi / 2 + config.flaw_delta if math.isnan(point.test_phi) else point.test_phi
    if point.protocol == Protocol.N_STATE.value and math.isnan(point.test_phi):
        phi = math.nan
    return ResultRow(
        method=point.method, protocol=point.protocol, n_states=n, source_kind=config.source, model=point.model,
        alpha_sq=0.0 if config.is_toy else point.leak_param, epsilon=point.leak_param if config.is_toy else 1.0,
        test_phi=phi, distance_km=point.distance_km, e_bit=res.e_bit, e_ph_upper=res.e_ph_bound, rate=res.rate,
        raw_rate=res.metadata["raw_rate"], p_pass_key=res.p_pass_key, q_key=q_key, solver_status=status,
        solver_gap=gap, solver_residual=resid, conservative=conservative, seconds=time.perf_counter() - t0,
    )


def _run_star(args):
    return run_point(*args)


def run_scenario(config: ScenarioConfig, jobs: int = 1) -> list:
    """Rows in sweep-axis order, independent of worker completion order."""
    points = sweep_points(config)
    if jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(min(jobs, len(points))) as pool:
            return list(pool.map(_run_star, [(config, p) for p in points]))
    return [run_point(config, p) for p in points]


# ---------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.15g}"
    return str(v)


def _write_rows(fh, rows, cols) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        d = asdict(r)
        w.writerow([_fmt(d[c]) for c in cols])


def emit(rows, path, format: str = "csv", include_timing: bool = False) -> None:
    """Write rows with a header and 15-significant-digit floats to a path or
    an open text stream. Timing is left out by default so identical runs
    give identical bytes."""
    if format != "csv":
        raise ValueError(f"unsupported format {format!r}")
    cols = CSV_FIELDS + (["seconds"] if include_timing else [])
    if hasattr(path, "write"):
        _write_rows(path, rows, cols)
        return
    try:
        with open(path, "w", newline="") as fh:
            _write_rows(fh, rows, cols)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_rows(path) -> list:
    types = {f.name: f.type for f in fields(ResultRow)}
    out = []
    with open(Path(path), newline="") as fh:
        for rec in csv.DictReader(fh):
            kw = {}
            for k, v in rec.items():
                t = types[k]
                kw[k] = {"int": int, "float": float, "bool": lambda s: s == "true"}.get(t, str)(v)
            out.append(ResultRow(**kw))
    return out
