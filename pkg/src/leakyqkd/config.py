"""Line-oriented ``key = value`` scenario configuration.

Lists are comma separated. Numbers may use ``pi`` and basic arithmetic
(``pi/2``, ``-0.25*pi``). ``#`` starts a comment.
"""

from __future__ import annotations

import ast
import math
import operator
from importlib import resources
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .conic import FEAS_TOL, GAP_TOL, MAX_ITER, SolverSettings
from .optics import LeakageModel, Protocol

__all__ = ["ConfigError", "ScenarioConfig", "parse_number", "load_config", "parse_config", "PRESETS", "preset_text"]


class ConfigError(ValueError):
    """Invalid scenario configuration."""


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left), _eval(node.right))
    raise ConfigError("unsupported expression")


def parse_number(text: str) -> float:
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        return _eval(ast.parse(text, mode="eval").body)
    except (SyntaxError, ZeroDivisionError, ConfigError):
        raise ConfigError(f"cannot parse number {text!r}") from None


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"cannot parse boolean {text!r}")


def _items(text: str) -> list:
    return [t.strip() for t in text.split(",") if t.strip()]


SOURCES = ("single_photon", "decoy_wcp")
METHODS = ("sdp", "pereira")
TOY = "toy"


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    protocol: list = field(default_factory=lambda: ["bb84"])
    source: str = "single_photon"
    leakage_model: list = field(default_factory=lambda: ["model1"])
    alpha_sq: list = field(default_factory=lambda: [0.0])
    epsilon: list = field(default_factory=lambda: [1.0])
    distances_km: list = field(default_factory=lambda: [10.0])
    intensities: list = field(default_factory=lambda: [0.05, 0.1, 0.6])
    vacuum_decoy: bool = False
    flaw_delta: float = 0.0
    test_phi: list = field(default_factory=list)
    test_phi_points: int = 0
    phis: list = field(default_factory=list)
    use_mismatch: bool = True
    method: list = field(default_factory=lambda: ["sdp"])
    loss_db_per_km: float = 0.2
    detector_efficiency: float = 0.5
    dark_count_prob: float = 1e-6
    misalignment: float = 0.0
    n_max: int = 10
    phase_grid_points: int = 128
    pm_length_L: float = 150.0
    pulse_width_w: float = 200.0
    duration_delta: float = 500.0
    tol_gap: float = GAP_TOL
    tol_feas: float = FEAS_TOL
    max_iter: int = MAX_ITER
    conservative: bool = False

    def __post_init__(self):
        self.validate()

    # -- derived views
    @property
    def phi_grid(self) -> list:
        """Test-state azimuths to sweep; ``[None]`` means the default states."""
        if self.test_phi_points:
            return [float(p) for p in np.linspace(0.0, math.pi, self.test_phi_points)]
        return list(self.test_phi) or [None]

    @property
    def leak_params(self) -> list:
        return self.epsilon if self.is_toy else self.alpha_sq

    @property
    def is_toy(self) -> bool:
        return self.leakage_model == [TOY]

    @property
    def all_intensities(self) -> list:
        return ([0.0] if self.vacuum_decoy else []) + list(self.intensities)

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(tol_gap=self.tol_gap, tol_feas=self.tol_feas, max_iter=self.max_iter)

    def validate(self) -> None:
        for axis in ("protocol", "leakage_model", "alpha_sq", "distances_km", "method", "epsilon"):
            if not getattr(self, axis):
                raise ConfigError(f"sweep axis {axis} is empty")
        try:
            for p in self.protocol:
                Protocol(p)
            models = [m for m in self.leakage_model if m != TOY]
            for m in models:
                LeakageModel(m)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if TOY in self.leakage_model and len(self.leakage_model) > 1:
            raise ConfigError("the toy leakage model cannot be mixed with others")
        if self.source not in SOURCES:
            raise ConfigError(f"source must be one of {SOURCES}")
        for m in self.method:
            if m not in METHODS:
                raise ConfigError(f"method must be one of {METHODS}")
        if "pereira" in self.method:
            if self.source != "single_photon":
                raise ConfigError("the pereira method needs single-photon statistics")
            if not self.is_toy and any(a > 0 for a in self.alpha_sq):
                raise ConfigError("the pereira method needs leak-free key states (use the toy model or alpha_sq = 0)")
        if self.is_toy:
            if self.protocol != ["three_state"] or self.source != "single_photon":
                raise ConfigError("the toy model is a single-photon three-state scenario")
            if any(not 0 < e <= 1 for e in self.epsilon):
                raise ConfigError("epsilon must lie in (0, 1]")
        if any(a < 0 for a in self.alpha_sq):
            raise ConfigError("alpha_sq must be non-negative")
        if any(d < 0 for d in self.distances_km):
            raise ConfigError("distances must be non-negative")
        if "n_state" in self.protocol and len(self.phis) < 3:
            raise ConfigError("n_state needs at least three azimuths in phis")
        if abs(self.flaw_delta) >= math.pi / 4:
            raise ConfigError("flaw_delta must satisfy |delta| < pi/4")
        if self.test_phi and self.test_phi_points:
            raise ConfigError("give either test_phi or test_phi_points")
        if self.test_phi_points < 0 or self.test_phi_points == 1:
            raise ConfigError("test_phi_points must be 0 or at least 2")
        if self.source == "decoy_wcp":
            if len(set(self.all_intensities)) < 2 or any(m < 0 for m in self.intensities):
                raise ConfigError("decoy source needs at least two distinct non-negative intensities")
            if self.n_max < 1:
                raise ConfigError("n_max must be at least 1")
        if not (0 < self.detector_efficiency <= 1 and 0 <= self.dark_count_prob < 1):
            raise ConfigError("detector parameters out of range")
        if not 0 <= self.misalignment <= 1:
            raise ConfigError("misalignment must lie in [0, 1]")
        if self.tol_gap <= 0 or self.tol_feas <= 0 or self.max_iter < 1:
            raise ConfigError("solver tolerances must be positive")
        if self.pm_length_L <= 0 or self.pulse_width_w < 0 or self.duration_delta <= 0:
            raise ConfigError("modulator timings out of range")

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, bool):
                v = str(v).lower()
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_LIST_NUM = {"alpha_sq", "epsilon", "distances_km", "intensities", "test_phi", "phis"}
_LIST_STR = {"protocol", "leakage_model", "method"}


def parse_config(text: str, **overrides) -> ScenarioConfig:
    kinds = {f.name: f.type for f in fields(ScenarioConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in kinds:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _LIST_NUM:
                values[key] = [parse_number(t) for t in _items(val)]
            elif key in _LIST_STR:
                values[key] = [t.lower() for t in _items(val)]
            elif kinds[key] == "bool":
                values[key] = _bool(val)
            elif kinds[key] == "int":
                values[key] = int(val)
            elif kinds[key] == "float":
                values[key] = parse_number(val)
            else:
                values[key] = val
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ScenarioConfig(**values)


PRESETS = ("fig2a", "fig2b", "fig3", "fig4", "fig5", "fig6")


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    return resources.files("leakyqkd.presets").joinpath(f"{name}.conf").read_text()


def load_config(path, **overrides) -> ScenarioConfig:
    """Read a config file; a bare preset name (``fig3``) selects a shipped preset."""
    if str(path) in PRESETS and not Path(path).exists():
        return parse_config(preset_text(str(path)), **overrides)
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, **overrides)
