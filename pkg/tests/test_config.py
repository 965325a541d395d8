import math

import pytest

from leakyqkd.config import PRESETS, ConfigError, ScenarioConfig, load_config, parse_config, parse_number
from leakyqkd.scenario import sweep_points


def test_parse_number_expressions():
    assert parse_number("pi/2") == pytest.approx(math.pi / 2)
    assert parse_number("-3*pi/4") == pytest.approx(-3 * math.pi / 4)
    assert parse_number("1e-4") == 1e-4
    for bad in ("__import__('os')", "pi**2", "1/0", "abc"):
        with pytest.raises(ConfigError):
            parse_number(bad)


def test_parse_lists_and_comments():
    cfg = parse_config("protocol = bb84, three_state  # both\nalpha_sq = 0, 1e-4\ndistances_km = 0, 10, 20\n")
    assert cfg.protocol == ["bb84", "three_state"]
    assert cfg.alpha_sq == [0.0, 1e-4]
    assert len(sweep_points(cfg)) == 12


@pytest.mark.parametrize("text", [
    "foo = 1",
    "protocol = bb84\nprotocol = bb84",
    "protocol = bb85",
    "alpha_sq = -1",
    "source = laser",
    "method = pereira\nalpha_sq = 1e-4",
    "leakage_model = toy, model1",
    "flaw_delta = pi/2",
    "test_phi = 1\ntest_phi_points = 5",
    "source = decoy_wcp\nintensities = 0.1",
    "distances_km =",
    "just a line",
    "vacuum_decoy = maybe",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_text_roundtrip():
    cfg = parse_config("protocol = three_state\nalpha_sq = 1e-5\ntest_phi = pi/3\nconservative = true")
    again = parse_config(cfg.to_text())
    assert again == cfg


def test_overrides_win():
    cfg = parse_config("tol_gap = 1e-6", tol_gap=1e-9, conservative=None)
    assert cfg.tol_gap == 1e-9 and cfg.conservative is False


def test_phi_grid():
    assert ScenarioConfig().phi_grid == [None]
    grid = ScenarioConfig(test_phi_points=33).phi_grid
    assert len(grid) == 33 and grid[16] == pytest.approx(math.pi / 2)


@pytest.mark.parametrize("name", PRESETS)
def test_presets_load(name):
    cfg = load_config(name)
    assert len(sweep_points(cfg)) > 0


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.conf")
