import csv

import pytest

from leakyqkd.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main

ONE = "protocol = bb84\nleakage_model = model3\nalpha_sq = 1e-4\ndistances_km = 10\n"


@pytest.fixture
def one(tmp_path):
    p = tmp_path / "one.conf"
    p.write_text(ONE)
    return p


def test_phase_profile(capsys):
    assert main(["phase-profile", "--L", "150", "--w", "200"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "peak = 0.666666666666667" in out
    assert "support_length = 500" in out


def test_phase_profile_table(tmp_path):
    path = tmp_path / "f.csv"
    assert main(["phase-profile", "--L", "150", "--w", "200", "--points", "11", "--out", str(path)]) == EXIT_OK
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 11 and float(rows[0]["fraction"]) == 0.0


def test_phase_profile_bad_args():
    assert main(["phase-profile", "--L", "-1", "--w", "200"]) == EXIT_CONFIG


def test_keyrate(one, capsys):
    assert main(["keyrate", str(one)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "solver_status = Optimal" in out
    rate = float(next(l for l in out.splitlines() if l.startswith("rate =")).split("=")[1])
    assert rate == pytest.approx(0.0983823, abs=1e-6)


def test_keyrate_needs_single_point(tmp_path):
    p = tmp_path / "two.conf"
    p.write_text(ONE.replace("distances_km = 10", "distances_km = 10, 20"))
    assert main(["keyrate", str(p)]) == EXIT_CONFIG


def test_solver_failure_exit(tmp_path):
    p = tmp_path / "bad.conf"
    p.write_text(ONE + "max_iter = 2\n")
    assert main(["keyrate", str(p)]) == EXIT_SOLVER
    assert main(["keyrate", str(p), "--conservative"]) == EXIT_OK


def test_invalid_config_exit(tmp_path):
    assert main(["sweep", str(tmp_path / "missing.conf")]) == EXIT_CONFIG
    p = tmp_path / "junk.conf"
    p.write_text("protocol = nope\n")
    assert main(["sweep", str(p)]) == EXIT_CONFIG


def test_sweep_writes_csv(one, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", str(one), "--out", str(out), "--jobs", "1"]) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 1 and rows[0]["model"] == "model3"


def test_dump_gram(one, tmp_path):
    out = tmp_path / "g.csv"
    assert main(["dump-gram", str(one), "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 16 * 16
    diag = [r for r in rows if (r["i"], r["j"], r["x"], r["y"]) == (r["i2"], r["j2"], r["x2"], r["y2"])]
    assert all(float(r["re"]) == pytest.approx(1.0) for r in diag)
