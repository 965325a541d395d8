
import numpy as np
import pytest

from leakyqkd.conic import SolverSettings, Status
from leakyqkd.decoy import DecoyBounds
from leakyqkd.detection import ChannelParams, single_photon_pass_probs
from leakyqkd.optics import Protocol, make_leakage, protocol_states, signal_gram
from leakyqkd.security import (
    InconsistentInputsError,
    PhaseErrorProblem,
    binary_entropy,
    bob_logical_order,
    key_bit_error,
    key_rate_decoy,
    key_rate_single_photon,
    max_phase_error,
    relabel_phases,
)
from leakyqkd.validation import planted_eve_instance


def _problem(model="model1", alpha_sq=0.0, km=10.0, params=None):
    sa = protocol_states(Protocol.BB84)
    sb = bob_logical_order(sa)
    params = params or ChannelParams(km)
    ph = relabel_phases(4)
    gram = signal_gram(make_leakage(sa, model, alpha_sq), make_leakage(sb, model, alpha_sq), ph, ph)
    p = single_photon_pass_probs(sa, sb, params).p_pass
    return gram, p


def test_binary_entropy_values():
    assert binary_entropy(0.11) == pytest.approx(0.499916, abs=1e-6)
    assert binary_entropy(0.5) == pytest.approx(1.0)
    assert binary_entropy(0.0) == 0.0
    with pytest.raises(ValueError):
        binary_entropy(1.2)


def test_key_bit_error():
    total, e = key_bit_error({(0, 0, 0, 0): 0.4, (0, 0, 1, 1): 0.4, (0, 0, 0, 1): 0.1, (0, 0, 1, 0): 0.1})
    assert total == pytest.approx(1.0) and e == pytest.approx(0.2)


def test_bob_order_swaps_key_states():
    s = protocol_states(Protocol.BB84)
    b = bob_logical_order(s)
    assert b[0] == s[1] and b[1] == s[0] and b[2:] == s[2:]


def test_lossless_leak_free_phase_error_vanishes():
    params = ChannelParams(0.0, detector_efficiency=1.0, dark_count_prob=0.0)
    gram, p = _problem(params=params)
    e_ph, diag = max_phase_error(PhaseErrorProblem.exact(gram, p))
    assert diag.status is Status.OPTIMAL
    assert e_ph <= 1e-6


def test_phase_error_grows_with_leakage():
    vals = []
    for a in (0.0, 1e-4, 1e-3):
        gram, p = _problem("model1", a)
        vals.append(max_phase_error(PhaseErrorProblem.exact(gram, p))[0])
    assert vals[0] <= vals[1] + 1e-7 <= vals[2] + 2e-7
    assert vals[2] > vals[0]


def test_certificate_thresholds():
    gram, p = _problem("model3", 1e-4)
    _, diag = max_phase_error(PhaseErrorProblem.exact(gram, p))
    assert diag.duality_gap <= 1e-7 and diag.max_residual <= 1e-8
    assert abs(diag.dual_value - diag.primal_value) <= diag.duality_gap


def test_denominator_defaults_to_upper_sum():
    gram, p = _problem()
    lo = {k: 0.9 * v for k, v in p.items()}
    prob = PhaseErrorProblem(gram, lo, dict(p))
    assert prob.denominator == pytest.approx(sum(p[(0, 0, x, y)] for x in (0, 1) for y in (0, 1)))


def test_bounds_widen_only_loosens():
    gram, p = _problem("model2", 1e-4)
    exact = max_phase_error(PhaseErrorProblem.exact(gram, p))[0]
    b = DecoyBounds({k: (0.99 * v, min(1.0, 1.01 * v)) for k, v in p.items()})
    loose = max_phase_error(PhaseErrorProblem.from_bounds(gram, b))[0]
    assert loose >= exact - 1e-7


def test_problem_validation():
    gram, p = _problem()
    with pytest.raises(ValueError):
        PhaseErrorProblem(gram, {k: v + 0.1 for k, v in p.items()}, dict(p))
    bad = dict(p)
    del bad[(0, 0, 0, 1)]
    with pytest.raises(ValueError):
        PhaseErrorProblem.exact(gram, bad)


def test_inconsistent_statistics_raise():
    gram, p = _problem(params=ChannelParams(0.0, detector_efficiency=1.0, dark_count_prob=0.0))
    bad = dict(p)
    # identical single photons never give the singlet signature
    bad[(0, 0, 0, 1)] = 0.4
    bad[(0, 0, 1, 0)] = 0.4
    with pytest.raises(InconsistentInputsError):
        max_phase_error(PhaseErrorProblem.exact(gram, bad))


def test_iteration_cap_falls_back_to_half():
    gram, p = _problem("model1", 1e-4)
    tight = max_phase_error(PhaseErrorProblem.exact(gram, p))[0]
    e_ph, diag = max_phase_error(PhaseErrorProblem.exact(gram, p), SolverSettings(max_iter=2))
    assert diag.conservative and e_ph == 0.5
    assert tight < 0.5


@pytest.mark.parametrize("seed", range(5))
def test_planted_attack_below_bound(seed):
    true, bound, _ = planted_eve_instance(np.random.default_rng(seed))
    assert min(true, 0.5) <= bound + 1e-6


def test_key_rate_formulas():
    r = key_rate_single_photon(0.1, 0.01, 0.02)
    assert r.rate == pytest.approx(0.1 * (1 - binary_entropy(0.02) - binary_entropy(0.01)))
    assert key_rate_single_photon(0.1, 0.2, 0.3).rate == 0.0
    d = key_rate_decoy(0.02, 0.01, 0.005, 0.03)
    assert d.metadata["raw_rate"] == pytest.approx(0.005 * (1 - binary_entropy(0.03)) - 0.02 * binary_entropy(0.01))
    with pytest.raises(ValueError):
        key_rate_single_photon(1.5, 0.0, 0.0)
