import math

import numpy as np
import pytest

from leakyqkd.detection import ChannelParams
from leakyqkd.pereira import (
    build_pereira_lp,
    leaky_third_state_toy,
    m_matrix_eigbounds,
    pereira_phase_error,
    qubit_leakage_split,
    reference_overlaps,
)
from leakyqkd.security import PhaseErrorProblem, max_phase_error

LOSSLESS = ChannelParams(10.0, detector_efficiency=1.0)


def _both(eps, params=LOSSLESS):
    toy = leaky_third_state_toy(eps, params)
    lp_val = pereira_phase_error(build_pereira_lp(toy.splits, toy.p_pass))[0]
    sdp_val = max_phase_error(PhaseErrorProblem.exact(toy.gram, toy.p_pass))[0]
    return lp_val, sdp_val


def test_eigbounds():
    lo, hi = m_matrix_eigbounds(1.0, 0.0)
    assert lo == hi == 0.0
    lo, hi = m_matrix_eigbounds(math.sqrt(0.5), math.sqrt(0.5))
    assert lo < 0 < hi
    assert lo + hi == pytest.approx(0.5)
    with pytest.raises(ValueError):
        m_matrix_eigbounds(1.0, 1.0)


def test_split_normalizes():
    sp = qubit_leakage_split(np.array([2.0, 0, 0, 0]), 0.6)
    assert np.linalg.norm(sp.qubit_part) == pytest.approx(1.0)
    assert abs(sp.b) == pytest.approx(0.8)
    with pytest.raises(ValueError):
        qubit_leakage_split(np.zeros(4), 1.0)


def test_reference_overlaps_unit_on_reference():
    G = np.array([[1, 0.3], [0.3, 1]], dtype=complex)
    ov = reference_overlaps(G, [0])
    assert ov[0] == pytest.approx(1.0) and ov[1] == pytest.approx(0.3)


def test_toy_gram_psd():
    toy = leaky_third_state_toy(0.999, LOSSLESS)
    assert np.linalg.eigvalsh(toy.gram.entries).min() >= -1e-12


def test_no_leak_methods_agree():
    lp_val, sdp_val = _both(1.0)
    assert abs(lp_val - sdp_val) <= 1e-6


@pytest.mark.parametrize("eps", [0.99999, 0.9999, 0.999, 0.995])
def test_sdp_never_looser(eps):
    lp_val, sdp_val = _both(eps)
    assert sdp_val <= lp_val + 1e-6
    assert sdp_val < lp_val


def test_interval_statistics_rejected():
    toy = leaky_third_state_toy(0.999, LOSSLESS)
    p = dict(toy.p_pass)
    p[(0, 0, 0, 1)] = (0.0, 0.1)
    with pytest.raises(ValueError):
        build_pereira_lp(toy.splits, p)


def test_epsilon_range():
    with pytest.raises(ValueError):
        leaky_third_state_toy(0.0, LOSSLESS)
