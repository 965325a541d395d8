import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leakyqkd.optics import (
    LeakageModel,
    LeakageSpec,
    PhaseProfile,
    PolarizationAngles,
    Protocol,
    encoded_gram,
    encoded_overlap,
    fractional_phase_profile,
    jones_vector,
    leakage_gram,
    leakage_overlap,
    make_leakage,
    profile_knots,
    protocol_states,
    signal_gram,
    wrap_phase,
)

EQ = math.pi / 4


def _riemann_model3(phi_a, phi_b, mu, profile, delta, slices=100_000):
    """Midpoint sum of the time-resolved coherent-state overlap."""
    t = (np.arange(slices) + 0.5) * delta / slices
    f = fractional_phase_profile(t, profile)
    ua = np.array([np.full(slices, math.cos(EQ)), math.sin(EQ) * np.exp(1j * f * phi_a)])
    ub = np.array([np.full(slices, math.cos(EQ)), math.sin(EQ) * np.exp(1j * f * phi_b)])
    inner = np.sum(ua.conj() * ub, axis=0)
    return np.exp(-(mu / delta) * np.sum(1 - inner) * delta / slices)


def test_profile_peak_and_support():
    prof = PhaseProfile(150.0, 200.0)
    t = np.linspace(-100, 700, 800_001)
    f = fractional_phase_profile(t, prof)
    assert abs(f.max() - 2 / 3) <= 1e-9
    support = t[f > 0]
    assert abs((support.max() - support.min()) - 500.0) <= 1e-2
    assert prof.support_length == 500.0
    assert profile_knots(prof) == (0.0, 200.0, 300.0, 500.0)


def test_profile_saturates_for_long_pulses():
    prof = PhaseProfile(100.0, 400.0)
    assert max(fractional_phase_profile(np.array(profile_knots(prof)), prof)) == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(10, 500), st.floats(0, 800), st.floats(-100, 1500))
def test_profile_bounded(L, w, t):
    f = fractional_phase_profile(t, PhaseProfile(L, w))
    assert 0.0 <= f <= 1.0 + 1e-12


def test_wrap_phase_range():
    assert wrap_phase(-math.pi) == pytest.approx(math.pi)
    assert wrap_phase(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert wrap_phase(0.3) == pytest.approx(0.3)


def test_bb84_states():
    s = protocol_states(Protocol.BB84)
    assert [round(a.phi, 12) for a in s] == [0.0, round(math.pi, 12), round(math.pi / 2, 12), round(-math.pi / 2, 12)]
    assert all(a.theta == pytest.approx(EQ) for a in s)
    assert len(protocol_states(Protocol.THREE_STATE)) == 3


def test_flaw_shifts_only_test_states():
    s = protocol_states(Protocol.BB84, flaw_delta=0.1)
    assert s[0].phi == 0.0 and s[1].phi == pytest.approx(math.pi)
    assert s[2].phi == pytest.approx(math.pi / 2 + 0.1)
    with pytest.raises(ValueError):
        protocol_states(Protocol.BB84, flaw_delta=1.0)


def test_n_state_rejects_duplicates():
    with pytest.raises(ValueError):
        protocol_states(Protocol.N_STATE, phis=[0.0, math.pi, 2 * math.pi])


def test_encoded_overlap_matches_jones():
    a, b = PolarizationAngles(0.3, 1.1), PolarizationAngles(1.2, -0.4)
    assert encoded_overlap(a, b) == pytest.approx(np.vdot(jones_vector(a), jones_vector(b)))


def test_leakage_vacuum_amplitude():
    spec = LeakageSpec(LeakageModel.STATIC_COHERENT, 1e-3, PolarizationAngles(EQ, 0.0))
    assert spec.vacuum_amplitude == pytest.approx(math.exp(-5e-4))


def test_model1_overlap_value():
    a = LeakageSpec("model1", 1e-3, PolarizationAngles(EQ, 0.0))
    b = LeakageSpec("model1", 1e-3, PolarizationAngles(EQ, math.pi))
    assert leakage_overlap(a, b) == pytest.approx(math.exp(-1e-3))
    assert leakage_overlap(a, a) == pytest.approx(1.0)


def test_model2_orthogonal_states():
    a = LeakageSpec("model2", 1e-3, PolarizationAngles(EQ, 0.0))
    b = LeakageSpec("model2", 1e-3, PolarizationAngles(EQ, math.pi))
    assert leakage_overlap(a, b) == pytest.approx(math.exp(-1e-3))


def test_model3_matches_riemann_oracle():
    prof = PhaseProfile(150.0, 200.0)
    a = LeakageSpec("model3", 1e-4, PolarizationAngles(EQ, 0.0), prof, 500.0)
    b = LeakageSpec("model3", 1e-4, PolarizationAngles(EQ, math.pi), prof, 500.0)
    ref = _riemann_model3(0.0, math.pi, 1e-4, prof, 500.0)
    assert abs(leakage_overlap(a, b) - ref) <= 1e-10


@pytest.mark.parametrize("phi_b", [math.pi / 2, -math.pi / 2, 2.0])
def test_model3_riemann_other_pairs(phi_b):
    prof = PhaseProfile(150.0, 200.0)
    a = LeakageSpec("model3", 1e-3, PolarizationAngles(EQ, 0.3), prof, 500.0)
    b = LeakageSpec("model3", 1e-3, PolarizationAngles(EQ, phi_b), prof, 500.0)
    ref = _riemann_model3(0.3, wrap_phase(phi_b), 1e-3, prof, 500.0)
    assert abs(leakage_overlap(a, b) - ref) <= 1e-10


def test_models_order_for_antipodal_key_pair():
    # overlaps grow from model 1 to model 3 for the key pair
    vals = []
    for m in ("model1", "model2", "model3"):
        a = LeakageSpec(m, 1e-3, PolarizationAngles(EQ, 0.0))
        b = LeakageSpec(m, 1e-3, PolarizationAngles(EQ, math.pi))
        vals.append(abs(leakage_overlap(a, b)))
    assert vals[0] <= vals[1] + 1e-15 <= vals[2] + 2e-15


def test_mixed_models_rejected():
    a = LeakageSpec("model1", 1e-3, PolarizationAngles(EQ, 0.0))
    b = LeakageSpec("model2", 1e-3, PolarizationAngles(EQ, 0.0))
    with pytest.raises(ValueError):
        leakage_overlap(a, b)


@pytest.mark.parametrize("model", list(LeakageModel))
def test_signal_gram_psd_and_unit_diagonal(model):
    s = protocol_states(Protocol.BB84)
    g = signal_gram(make_leakage(s, model, 1e-3), make_leakage(s, model, 1e-3))
    assert np.allclose(np.diag(g.entries), 1.0)
    assert np.linalg.eigvalsh(g.entries).min() >= -1e-12
    assert g.size == 16


@pytest.mark.parametrize("model", ["model2", "model3"])
def test_global_rotation_invariance(model):
    s = protocol_states(Protocol.BB84)
    r = [PolarizationAngles(a.theta, a.phi + 0.4) for a in s]
    g1 = leakage_gram([x for _, x in make_leakage(s, model, 1e-3)])
    g2 = leakage_gram([x for _, x in make_leakage(r, model, 1e-3)])
    if model == "model2":
        assert np.allclose(g1, g2, atol=1e-12)
    else:
        # the time-dependent model only sees phase differences of applied voltages
        # that do not wrap, so compare the unwrapped subset
        assert abs(g1[0, 2] - g2[0, 2]) <= 1e-12


def test_encoded_gram_with_phases():
    s = protocol_states(Protocol.BB84)
    ph = np.array([1, 1j, 1, 1])
    g = encoded_gram(s, ph)
    assert g[0, 1] == pytest.approx(0.0, abs=1e-15)
    assert g[1, 2] == pytest.approx(np.conj(1j) * encoded_overlap(s[1], s[2]))
