import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ehcrn.detection import DetectorConfig
from ehcrn.network import (
    EnergyModel,
    FrameTiming,
    Geometry,
    NetworkModel,
    PuChannel,
    capacity_from_snr,
    channel_caps,
    fc_gain,
    is_feasible,
    max_channels_per_sensor,
    sample_geometry,
    snr_matrix,
    stationary_probs,
)


def test_stationary_examples():
    assert stationary_probs(1.0, 1.0) == (0.5, 0.5)
    p1, p0 = stationary_probs(0.6, 0.4)
    assert p0 == pytest.approx(0.6) and p1 == pytest.approx(0.4)
    with pytest.raises(ValueError):
        stationary_probs(0.0, 1.0)
    with pytest.raises(ValueError):
        stationary_probs(1.0, -2.0)


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
def test_stationary_normalised(a, b):
    p1, p0 = stationary_probs(a, b)
    assert p1 + p0 == pytest.approx(1.0, abs=1e-15)
    assert 0 < p0 < 1


def _geom(sensors, pus, alpha=3.5, power=1.0):
    return Geometry(np.array(sensors, float), np.array(pus, float), 200.0, alpha, power)


def test_snr_unit_distance_and_doubling():
    g = _geom([[0, 0], [2, 0]], [[1, 0]], power=2.0)
    snr = snr_matrix(g, 0.5)
    assert snr[0, 0] == pytest.approx(4.0)  # power / noise at D = 1
    far = snr_matrix(_geom([[0, 0]], [[2, 0]]), 1.0)
    near = snr_matrix(_geom([[0, 0]], [[1, 0]]), 1.0)
    assert near[0, 0] / far[0, 0] == pytest.approx(2 ** 3.5)
    assert 2 ** 3.5 == pytest.approx(11.314, abs=1e-3)


def test_snr_rejects_coincident_positions_and_bad_noise():
    with pytest.raises(ValueError):
        snr_matrix(_geom([[1, 1]], [[1, 1]]), 1.0)
    with pytest.raises(ValueError):
        snr_matrix(_geom([[0, 0]], [[1, 1]]), 0.0)


def test_geometry_validation():
    with pytest.raises(ValueError):
        _geom([[0, 0]], [[1, 0]], alpha=2.0)
    with pytest.raises(ValueError):
        _geom([[300, 0]], [[1, 0]])


def test_sampled_geometry_shape_and_nesting():
    g10 = sample_geometry(4, 10, 7)
    g3 = sample_geometry(4, 3, 5)
    snr = snr_matrix(g10, 1e-6)
    assert snr.shape == (10, 7) and np.all(snr > 0)
    assert np.array_equal(g10.sensor_positions[:3], g3.sensor_positions)
    assert np.array_equal(g10.pu_positions[:5], g3.pu_positions)
    assert np.all(np.hypot(*g10.sensor_positions.T) <= 200.0)
    assert not np.array_equal(sample_geometry(5, 10, 7).sensor_positions, g10.sensor_positions)


def test_fc_gain_ordering():
    g = _geom([[10, 0], [0, 50], [100, 0]], [[1, 1]])
    gain = fc_gain(g)
    assert list(np.argsort(-gain)) == [0, 1, 2]


def test_capacity_examples():
    assert capacity_from_snr(20.0) == pytest.approx(6.658, abs=5e-4)
    assert capacity_from_snr(-math.inf) == 0.0
    assert capacity_from_snr(0.0) == pytest.approx(1.0)


def test_channel_budget_examples():
    timing = FrameTiming(0.1, 0.006, 0.001)
    energy = EnergyModel(1.1e-4, [0.007, 0.0011, 0.001, 0.0021])
    assert max_channels_per_sensor(energy, timing, 0) == 6
    # 1.1 mW over 100 ms is exactly one sensing energy.
    assert max_channels_per_sensor(energy, timing, 1) == 1
    assert max_channels_per_sensor(energy, timing, 2) == 0
    assert max_channels_per_sensor(energy, timing, 3) == 1
    assert list(channel_caps(energy, timing)) == [6, 1, 0, 1]


def test_feasibility_examples():
    timing = FrameTiming()
    energy = EnergyModel(1.1e-4, [0.007, 0.007])
    ok, bad = is_feasible(np.zeros((2, 7), int), energy, timing)
    assert ok and bad == []
    J = np.zeros((2, 7), int)
    J[1] = 1
    ok, bad = is_feasible(J, energy, timing)
    assert not ok and bad == [1]
    with pytest.raises(ValueError):
        is_feasible(np.zeros((3, 7)), energy, timing)


@given(st.lists(st.lists(st.integers(0, 1), min_size=5, max_size=5), min_size=3, max_size=3),
       st.integers(0, 2), st.integers(0, 4))
def test_feasibility_monotone_under_removal(rows, m, k):
    timing = FrameTiming()
    energy = EnergyModel(1.1e-4, [0.002, 0.004, 0.003])
    J = np.array(rows)
    ok, _ = is_feasible(J, energy, timing)
    J2 = J.copy()
    J2[m, k] = 0
    if ok:
        assert is_feasible(J2, energy, timing)[0]


def test_frame_timing_check():
    FrameTiming().check_reporting(93)
    with pytest.raises(ValueError):
        FrameTiming().check_reporting(94)


def _model(M=2, K=2):
    ch = [PuChannel(0.6, 0.4)] * K
    return NetworkModel(ch, np.full((M, K), 0.01), FrameTiming(), EnergyModel(1.1e-4, [0.007] * M),
                        DetectorConfig())


def test_network_model_derived_quantities():
    m = _model()
    assert m.shape == (2, 2)
    assert np.allclose(m.prob_h0, 0.6)
    assert np.allclose(m.local.p_d, 0.308, atol=1e-3)
    assert m.throughput_bound() == pytest.approx(2 * capacity_from_snr(20) * 0.1)
    with pytest.raises(ValueError):
        m.snr[0, 0] = 5.0  # arrays are read-only


def test_network_model_validation():
    with pytest.raises(ValueError):
        NetworkModel([PuChannel(0.6, 0.4)], np.ones((2, 2)), FrameTiming(),
                     EnergyModel(1.1e-4, [0.007] * 2), DetectorConfig())
    with pytest.raises(ValueError):
        NetworkModel([PuChannel(0.6, 0.4)] * 2, np.ones((2, 2)), FrameTiming(),
                     EnergyModel(1.1e-4, [0.007] * 3), DetectorConfig())
