import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cran_d2d.config import SimConfig
from cran_d2d.net_model import (NetworkTopology, dbm_to_mw, draw_channels, large_scale_gains,
                                noise_power_mw, pathloss_cran_db, pathloss_d2d_db, place_random)


@pytest.mark.parametrize("d, expected", [(1.0, 128.1), (0.1, 90.5), (0.01, 52.9)])
def test_cran_pathloss_values(d, expected):
    assert pathloss_cran_db(d) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("d, expected", [(1.0, 148.0), (0.1, 108.0), (0.05, 95.9588)])
def test_d2d_pathloss_values(d, expected):
    assert pathloss_d2d_db(d) == pytest.approx(expected, abs=1e-4)


@pytest.mark.parametrize("fn", [pathloss_cran_db, pathloss_d2d_db])
def test_pathloss_rejects_nonpositive_distance(fn):
    with pytest.raises(ValueError):
        fn(0.0)


def test_unit_conversions():
    assert dbm_to_mw(23.0) == pytest.approx(199.526231, rel=1e-8)
    assert noise_power_mw(10e6) == pytest.approx(10 ** (-10.4), rel=1e-12)  # -104 dBm


def test_default_topology_shape_and_invariants():
    topo = place_random(SimConfig(), np.random.default_rng(1))
    assert topo.rrh_pos.shape == (3, 2) and topo.tx_pos.shape == (6, 2)
    assert np.all(topo.pair_distances() <= 0.05 + 1e-12)
    for pts in (topo.rrh_pos, topo.tx_pos, topo.rx_pos):
        assert np.all((pts >= 0) & (pts <= 0.5))


def test_zero_radius_pair_is_colocated():
    topo = place_random(SimConfig(n_pairs=1, max_pair_dist=0.0), np.random.default_rng(3))
    np.testing.assert_array_equal(topo.tx_pos[0], topo.rx_pos[0])


def test_topology_is_reproducible():
    a = place_random(SimConfig(), np.random.default_rng(7))
    b = place_random(SimConfig(), np.random.default_rng(7))
    np.testing.assert_array_equal(a.rx_pos, b.rx_pos)
    np.testing.assert_array_equal(a.rrh_pos, b.rrh_pos)


def test_topology_rejects_points_outside_area():
    with pytest.raises(ValueError):
        NetworkTopology(1, 1, 1, np.array([[0.6, 0.1]]), np.array([[0.1, 0.1]]),
                        np.array([[0.1, 0.1]]), 0.5, 0.05)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), dmax=st.floats(0.0, 0.4))
def test_pair_distance_bound_property(seed, dmax):
    topo = place_random(SimConfig(max_pair_dist=dmax), np.random.default_rng(seed))
    assert np.all(topo.pair_distances() <= dmax + 1e-12)


def _single_link_topology(d):
    return NetworkTopology(1, 1, 1, np.array([[0.0, 0.0]]), np.array([[d, 0.0]]),
                           np.array([[d, 0.0]]), 1.0, 0.0)


def test_cran_channel_second_moment_matches_pathloss():
    d = 0.2
    topo = _single_link_topology(d)
    rng = np.random.default_rng(11)
    gains = large_scale_gains(topo)
    g = np.array([draw_channels(topo, rng, 1.0, gains).g_cran[0, 0] for _ in range(100_000)])
    target = 10 ** (-pathloss_cran_db(d) / 10)
    assert np.mean(np.abs(g) ** 2) == pytest.approx(target, rel=0.02)
    # zero mean within 3 standard errors per component
    se = np.sqrt(target / 2 / g.size)
    assert abs(g.real.mean()) < 3 * se and abs(g.imag.mean()) < 3 * se


def test_d2d_direct_channel_variance_matches_pathloss():
    topo = NetworkTopology(1, 1, 1, np.array([[0.0, 0.0]]), np.array([[0.1, 0.1]]),
                           np.array([[0.13, 0.14]]), 1.0, 0.06)
    rng = np.random.default_rng(12)
    gains = large_scale_gains(topo)
    g = np.array([draw_channels(topo, rng, 1.0, gains).g_d2d[0, 0] for _ in range(100_000)])
    target = 10 ** (-pathloss_d2d_db(0.05) / 10)
    assert np.var(g) == pytest.approx(target, rel=0.02)


def test_channel_sequence_is_reproducible_and_blocked():
    topo = place_random(SimConfig(), np.random.default_rng(5))
    a = draw_channels(topo, np.random.default_rng(9))
    b = draw_channels(topo, np.random.default_rng(9))
    np.testing.assert_array_equal(a.g_cran, b.g_cran)
    np.testing.assert_array_equal(a.g_d2d, b.g_d2d)
    np.testing.assert_array_equal(a.cran_block(2, 1), a.g_cran[2, 2:4])
