import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cran_d2d.net_model import ChannelRealization
from cran_d2d.power_control import (LagrangeState, d2d_power_closed_form, solve_cran_power,
                                    solve_d2d_power, update_multipliers, weighted_sum_rate)
from cran_d2d.rates import Limits

from conftest import random_channel
from oracles import grid_max_wsr, wsr

LN2 = math.log(2.0)


def _d2d_channel(gains, noise=1.0):
    """Channel whose D2D power gains are ``gains`` (real, non-negative)."""
    g = np.sqrt(np.asarray(gains, dtype=float)).astype(complex)
    K = g.shape[0]
    return ChannelRealization(np.ones((K, 1), complex), g, noise, 1)


@pytest.mark.parametrize("u, expected", [(LN2, 0.0), (2 * LN2, 1.0)])
def test_closed_form_examples(u, expected):
    ch = _d2d_channel([[1.0]])
    assert d2d_power_closed_form(0, [u], (1.0, 0.0), [0.0], ch, p_max=5.0) == pytest.approx(expected)
    assert d2d_power_closed_form(0, [4 * LN2], (0.5, 0.5), [0.0], ch, p_max=2.0) == 2.0


def test_closed_form_errors():
    with pytest.raises(ValueError):
        d2d_power_closed_form(0, [1.0], (0.0, 0.0), [0.0], _d2d_channel([[1.0]]))
    with pytest.raises(ValueError):
        d2d_power_closed_form(0, [1.0], (1.0, 0.0), [0.0], _d2d_channel([[0.0]]))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_closed_form_stationarity(seed):
    rng = np.random.default_rng(seed)
    K = 3
    gains = rng.uniform(0.01, 0.3, (K, K)) + np.diag(rng.uniform(1, 3, K))
    ch = _d2d_channel(gains, noise=rng.uniform(0.1, 1.0))
    u = rng.uniform(2, 6, K)
    p = rng.uniform(0, 1, K)
    lagr = rng.uniform(0.2, 1.0)
    i = int(rng.integers(K))
    p_i = d2d_power_closed_form(i, u, (lagr, 0.0), p, ch)
    interf = ch.noise_power + sum(p[j] * gains[j, i] for j in range(K) if j != i)

    def lagrangian(x):
        return u[i] * math.log2(1 + x * gains[i, i] / interf) - lagr * x

    if p_i > 1e-3:
        h = 1e-6
        assert abs(lagrangian(p_i + h) - lagrangian(p_i - h)) / (2 * h) < 1e-4
    else:
        assert lagrangian(1e-6) <= lagrangian(0.0)


def test_update_multipliers_examples():
    lim = Limits(1.0, 2.0, np.ones(1))
    s = LagrangeState(0.0, np.zeros(2))
    assert update_multipliers(s, [0.5, 0.5], lim).delta == 0.0
    s = LagrangeState(0.3, np.zeros(2))
    out = update_multipliers(s, [1.5, 1.0], lim)
    assert out.delta > 0.3 and out.iter == 1
    assert out.delta == pytest.approx(0.3 + 0.1 / 10 * 0.5)
    assert np.all(out.omega >= 0) and out.omega[0] > 0 and out.omega[1] == 0


def _limits(p_max=1.0, budget=None):
    return Limits(p_max, 10 * p_max if budget is None else budget, np.ones(1))


@pytest.mark.parametrize("seed", range(30))
def test_d2d_power_matches_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(1, 4))
    ch = random_channel(rng, K=K, noise=rng.uniform(0.05, 0.5), d2d_scale=1.0)
    u = rng.uniform(1, 4, K)
    lim = _limits(1.0, rng.uniform(0.5, K))
    res = solve_d2d_power(np.arange(K), u, ch, lim)
    s = np.abs(ch.g_d2d) ** 2
    direct = np.diag(s)
    noise = np.full(K, ch.noise_power)
    budget = lim.p_d_max if lim.p_d_max < K * lim.p_max else None
    best, _ = grid_max_wsr(direct, s, noise, u, lim.p_max, budget)
    ours = wsr(res.p, direct, s, noise, u)
    assert ours >= best - 1e-3
    assert np.all((res.p >= 0) & (res.p <= lim.p_max)) and res.p.sum() <= lim.p_d_max + 1e-6


@pytest.mark.parametrize("seed", range(20))
def test_cran_power_matches_grid_oracle(seed):
    rng = np.random.default_rng(1000 + seed)
    ch = random_channel(rng, K=2, N=2, M=1, noise=rng.uniform(0.05, 0.5))
    w = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    u = rng.uniform(1, 4, 2)
    res = solve_cran_power([0, 1], w, u, ch, _limits())
    proj = np.abs(w.conj() @ ch.g_cran.T) ** 2
    direct = np.diag(proj)
    cross = proj.T.copy()
    noise = ch.noise_power * np.sum(np.abs(w) ** 2, axis=1)
    best, _ = grid_max_wsr(direct, cross, noise, u, 1.0)
    assert wsr(res.p, direct, cross, noise, u) >= best - 1e-3


def test_single_pair_without_interference():
    ch = _d2d_channel([[2.0]], noise=1.0)
    assert solve_d2d_power([0], [3.0], ch, _limits(1.0, 5.0)).p[0] == pytest.approx(1.0)
    assert solve_d2d_power([0], [3.0], ch, _limits(1.0, 0.4)).p[0] == pytest.approx(0.4)
    # the 1-D problem is monotone, so the grid answer is the smaller cap
    best, p = grid_max_wsr([2.0], [[0.0]], [1.0], [3.0], 1.0, 0.4)
    assert p[0] == pytest.approx(0.4, abs=1e-6)


def test_symmetric_pairs_get_equal_power():
    ch = _d2d_channel([[1.0, 0.05], [0.05, 1.0]], noise=0.2)
    res = solve_d2d_power([0, 1], [2.0, 2.0], ch, _limits(1.0, 1.5))
    assert abs(res.p[0] - res.p[1]) < 1e-6


def test_cran_single_pair_and_orthogonal_beamformers_use_full_power(rng):
    ch = random_channel(rng, K=1, N=2, M=2)
    w = rng.standard_normal((1, 4)) + 0j
    assert solve_cran_power([0], w, [1.0], ch, _limits(0.7)).p[0] == pytest.approx(0.7)
    g = np.zeros((3, 3), complex)
    g[[0, 1, 2], [0, 1, 2]] = [1.0, 0.5, 2.0]
    ch = ChannelRealization(g, np.eye(3, dtype=complex), 0.1, 1)
    res = solve_cran_power([0, 1, 2], np.eye(3, dtype=complex), [1.0, 2.0, 3.0], ch, _limits(0.7))
    np.testing.assert_allclose(res.p, 0.7)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), K=st.integers(1, 6))
def test_d2d_power_kkt_and_monotone_history(seed, K):
    rng = np.random.default_rng(seed)
    ch = random_channel(rng, K=K, noise=rng.uniform(0.05, 1.0))
    u = rng.uniform(1, 4, K)
    lim = _limits(1.0, rng.uniform(0.3, K))
    res = solve_d2d_power(np.arange(K), u, ch, lim)
    assert np.all((res.p >= 0) & (res.p <= 1.0)) and res.p.sum() <= lim.p_d_max + 1e-6
    assert res.delta >= 0 and np.all(res.omega >= 0)
    assert res.delta * (lim.p_d_max - res.p.sum()) <= 1e-4
    assert np.all(res.omega * (lim.p_max - res.p) <= 1e-4)
    assert np.all(np.diff(res.history) >= -1e-9)
    s = np.abs(ch.g_d2d) ** 2
    assert res.objective == pytest.approx(
        weighted_sum_rate(res.p, np.diag(s), s - np.diag(np.diag(s)), np.full(K, ch.noise_power), u),
        rel=1e-9)


def test_empty_sets_are_rejected(rng):
    ch = random_channel(rng, K=2)
    with pytest.raises(ValueError):
        solve_d2d_power([], [1.0, 1.0], ch, _limits())
    with pytest.raises(ValueError):
        solve_cran_power([], np.zeros((0, 4)), [1.0, 1.0], ch, _limits())
