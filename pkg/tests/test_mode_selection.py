import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cran_d2d.mode_selection import (exhaustive_oracle, mode_objective, modified_bnb,
                                     pick_branch_variable, solve_relaxed)

from oracles import best_mode_vector, relaxed_lp


def _instance(rng, K):
    y = -(rng.exponential(5.0, K) + 1.0)
    rc = rng.uniform(0, 10, K)
    rd = rng.uniform(0, 10, K)
    p = rng.uniform(1, 800, K)
    budget = rng.uniform(0.2, 1.0) * p.sum()
    return y, rc, rd, p, budget


def test_relaxation_example():
    x, lb, ok = solve_relaxed({}, -np.ones(3), np.ones(3), np.array([3, 2, 1.5]), np.ones(3), 1.5)
    assert ok
    np.testing.assert_allclose(x, [1, 0.5, 0])
    assert lb == pytest.approx(-5.5)


def test_relaxation_corner_cases():
    y, p = -np.ones(3), np.ones(3)
    x, _, _ = solve_relaxed({}, y, np.zeros(3), np.ones(3), p, 10.0)
    np.testing.assert_array_equal(x, 1)
    x, _, _ = solve_relaxed({}, y, np.ones(3), np.zeros(3), p, 10.0)
    np.testing.assert_array_equal(x, 0)
    _, lb, ok = solve_relaxed({0: 1, 1: 1}, y, np.zeros(3), np.ones(3), p, 1.5)
    assert not ok and lb == np.inf


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**31), K=st.integers(1, 8))
def test_relaxation_matches_lp_solver(seed, K):
    rng = np.random.default_rng(seed)
    y, rc, rd, p, budget = _instance(rng, K)
    fixed = {int(k): int(rng.integers(0, 2)) for k in rng.choice(K, size=rng.integers(0, K + 1), replace=False)}
    x, lb, ok = solve_relaxed(fixed, y, rc, rd, p, budget)
    _, ref = relaxed_lp(fixed, y, rc, rd, p, budget)
    if ref == np.inf:
        assert not ok
    else:
        assert ok and lb == pytest.approx(ref, rel=1e-9, abs=1e-9)
        assert all(x[k] == v for k, v in fixed.items())


def test_branch_variable_rule():
    assert pick_branch_variable([0, 0.5, 0.5], [0, 1, 3], [0, 2, 5]) == 2
    assert pick_branch_variable([1, 0.3, 0], [1, 1, 1], [1, 1, 1]) == 1
    assert pick_branch_variable([0.5, 0.5], [2, 1], [1, 2]) == 0
    with pytest.raises(ValueError):
        pick_branch_variable([0, 1], [1, 1], [1, 1])


def test_exhaustive_examples():
    x = exhaustive_oracle(-np.ones(2), np.ones(2), 2 * np.ones(2), np.ones(2), 1.0)
    np.testing.assert_array_equal(x, [1, 0])
    x = exhaustive_oracle(-np.ones(3), np.zeros(3), np.ones(3), np.ones(3), 0.0)
    np.testing.assert_array_equal(x, 0)
    with pytest.raises(ValueError):
        exhaustive_oracle(-np.ones(21), np.zeros(21), np.ones(21), np.ones(21), 1.0)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31), K=st.integers(1, 9))
def test_exhaustive_matches_brute_force(seed, K):
    rng = np.random.default_rng(seed)
    y, rc, rd, p, budget = _instance(rng, K)
    x = exhaustive_oracle(y, rc, rd, p, budget)
    _, best = best_mode_vector(y, rc, rd, p, budget)
    assert mode_objective(x, y, rc, rd) == pytest.approx(best, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_single_pair_bnb_is_exact(seed):
    rng = np.random.default_rng(seed)
    y, rc, rd, p, budget = _instance(rng, 1)
    res = modified_bnb(y, rc, rd, p, budget)
    np.testing.assert_array_equal(res.x, exhaustive_oracle(y, rc, rd, p, budget))


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**31), K=st.integers(1, 10))
def test_bnb_invariants(seed, K):
    rng = np.random.default_rng(seed)
    y, rc, rd, p, budget = _instance(rng, K)
    res = modified_bnb(y, rc, rd, p, budget)
    assert set(np.unique(res.x)) <= {0, 1}
    assert p[res.x == 1].sum() <= budget + 1e-9
    assert res.nodes <= 2 * K + 1
    opt = mode_objective(exhaustive_oracle(y, rc, rd, p, budget), y, rc, rd)
    assert res.root_bound <= opt + 1e-9 <= res.objective + 2e-9
    trivial = [mode_objective(np.zeros(K), y, rc, rd)]
    if p.sum() <= budget:
        trivial.append(mode_objective(np.ones(K), y, rc, rd))
    assert res.objective <= min(trivial) + 1e-12


def test_frozen_instance():
    """Regression value fixed from the brute-force oracle."""
    rng = np.random.default_rng(12345)
    y, rc, rd, p, budget = _instance(rng, 6)
    x_ref, best = best_mode_vector(y, rc, rd, p, budget)
    np.testing.assert_array_equal(x_ref, [0, 0, 0, 0, 1, 0])
    assert best == pytest.approx(-310.049630545, rel=1e-9)
    res = modified_bnb(y, rc, rd, p, budget)
    assert res.objective == pytest.approx(best, rel=1e-9)
