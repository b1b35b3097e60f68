"""Transmit power control for D2D-mode and C-RAN-mode pairs.

Both subproblems are weighted sum-rate maximisations of the form

    max  sum_k u_k log2(1 + p_k a_k / (n_k + sum_{l != k} c_{lk} p_l))

over a box ``0 <= p <= P_max`` (plus the budget ``sum p <= P^I_Dmax`` for
D2D-mode pairs).  Each iteration evaluates the water-filling power of every
pair with the interference it causes priced linearly, picks the budget
multiplier by bisection, and moves towards that target with a backtracking
step so the objective never decreases.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ._kernels import power_ascent

LN2 = np.log(2.0)


def _rate_weights(weights):
    if hasattr(weights, "rate_weights"):
        return np.asarray(weights.rate_weights, dtype=float)
    return np.asarray(weights, dtype=float)


@dataclass
class LagrangeState:
    delta: float = 0.0
    omega: np.ndarray = field(default_factory=lambda: np.zeros(0))
    step_a: float = 0.1
    step_b: float = 10.0
    iter: int = 0

    @property
    def step(self):
        return self.step_a / (self.step_b + self.iter)


@dataclass
class PowerResult:
    pairs: np.ndarray
    p: np.ndarray
    delta: float
    omega: np.ndarray
    objective: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)

    def scatter(self, full):
        """Write ``p`` into a copy of the full K-vector ``full``."""
        out = np.array(full, dtype=float, copy=True)
        out[self.pairs] = self.p
        return out


def weighted_sum_rate(p, direct, cross, noise, u):
    """Objective value; ``cross[l, k]`` is the gain from Tx l into receiver k."""
    s = p * direct
    interf = noise + cross.T @ p
    return float(np.sum(u * np.log2(1.0 + s / interf)))


def _prices(p, direct, cross, noise, u):
    s = p * direct
    interf = noise + cross.T @ p
    marg = u * s / (interf * (interf + s))  # -d(u_k ln(1+SINR_k))/dI_k
    return (cross @ marg) / LN2, interf


def _omega(p, delta, u, direct, interf, price, p_max):
    """Box multipliers recovered from stationarity at ``p``."""
    marginal = u * direct / (LN2 * (interf + direct * p))
    at_cap = p >= p_max * (1 - 1e-12)
    return np.where(at_cap, np.maximum(marginal - delta - price, 0.0), 0.0)


def _ascent(p0, direct, cross, noise, u, p_max, budget, tol, max_iter):
    cap = np.inf if budget is None else float(budget)
    p, f, delta, it, converged, history = power_ascent(
        np.asarray(p0, dtype=float), direct, np.ascontiguousarray(cross), noise, u,
        float(p_max), cap, float(tol), int(max_iter))
    price, interf = _prices(p, direct, cross, noise, u)
    omega = _omega(p, delta, u, direct, interf, price, p_max)
    return p, f, delta, omega, it, converged, history.tolist()


def _starts(direct, cross, noise, u, p_max, budget, n_best=2, exhaustive_upto=3):
    """Initial points: equal share plus on/off vertices of the power box."""
    n = direct.shape[0]
    share = p_max if budget is None else min(p_max, budget / n)
    starts = [np.full(n, share)]
    cap = n if budget is None else int(np.floor(budget / p_max + 1e-12)) if p_max > 0 else n
    verts = []
    for r in range(1, n + 1):
        for sub in combinations(range(n), r):
            v = np.zeros(n)
            level = p_max if r <= cap else budget / r
            v[list(sub)] = level
            verts.append(v)
    if not verts:
        return starts
    if n <= exhaustive_upto:
        return starts + verts
    vals = [weighted_sum_rate(v, direct, cross, noise, u) for v in verts]
    order = np.argsort(vals)[::-1][:n_best]
    return starts + [verts[i] for i in order]


def maximize_weighted_rate(direct, cross, noise, u, p_max, budget=None, tol=1e-6,
                           max_iter=1000, starts=None):
    """Multi-start price-based ascent; returns the best stationary point."""
    direct = np.asarray(direct, dtype=float)
    cross = np.array(cross, dtype=float)
    np.fill_diagonal(cross, 0.0)
    noise = np.asarray(noise, dtype=float)
    u = np.asarray(u, dtype=float)
    live = (direct > 0) & (u > 0) & (noise > 0)
    n = direct.shape[0]
    p_out = np.zeros(n)
    if not np.any(live):
        return p_out, 0.0, 0.0, np.zeros(n), 0, True, [0.0]
    idx = np.flatnonzero(live)
    d, c, nz, uu = direct[idx], cross[np.ix_(idx, idx)], noise[idx], u[idx]
    # pairs outside ``live`` transmit nothing, so they add no interference
    if starts is None:
        starts = _starts(d, c, nz, uu, p_max, budget)
    else:
        starts = [np.asarray(s, dtype=float)[idx] for s in starts]
    best = None
    for s in starts:
        res = _ascent(s, d, c, nz, uu, p_max, budget, tol, max_iter)
        if best is None or res[1] > best[1] + 1e-12 * max(1.0, abs(best[1])):
            best = res
    p, f, delta, omega, it, conv, hist = best
    p_out[idx] = p
    om = np.zeros(n)
    om[idx] = omega
    return p_out, f, delta, om, it, conv, hist


def d2d_power_closed_form(i, weights, multipliers, powers, ch, p_max=np.inf, d2d_set=None):
    """Water-filling power of D2D-mode pair ``i`` with the others fixed.

    ``multipliers`` is ``(delta, omega_i)``.  The level is
    ``Y'_i / ((omega_i + delta) ln2 + price_i)`` where ``price_i`` is the
    marginal weighted-rate loss that pair ``i`` inflicts on the other pairs of
    ``d2d_set`` (zero when it is alone); the result is projected onto
    ``[0, p_max]``.
    """
    u = _rate_weights(weights)
    delta, omega_i = multipliers
    p = np.asarray(powers, dtype=float)
    s = np.abs(ch.g_d2d) ** 2
    if s[i, i] <= 0:
        raise ValueError("zero direct D2D gain")
    interf = ch.noise_power + p @ s[:, i] - p[i] * s[i, i]
    price = 0.0
    if d2d_set is not None:
        for k in d2d_set:
            if k == i:
                continue
            ik = ch.noise_power + p @ s[:, k] - p[k] * s[k, k]
            sk = p[k] * s[k, k]
            price += u[k] * s[i, k] * sk / (ik * (ik + sk))
        price /= LN2
    denom = (omega_i + delta) * LN2 + price * LN2
    if denom <= 0:
        raise ValueError("multipliers (and price) must sum to a positive value")
    raw = u[i] / denom - interf / s[i, i]
    return float(min(max(raw, 0.0), p_max))


def update_multipliers(state, powers, limits):
    """Projected (sub)gradient step on ``delta`` and ``omega``."""
    p = np.asarray(powers, dtype=float)
    step = state.step
    delta = max(0.0, state.delta - step * (limits.p_d_max - float(np.sum(p))))
    omega = state.omega if state.omega.size == p.size else np.zeros(p.size)
    omega = np.maximum(0.0, omega - step * (limits.p_max - p))
    return LagrangeState(delta, omega, state.step_a, state.step_b, state.iter + 1)


def d2d_problem(pairs, ch, powers):
    """Gains of the D2D subproblem; pairs outside ``pairs`` add fixed interference."""
    pairs = np.asarray(pairs, dtype=int)
    s = np.abs(ch.g_d2d) ** 2
    others = np.setdiff1d(np.arange(ch.n_pairs), pairs)
    p = np.asarray(powers, dtype=float)
    direct = s[pairs, pairs]
    cross = s[np.ix_(pairs, pairs)]
    noise = ch.noise_power + p[others] @ s[np.ix_(others, pairs)]
    return direct, cross, noise


def cran_problem(pairs, w, ch, powers):
    """Gains of the C-RAN subproblem for receive beamformers ``w`` (rows = pairs)."""
    pairs = np.asarray(pairs, dtype=int)
    w = np.asarray(w)
    if w.shape[0] != pairs.size:
        w = w[pairs]
    proj = np.abs(w.conj() @ ch.g_cran.T) ** 2  # [k, l] = |w_k^H g_l|^2
    others = np.setdiff1d(np.arange(ch.n_pairs), pairs)
    p = np.asarray(powers, dtype=float)
    direct = proj[np.arange(pairs.size), pairs]
    cross = proj[:, pairs].T  # cross[l, k] = |w_k^H g_l|^2
    noise = ch.noise_power * np.sum(np.abs(w) ** 2, axis=1) + proj[:, others] @ p[others]
    return direct, cross, noise


def solve_d2d_power(pairs, weights, ch, limits, powers=None, tol=1e-6, max_iter=1000,
                    starts=None):
    """Weighted sum-rate power control of the D2D-mode pairs under C2 and C4."""
    pairs = np.asarray(pairs, dtype=int)
    if pairs.size == 0:
        raise ValueError("empty D2D set")
    if powers is None:
        powers = np.zeros(ch.n_pairs)
    u = _rate_weights(weights)[pairs]
    direct, cross, noise = d2d_problem(pairs, ch, powers)
    p, f, delta, omega, it, conv, hist = maximize_weighted_rate(
        direct, cross, noise, u, limits.p_max, limits.p_d_max, tol, max_iter, starts)
    return PowerResult(pairs, p, delta, omega, f, it, conv, hist)


def solve_cran_power(pairs, beamformers, weights, ch, limits, powers=None, tol=1e-6,
                     max_iter=1000, starts=None):
    """Power control of C-RAN-mode pairs for fixed receive beamformers (box only)."""
    pairs = np.asarray(pairs, dtype=int)
    if pairs.size == 0:
        raise ValueError("empty C-RAN set")
    if powers is None:
        powers = np.zeros(ch.n_pairs)
    u = _rate_weights(weights)[pairs]
    direct, cross, noise = cran_problem(pairs, beamformers, ch, powers)
    p, f, delta, omega, it, conv, hist = maximize_weighted_rate(
        direct, cross, noise, u, limits.p_max, None, tol, max_iter, starts)
    return PowerResult(pairs, p, delta, omega, f, it, conv, hist)
