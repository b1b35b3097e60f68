"""Independent reference implementations used by the tests.

Nothing here imports the package's numerical code.  The oracles are scalar
loops, brute-force enumerations or a different algorithm altogether
(projected gradient, grid search, a general LP solver).
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog


# ---------------------------------------------------------------- queues
def queue_step(q, r, a):
    """Scalar queue recursion with plain Python floats."""
    return max(q - r, 0.0) + a


def lyapunov(q):
    return 0.5 * sum(float(v) * float(v) for v in q)


# ---------------------------------------------------------------- rates
def cran_sinr(k, w, p, g, noise):
    """SINR of pair k with receive beamformer w[k]; scalar loops only."""
    L = len(w[k])
    own = 0.0
    interf = 0.0
    for l in range(len(p)):
        acc = 0j
        for i in range(L):
            acc += w[k][i].conjugate() * g[l][i]
        val = p[l] * (acc.real ** 2 + acc.imag ** 2)
        if l == k:
            own = val
        else:
            interf += val
    wn = sum(abs(v) ** 2 for v in w[k])
    return own / (interf + noise * wn)


def d2d_sinr(i, p, gd, noise):
    interf = sum(p[j] * abs(gd[j][i]) ** 2 for j in range(len(p)) if j != i)
    return p[i] * abs(gd[i][i]) ** 2 / (interf + noise)


def capped_rates_lp(rates, active, caps, weights):
    """Fronthaul rate cap as a dense LP solved by scipy's default method."""
    K = len(rates)
    res = linprog(-np.asarray(weights, float), A_ub=np.asarray(active, float),
                  b_ub=np.asarray(caps, float), bounds=[(0, r) for r in rates])
    assert res.status == 0
    return -res.fun


# ---------------------------------------------------------------- mode selection
def mode_objective(x, y, rc, rd):
    return sum(y[k] * ((1 - x[k]) * rc[k] + x[k] * rd[k]) for k in range(len(y)))


def relaxed_lp(fixed, y, rc, rd, p, budget):
    """LP relaxation through a generic LP solver (not a greedy fill)."""
    K = len(y)
    c = [y[k] * (rd[k] - rc[k]) for k in range(K)]
    bounds = [(fixed[k], fixed[k]) if k in fixed else (0.0, 1.0) for k in range(K)]
    res = linprog(c, A_ub=[list(p)], b_ub=[budget], bounds=bounds, method="highs")
    if res.status != 0:
        return None, math.inf
    const = sum(y[k] * rc[k] for k in range(K))
    return res.x, res.fun + const


def best_mode_vector(y, rc, rd, p, budget):
    """Brute force with itertools; first minimiser in lexicographic order."""
    K = len(y)
    best, best_x = math.inf, None
    for bits in itertools.product((0, 1), repeat=K):
        if sum(p[k] for k in range(K) if bits[k]) > budget + 1e-9:
            continue
        v = mode_objective(bits, y, rc, rd)
        if v < best - 1e-15:
            best, best_x = v, bits
    return np.array(best_x), best


# ---------------------------------------------------------------- WMMSE / QCQP
def mse_scalar(mu, w, g_all, p, k, p_hat, noise):
    """MSE with interferers weighted by p_l / p_hat; scalar loops only."""
    L = len(w)
    quad = 0.0
    for l in range(len(p)):
        acc = 0j
        for i in range(L):
            acc += g_all[l][i].conjugate() * w[i]
        quad += p[l] * abs(acc) ** 2
    quad = (quad + noise) / p_hat
    cross = sum(g_all[k][i].conjugate() * w[i] for i in range(L))
    return abs(mu) ** 2 * quad - 2.0 * (mu.conjugate() * cross).real + 1.0


def _project_diag_ellipsoid(v, d, c):
    """Euclidean projection of v onto {x : sum d|x|^2 <= c}, d >= 0."""
    if np.sum(d * np.abs(v) ** 2) <= c:
        return v
    lo, hi = 0.0, 1.0
    f = lambda t: np.sum(d * np.abs(v / (1 + t * d)) ** 2) - c
    while f(hi) > 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return v / (1 + hi * d)


def _project(W, diag_sets, iters=3000, tol=1e-13):
    """Dykstra's alternating projections onto an intersection of ellipsoids."""
    x = W.ravel().copy()
    incs = [np.zeros_like(x) for _ in diag_sets]
    for _ in range(iters):
        prev = x.copy()
        for j, (d, c) in enumerate(diag_sets):
            y = x + incs[j]
            x = _project_diag_ellipsoid(y, d, c)
            incs[j] = y - x
        if np.linalg.norm(x - prev) <= tol * max(1.0, np.linalg.norm(x)):
            break
    return x.reshape(W.shape)


def qcqp_projected_gradient(A_list, b_list, fh, n_ant, caps, p_max, iters=4000):
    """min sum_k w_k^H A_k w_k - 2 Re{b_k^H w_k} over the QCQP feasible set.

    Accelerated projected gradient with a fixed 1/L step.
    """
    R = len(A_list)
    L = A_list[0].shape[0]
    N = fh.shape[0]
    sets = []
    for n in range(N):
        d = np.zeros((R, L))
        for k in range(R):
            d[k, n * n_ant:(n + 1) * n_ant] = fh[n, k]
        sets.append((d.ravel(), caps[n]))
    for k in range(R):
        d = np.zeros((R, L))
        d[k] = 1.0
        sets.append((d.ravel(), p_max))
    lip = 2.0 * max(np.linalg.eigvalsh(A).max() for A in A_list) + 1e-300
    W = np.zeros((R, L), complex)
    Y = W.copy()
    t = 1.0
    for _ in range(iters):
        grad = np.stack([2 * A_list[k] @ Y[k] - 2 * b_list[k] for k in range(R)])
        Wn = _project(Y - grad / lip, sets)
        tn = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        Y = Wn + ((t - 1) / tn) * (Wn - W)
        W, t = Wn, tn
    return W


def qcqp_value(W, A_list, b_list):
    return float(sum((np.vdot(W[k], A_list[k] @ W[k]) - 2 * np.vdot(b_list[k], W[k])).real
                     for k in range(len(A_list))))


# ---------------------------------------------------------------- power control
def wsr(p, direct, cross, noise, u):
    tot = 0.0
    n = len(p)
    for k in range(n):
        interf = noise[k] + sum(cross[l][k] * p[l] for l in range(n) if l != k)
        tot += u[k] * math.log2(1.0 + p[k] * direct[k] / interf)
    return tot


def grid_max_wsr(direct, cross, noise, u, p_max, budget=None, points=121, refine=3):
    """Grid search over the box (and budget simplex), refined around the best cell."""
    n = len(direct)
    lo = np.zeros(n)
    hi = np.full(n, float(p_max))
    best_val, best_p = -math.inf, None
    for _ in range(refine + 1):
        axes = [np.linspace(lo[i], hi[i], points if n <= 2 else 41) for i in range(n)]
        for pt in itertools.product(*axes):
            if budget is not None and sum(pt) > budget + 1e-12:
                continue
            v = wsr(pt, direct, cross, noise, u)
            if v > best_val:
                best_val, best_p = v, np.array(pt)
        span = (hi - lo) / ((points if n <= 2 else 41) - 1)
        lo = np.maximum(best_p - 2 * span, 0.0)
        hi = np.minimum(best_p + 2 * span, p_max)
    if budget is not None:
        # the optimum often sits on the budget face; scan it directly as well
        for pt in itertools.product(*[np.linspace(0, p_max, 201)] * (n - 1)):
            last = budget - sum(pt)
            if 0 <= last <= p_max:
                full = np.array(pt + (last,))
                v = wsr(full, direct, cross, noise, u)
                if v > best_val:
                    best_val, best_p = v, full
    return best_val, best_p
