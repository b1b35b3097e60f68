"""Per-slot binary mode selection: two-survival-path branch and bound.

With the per-pair C-RAN/D2D rates held fixed, the relaxed problem is a
fractional knapsack over the D2D power budget, solved exactly by a greedy
fill.  Branch and bound then keeps at most two live nodes per level, so the
number of relaxations solved is at most ``2K + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INT_TOL = 1e-9
BUDGET_TOL = 1e-9


@dataclass
class BnbNode:
    fixed: dict
    relaxed_x: np.ndarray
    lower_bound: float
    depth: int
    feasible: bool = True

    @property
    def fractional(self):
        x = self.relaxed_x
        return np.flatnonzero((x > INT_TOL) & (x < 1 - INT_TOL))


@dataclass
class BnbResult:
    x: np.ndarray
    objective: float
    nodes: int
    root_bound: float
    trace: list = field(default_factory=list)


def _as_y(weights):
    return np.asarray(getattr(weights, "y", weights), dtype=float)


def _budget(limits):
    return float(getattr(limits, "p_d_max", limits))


def mode_objective(x, weights, rc, rd):
    y = _as_y(weights)
    x = np.asarray(x, dtype=float)
    return float(np.sum(y * ((1 - x) * rc + x * rd)))


def solve_relaxed(fixed, weights, rc, rd, powers, limits):
    """Greedy exact solution of the LP relaxation with some entries fixed.

    Returns ``(relaxed_x, lower_bound, feasible)``.
    """
    y = _as_y(weights)
    rc = np.asarray(rc, dtype=float)
    rd = np.asarray(rd, dtype=float)
    p = np.asarray(powers, dtype=float)
    K = y.shape[0]
    x = np.zeros(K)
    free = np.ones(K, dtype=bool)
    for k, v in fixed.items():
        x[k] = v
        free[k] = False
    budget = _budget(limits) - float(np.sum(p[x == 1]))
    if budget < -BUDGET_TOL:
        return x, np.inf, False

    gain = y * (rd - rc)  # objective change per unit of x_k
    cand = np.flatnonzero(free & (gain < 0))
    zero_cost = cand[p[cand] <= 0]
    x[zero_cost] = 1.0
    cand = cand[p[cand] > 0]
    order = cand[np.argsort(gain[cand] / p[cand], kind="stable")]
    for k in order:
        if budget <= 0:
            break
        take = min(1.0, budget / p[k])
        x[k] = take
        budget -= take * p[k]
    return x, mode_objective(x, y, rc, rd), True


def pick_branch_variable(relaxed_x, rc, rd):
    """Fractional pair with the largest ``max(rc_k, rd_k)``; ties to lowest index."""
    x = np.asarray(relaxed_x, dtype=float)
    frac = np.flatnonzero((x > INT_TOL) & (x < 1 - INT_TOL))
    if frac.size == 0:
        raise ValueError("relaxed solution has no fractional entry")
    score = np.maximum(np.asarray(rc)[frac], np.asarray(rd)[frac])
    return int(frac[np.argmax(score)])


def _node(fixed, weights, rc, rd, powers, limits, depth):
    x, lb, ok = solve_relaxed(fixed, weights, rc, rd, powers, limits)
    return BnbNode(dict(fixed), x, lb, depth, ok)


def _c2_ok(x, powers, limits):
    return float(np.sum(np.asarray(powers)[x == 1])) <= _budget(limits) + BUDGET_TOL


def modified_bnb(weights, rc, rd, powers, limits):
    """Depth-first branch and bound restricted to two survival paths.

    The incumbent starts from the best of all-C-RAN, all-D2D (when the power
    budget allows it) and the rounded-down root relaxation.
    """
    y = _as_y(weights)
    K = y.shape[0]
    p = np.asarray(powers, dtype=float)

    root = _node({}, y, rc, rd, p, limits, 0)
    nodes = 1

    best_x = np.zeros(K, dtype=np.int64)
    best = mode_objective(best_x, y, rc, rd)
    seeds = [np.ones(K, dtype=np.int64), np.floor(root.relaxed_x + INT_TOL).astype(np.int64)]
    for cand in seeds:
        if _c2_ok(cand, p, limits):
            val = mode_objective(cand, y, rc, rd)
            if val < best:
                best, best_x = val, cand

    trace = []
    live = [root]
    while live:
        i = min(range(len(live)), key=lambda j: (live[j].lower_bound, j))
        node = live.pop(i)
        trace.append((node.depth, node.lower_bound))
        if not node.feasible or node.lower_bound > best:
            continue
        frac = node.fractional
        if frac.size == 0:
            xi = np.rint(node.relaxed_x).astype(np.int64)
            if node.lower_bound < best:
                best, best_x = node.lower_bound, xi
            continue
        k = pick_branch_variable(node.relaxed_x, rc, rd)
        children = []
        for v in (0, 1):
            fixed = dict(node.fixed)
            fixed[k] = v
            children.append(_node(fixed, y, rc, rd, p, limits, node.depth + 1))
            nodes += 1
        live = children  # the two children of the current best node survive
    return BnbResult(best_x, best, nodes, root.lower_bound, trace)


def exhaustive_oracle(weights, rc, rd, powers, limits, max_pairs=20):
    """Enumerate all mode vectors; first minimiser in counting order wins.

    Candidate ``m`` has ``x_k = (m >> k) & 1``.
    """
    y = _as_y(weights)
    K = y.shape[0]
    if K > max_pairs:
        raise ValueError(f"exhaustive search refused for K={K} > {max_pairs}")
    p = np.asarray(powers, dtype=float)
    codes = np.arange(2 ** K)
    X = ((codes[:, None] >> np.arange(K)) & 1).astype(np.int64)
    feas = X @ p <= _budget(limits) + BUDGET_TOL
    vals = X @ (y * (np.asarray(rd) - np.asarray(rc))) + float(np.sum(y * rc))
    vals = np.where(feas, vals, np.inf)
    m = int(np.argmin(vals))  # argmin returns the first occurrence
    return X[m]
