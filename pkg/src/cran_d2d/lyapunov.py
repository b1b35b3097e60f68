"""Drift-plus-penalty weights and the pathwise drift bound."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_positive, check_vector


@dataclass(frozen=True)
class DriftWeights:
    """``y[k] = -(Q_k + V)``; the per-slot problem minimises ``sum y_k R_k``."""

    y: np.ndarray
    v_param: float

    @property
    def rate_weights(self):
        """``Q_k + V``, the positive weights of the equivalent maximisation."""
        return -self.y


def drift_weights(q, V):
    V = check_positive(V, "V", strict=False)
    q = q.q if hasattr(q, "q") else check_vector(q, "q", nonneg=True)
    return DriftWeights(-(np.asarray(q, dtype=float) + V), V)


def lyapunov_value(q):
    q = q.q if hasattr(q, "q") else np.asarray(q, dtype=float)
    return 0.5 * float(np.sum(q * q))


@dataclass(frozen=True)
class DriftCheck:
    holds: bool
    slack: float
    lhs: float
    rhs: float


def assert_lemma1(q_before, q_after, rates, arrivals, V, B=None, rtol=1e-9):
    """Check the one-slot drift-plus-penalty bound on a realised transition.

    ``L(q') - L(q) - V sum R <= B + sum q (A - R) - V sum R`` with the
    sample-path constant ``B = 0.5 sum (R^2 + A^2)`` unless ``B`` is given.
    """
    qb = np.asarray(getattr(q_before, "q", q_before), dtype=float)
    qa = np.asarray(getattr(q_after, "q", q_after), dtype=float)
    r = np.asarray(rates, dtype=float)
    a = np.asarray(arrivals, dtype=float)
    expected = np.maximum(qb - r, 0.0) + a
    if not np.allclose(qa, expected, rtol=1e-12, atol=1e-9):
        raise ValueError("q_after is not the queue update of q_before")
    if B is None:
        B = 0.5 * float(np.sum(r * r + a * a))
    penalty = V * float(np.sum(r))
    lhs = lyapunov_value(qa) - lyapunov_value(qb) - penalty
    rhs = B + float(np.sum(qb * (a - r))) - penalty
    scale = max(1.0, abs(lhs), abs(rhs), lyapunov_value(qb))
    slack = rhs - lhs
    return DriftCheck(bool(slack >= -rtol * scale), slack, lhs, rhs)
