"""Per-pair traffic queues with Poisson arrivals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_positive, check_vector


@dataclass(frozen=True)
class QueueState:
    q: np.ndarray
    t: int = 0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 1 or np.any(q < 0) or not np.all(np.isfinite(q)):
            raise ValueError("queue backlog must be a finite non-negative vector")
        object.__setattr__(self, "q", q)
        if self.t < 0:
            raise ValueError("slot index must be >= 0")

    @classmethod
    def empty(cls, n_pairs):
        return cls(np.zeros(n_pairs), 0)


@dataclass(frozen=True)
class ArrivalProcess:
    lam: float

    def __post_init__(self):
        check_positive(self.lam, "lambda", strict=False)


def draw_arrivals(proc, K, rng):
    """Poisson arrivals (bit/slot/Hz) for ``K`` pairs."""
    if proc.lam == 0:
        return np.zeros(K)
    return rng.poisson(proc.lam, size=K).astype(float)


def update_queues(state, rates, arrivals):
    """One slot of ``Q(t+1) = max(Q(t) - R(t), 0) + A(t)``."""
    K = state.q.shape[0]
    rates = check_vector(rates, "rates", length=K)
    arrivals = check_vector(arrivals, "arrivals", length=K)
    if np.any(rates < 0):
        raise ValueError("rates must be non-negative")
    if np.any(arrivals < 0):
        raise ValueError("arrivals must be non-negative")
    q = np.maximum(state.q - rates, 0.0) + arrivals
    return QueueState(q, state.t + 1)


def _as_runs(history):
    """Normalise a queue history to (runs, T, K) backlog plus slot indices."""
    if len(history) == 0:
        raise ValueError("empty queue history")
    first = history[0]
    if isinstance(first, QueueState):
        q = np.stack([s.q for s in history])[None]
        t = np.array([s.t for s in history], dtype=float)
        return q, t
    if len(first) and isinstance(first[0], QueueState):
        q = np.stack([np.stack([s.q for s in run]) for run in history])
        t = np.array([s.t for s in history[0]], dtype=float)
        return q, t
    q = np.asarray(history, dtype=float)
    if q.ndim == 2:
        q = q[None]
    if q.ndim != 3:
        raise ValueError("history must be (T, K) or (runs, T, K)")
    return q, np.arange(1, q.shape[1] + 1, dtype=float)


def stability_metric(history):
    """Per-pair estimate of E{|Q(t)|}/t at the last recorded slot.

    ``history`` is a sequence of :class:`QueueState` (one run), a list of such
    sequences (several Monte Carlo runs) or a raw array shaped (T, K) or
    (runs, T, K) whose rows are slots 1..T.  Values shrinking towards zero
    as the horizon grows indicate mean-rate stability.
    """
    q, t = _as_runs(history)
    if q.shape[1] < 2:
        raise ValueError("need at least two recorded slots")
    t_last = t[-1]
    if t_last <= 0:
        raise ValueError("last slot index must be positive")
    return np.abs(q[:, -1, :]).mean(axis=0) / t_last


def average_delay(history, lam):
    """Average queueing delay in slots via Little's law."""
    lam = check_positive(lam, "lambda")
    q, _ = _as_runs(history)
    return float(q.mean() / lam)
