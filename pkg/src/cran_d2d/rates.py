"""Achievable rates, fronthaul loads and constraint checks for one slot."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from ._validation import check_binary, check_vector

EPS_ACTIVE = 1e-8


@dataclass(frozen=True)
class Limits:
    """Per-slot constraint parameters (powers in mW, fronthaul in bit/s/Hz)."""

    p_max: float
    p_d_max: float
    fronthaul: np.ndarray  # (N,) capacity per RRH
    eps_active: float = EPS_ACTIVE

    def __post_init__(self):
        object.__setattr__(self, "fronthaul", np.atleast_1d(np.asarray(self.fronthaul, dtype=float)))
        if self.p_max < 0 or self.p_d_max < 0 or np.any(self.fronthaul < 0):
            raise ValueError("limits must be non-negative")


@dataclass
class ResourceAllocation:
    """Mode flags (0 = C-RAN, 1 = D2D), beamformers and transmit powers.

    ``w`` has one row per pair; rows of D2D-mode pairs are all zeros.
    """

    x: np.ndarray
    w: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.x = check_binary(self.x, "x")
        K = self.x.shape[0]
        self.p = check_vector(self.p, "p", length=K)
        self.w = np.asarray(self.w, dtype=complex)
        if self.w.ndim != 2 or self.w.shape[0] != K:
            raise ValueError("w must have one row per pair")
        if np.any(self.w[self.x == 1] != 0):
            raise ValueError("beamformers are defined only for C-RAN-mode pairs")

    @property
    def cran_set(self):
        return np.flatnonzero(self.x == 0)

    @property
    def d2d_set(self):
        return np.flatnonzero(self.x == 1)

    def copy(self):
        return ResourceAllocation(self.x.copy(), self.w.copy(), self.p.copy())


def _check_cran_pair(k, alloc):
    if alloc.x[k] != 0:
        raise ValueError(f"pair {k} is not in C-RAN mode")
    if not np.any(alloc.w[k]):
        raise ValueError(f"pair {k} has a zero beamformer")


def sinr_cran(k, alloc, ch):
    """Uplink SINR of pair ``k`` received with beamformer ``w_k`` by all RRHs."""
    _check_cran_pair(k, alloc)
    w = alloc.w[k]
    proj = np.abs(ch.g_cran.conj() @ w) ** 2  # |w^H g_l|^2 for every l
    interf = alloc.p @ proj - alloc.p[k] * proj[k]
    return float(alloc.p[k] * proj[k] / (interf + ch.noise_power * np.vdot(w, w).real))


def rate_cran(k, alloc, ch):
    return float(np.log2(1.0 + sinr_cran(k, alloc, ch)))


def rate_d2d(i, alloc, ch):
    """Direct-link rate of pair ``i`` in D2D mode."""
    if alloc.x[i] != 1:
        raise ValueError(f"pair {i} is not in D2D mode")
    s = np.abs(ch.g_d2d[:, i]) ** 2
    interf = alloc.p @ s - alloc.p[i] * s[i]
    return float(np.log2(1.0 + alloc.p[i] * s[i] / (interf + ch.noise_power)))


def rate_general(k, alloc, ch):
    if alloc.x[k] == 0:
        return rate_cran(k, alloc, ch)
    return rate_d2d(k, alloc, ch)


def cran_rates_all(w, p, ch):
    """Vectorised C-RAN rates for every row of ``w``; zero rows get rate 0."""
    proj = np.abs(w.conj() @ ch.g_cran.T) ** 2  # [k, l] = |w_k^H g_l|^2
    own = np.diag(proj) * p
    den = proj @ p - own + ch.noise_power * np.sum(np.abs(w) ** 2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(den > 0, own / den, 0.0)
    return np.log2(1.0 + sinr)


def d2d_rates_all(p, ch):
    """Vectorised D2D-mode rates assuming every pair used its direct link."""
    s = np.abs(ch.g_d2d) ** 2
    own = np.diag(s) * p
    den = s.T @ p - own + ch.noise_power
    return np.log2(1.0 + own / den)


def pair_rates(alloc, ch):
    """Rate of every pair in its selected mode."""
    rc = cran_rates_all(alloc.w, alloc.p, ch)
    rd = d2d_rates_all(alloc.p, ch)
    return np.where(alloc.x == 1, rd, rc)


def active_links(w, x, n_antennas, eps_active=EPS_ACTIVE):
    """(N, K) boolean: block n of w_k carries energy above the threshold."""
    K, L = w.shape
    blocks = (np.abs(w) ** 2).reshape(K, L // n_antennas, n_antennas).sum(axis=2)
    total = blocks.sum(axis=1, keepdims=True)
    act = (blocks > eps_active * total) & (total > 0)
    act &= (np.asarray(x) == 0)[:, None]
    return act.T


def fronthaul_load(n, alloc, rates, n_antennas, eps_active=EPS_ACTIVE):
    """Rate carried by RRH ``n``'s fronthaul; ``n=None`` returns all RRHs."""
    act = active_links(alloc.w, alloc.x, n_antennas, eps_active)
    loads = act.astype(float) @ np.asarray(rates, dtype=float)
    return loads if n is None else float(loads[n])


@dataclass
class FeasibilityReport:
    c2: bool
    c3: bool
    c4: bool
    c5: np.ndarray
    slack_c2: float
    slack_c4: float
    slack_c5: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def feasible(self):
        return bool(self.c2 and self.c3 and self.c4 and np.all(self.c5))


def check_constraints(alloc, ch, limits, rates=None, tol=1e-6):
    """Evaluate C2-C5; infeasibility is reported, never raised."""
    x, p = alloc.x, alloc.p
    if rates is None:
        rates = pair_rates(alloc, ch)
    d2d_power = float(np.sum(p[x == 1]))
    slack_c2 = limits.p_d_max - d2d_power
    c3 = bool(np.all((x == 0) | (x == 1)))
    slack_c4 = float(min(np.min(p), np.min(limits.p_max - p))) if p.size else 0.0
    loads = fronthaul_load(None, alloc, rates, ch.n_antennas, limits.eps_active)
    slack_c5 = limits.fronthaul - loads
    return FeasibilityReport(
        c2=slack_c2 >= -tol,
        c3=c3,
        c4=slack_c4 >= -tol,
        c5=slack_c5 >= -tol * np.maximum(1.0, limits.fronthaul),
        slack_c2=slack_c2,
        slack_c4=slack_c4,
        slack_c5=slack_c5,
    )


def cap_fronthaul_rates(rates, alloc, n_antennas, caps, weights, eps_active=EPS_ACTIVE):
    """Lower C-RAN transmission rates so every RRH respects its fronthaul cap.

    Solves ``max sum weights*r`` subject to ``0 <= r_k <= rates_k`` and
    ``sum_k 1{k active at n} r_k <= C_n``; pairs in D2D mode keep their rate.
    Returns the input unchanged when no RRH is overloaded.
    """
    rates = np.asarray(rates, dtype=float)
    act = active_links(alloc.w, alloc.x, n_antennas, eps_active).astype(float)
    caps = np.asarray(caps, dtype=float)
    if np.all(act @ rates <= caps * (1 + 1e-12)):
        return rates
    idx = np.flatnonzero(act.any(axis=0))
    res = linprog(
        -np.asarray(weights, dtype=float)[idx],
        A_ub=act[:, idx],
        b_ub=caps,
        bounds=[(0.0, r) for r in rates[idx]],
        method="highs",
    )
    out = rates.copy()
    if res.status == 0:
        out[idx] = np.clip(res.x, 0.0, rates[idx])
    else:  # proportional fallback, always feasible
        load = act @ rates
        scale = np.min(np.where(load > caps, caps / np.where(load > 0, load, 1.0), 1.0))
        out[idx] = rates[idx] * scale
    # make the caps hold exactly despite LP round-off
    over = act @ out - caps
    if np.any(over > 0):
        load = act @ out
        scale = np.min(np.where(over > 0, caps / np.where(load > 0, load, 1.0), 1.0))
        out[idx] *= scale
    return out
