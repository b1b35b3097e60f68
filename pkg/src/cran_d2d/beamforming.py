"""Network-wide uplink beamforming by WMMSE block coordinate descent.

The beamformer of C-RAN-mode pair ``k`` is designed on its virtual downlink
problem.  With transmit powers folded into the channel (interferers weighted
by ``p_l / p_k``) the MSE of a scalar receiver ``mu_k`` is

    e_k = |mu_k|^2 (w_k^H S w_k + s0) / p_k - 2 Re{mu_k^* g_k^H w_k} + 1,
    S   = sum_l p_l g_l g_l^H,

and its minimum over ``mu_k`` is ``1 / (1 + gamma_k)`` with
``gamma_k = p_k |g_k^H w_k|^2 / (sum_{l != k} p_l |g_l^H w_k|^2 + s0)``.
The noise term ``s0`` defaults to ``sigma^2``; the slot controllers use
``sigma^2 P_max``, which makes ``gamma_k`` equal the uplink SINR of receive
beamformer ``w_k`` whenever ``||w_k||^2 = P_max``.  The beamformer step is a
convex QCQP with a power ball per pair and one reweighted-l1 fronthaul
constraint per RRH, solved through its dual.  The reweighting coefficients
are held fixed for a round of sweeps so the objective trace is
non-increasing inside a round.  The designed ``w_k`` is then used directly
as the uplink receive beamformer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import add_prox, mse_terms, qcqp_newton, restore_feasibility, wmmse_round
from .rates import cran_rates_all

P_HAT_FLOOR = 1e-6  # mW
TAU = 1e-10
PROX = 1e-3  # proximal weight relative to the mean eigenvalue of each quadratic form


@dataclass
class WmmseState:
    pairs: np.ndarray
    w: np.ndarray  # (|C|, N*M)
    rho: np.ndarray
    mu: np.ndarray
    beta: np.ndarray  # (N, |C|)
    r_hat: np.ndarray
    p_hat: np.ndarray
    objective_trace: list = field(default_factory=list)


@dataclass
class QcqpResult:
    w: np.ndarray
    lam: np.ndarray
    nu: np.ndarray
    converged: bool
    primal_violation: float
    iterations: int


@dataclass
class WmmseResult:
    pairs: np.ndarray
    w: np.ndarray
    rho: np.ndarray
    mu: np.ndarray
    beta: np.ndarray
    trace: list  # one list of objective values per reweighting round
    sweeps: int
    converged: bool


def signal_covariance(ch, powers):
    """``sum_l p_l g_l g_l^H`` over every transmitting pair (no noise)."""
    g = ch.g_cran
    p = np.asarray(powers, dtype=float)
    return (g.T * p) @ g.conj()


def receive_covariance(ch, powers):
    """Uplink receive covariance ``sum_l p_l g_l g_l^H + sigma^2 I``."""
    return signal_covariance(ch, powers) + ch.noise_power * np.eye(ch.g_cran.shape[1])


def block_energy(w, n_antennas):
    """(N, rows) energy of each RRH block of each beamformer row."""
    rows, L = w.shape
    return (np.abs(w) ** 2).reshape(rows, L // n_antennas, n_antennas).sum(axis=2).T


def _p_hat(powers, pairs):
    return np.maximum(np.asarray(powers, dtype=float)[pairs], P_HAT_FLOOR)


def make_state(pairs, ch, powers, w, mu=None, r_hat=None, tau=TAU):
    pairs = np.asarray(pairs, dtype=int)
    w = np.atleast_2d(np.asarray(w, dtype=complex))
    mu = np.zeros(pairs.size, complex) if mu is None else np.asarray(mu, dtype=complex)
    r_hat = np.zeros(pairs.size) if r_hat is None else np.asarray(r_hat, dtype=float)
    return WmmseState(pairs, w, np.ones(pairs.size), mu,
                      update_fronthaul_weights(w, ch.n_antennas, tau), r_hat, _p_hat(powers, pairs))


def _quad(k, state, ch, powers, noise):
    w = state.w[k]
    s = signal_covariance(ch, powers)
    noise = ch.noise_power if noise is None else noise
    return (np.vdot(w, s @ w).real + noise) / state.p_hat[k]


def compute_mse(k, state, ch, powers, noise=None):
    """MSE of the ``k``-th entry of ``state.pairs``; ``noise`` defaults to sigma^2."""
    if state.p_hat[k] <= 0:
        raise ValueError("p_hat must be positive")
    mu, g, w = state.mu[k], ch.g_cran[state.pairs[k]], state.w[k]
    return float(abs(mu) ** 2 * _quad(k, state, ch, powers, noise)
                 - 2.0 * (np.conj(mu) * np.vdot(g, w)).real + 1.0)


def update_mse_weight(e):
    e = np.asarray(e, dtype=float)
    if np.any(e <= 0):
        raise ValueError("MSE must be positive")
    out = 1.0 / e
    return float(out) if out.ndim == 0 else out


def update_receiver(k, state, ch, powers, noise=None):
    """MMSE scalar receiver ``g_k^H w_k / ((w_k^H S w_k + s0) / p_k)``."""
    g, w = ch.g_cran[state.pairs[k]], state.w[k]
    return complex(np.vdot(g, w) / _quad(k, state, ch, powers, noise))


def update_fronthaul_weights(w, n_antennas, tau=TAU):
    """Reweighting coefficients ``1 / (||D_n w_k||^2 + tau)``, shape (N, rows)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return 1.0 / (block_energy(np.atleast_2d(w), n_antennas) + tau)


def wmmse_objective(u, rho, e):
    return float(np.sum(u * (rho * e - np.log(rho))))


def _constraint_data(beta, r_hat, caps, p_max, n_antennas, rows):
    N = beta.shape[0]
    fh = np.ascontiguousarray(beta * np.asarray(r_hat, dtype=float)[None, :])
    caps = np.broadcast_to(np.asarray(caps, dtype=float), (N,))
    c = np.concatenate([caps, np.full(rows, float(p_max))])
    if np.any(c <= 0):
        raise ValueError("capacities and power limits must be positive")
    return fh, c


def qcqp_objective(w, u, rho, mu, g, scov, p_hat):
    """Beamformer-dependent part of the WMMSE objective."""
    quad = np.einsum("ki,ij,kj->k", w.conj(), scov, w).real
    cross = np.einsum("ki,ki->k", g.conj(), w)
    return float(np.sum(u * rho * (np.abs(mu) ** 2 * quad / p_hat
                                   - 2.0 * (np.conj(mu) * cross).real)))


def solve_qcqp(u, rho, mu, g, scov, p_hat, beta, r_hat, p_max, caps, n_antennas,
               tol=1e-6, max_iter=500, z0=None, w_prev=None, prox=0.0):
    """Beamformer step for fixed receivers and MSE weights.

    Minimises ``sum_k u_k rho_k (|mu_k|^2 w_k^H S w_k / p_k - 2 Re{mu_k^* g_k^H w_k})``
    subject to ``||w_k||^2 <= p_max`` and, for every RRH n,
    ``sum_k beta_nk r_hat_k ||D_n w_k||^2 <= C_n``.  For fixed fronthaul
    multipliers each pair is a trust-region problem solved exactly through
    an eigen-decomposition; the fronthaul multipliers maximise the concave
    dual by projected Newton steps.  With ``prox > 0`` the objective gains
    ``eps_k ||w_k - w_prev_k||^2``, ``eps_k = prox * tr(A_k) / L``, which
    makes a rank-deficient problem strictly convex.
    """
    g = np.ascontiguousarray(g, dtype=complex)
    rows, L = g.shape
    N = L // n_antennas
    fh, c = _constraint_data(np.asarray(beta, dtype=float), r_hat, caps, p_max, n_antennas, rows)
    u, rho, p_hat = (np.asarray(a, dtype=float) for a in (u, rho, p_hat))
    mu = np.asarray(mu, dtype=complex)
    scale = u * rho * np.abs(mu) ** 2 / p_hat
    base = np.ascontiguousarray(scale[:, None, None] * np.asarray(scov, dtype=complex)[None])
    b = np.ascontiguousarray((u * rho * mu)[:, None] * g)
    if prox > 0:
        w_prev = np.zeros((rows, L), complex) if w_prev is None else w_prev
        add_prox(base, b, np.ascontiguousarray(w_prev, dtype=complex), float(prox))
    z = np.zeros(N + rows) if z0 is None else np.asarray(z0, dtype=float)
    w, z, converged, iters = qcqp_newton(base, b, fh, n_antennas, c, z, tol, max_iter)
    # the power balls hold exactly; leftover fronthaul excess is O(tol)
    worst = float(restore_feasibility(fh, n_antennas, c, w))
    return QcqpResult(w, z[N:], z[:N], bool(converged), worst, int(iters))


def matched_filter_init(g, p_max):
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    return np.sqrt(p_max / 2.0) * g / np.where(norms > 0, norms, 1.0)


def wmmse_iterate(pairs, ch, powers, limits, weights, r_hat=None, tau=TAU, tol=1e-5,
                  max_sweeps=100, max_rounds=4, w0=None, qcqp_tol=1e-9, qcqp_max_iter=500,
                  beta=None, noise=None):
    """Run reweighted WMMSE for the C-RAN-mode ``pairs``.

    ``weights`` are the positive rate weights ``Q_k + V`` of all K pairs;
    ``powers`` are current transmit powers of all K pairs (the C-RAN entries
    act as ``p_hat``).  ``r_hat`` defaults to the rates of the initial
    beamformers.  Each reweighting round refreshes the coefficients from the
    current beamformers and then sweeps until the objective settles;
    ``max_sweeps`` bounds the sweeps over all rounds.  A given ``beta``
    (N, |pairs|) is used as is for a single round.  ``noise`` is the MSE
    noise term and defaults to ``sigma^2 * limits.p_max``.
    """
    pairs = np.asarray(pairs, dtype=int)
    if pairs.size == 0:
        raise ValueError("empty C-RAN set")
    u_all = np.asarray(getattr(weights, "rate_weights", weights), dtype=float)
    u = u_all[pairs]
    if np.any(u <= 0):
        raise ValueError("rate weights must be positive")
    g = np.ascontiguousarray(ch.g_cran[pairs])
    M = ch.n_antennas
    N = g.shape[1] // M
    p_hat = _p_hat(powers, pairs)
    p_eff = np.array(powers, dtype=float)
    p_eff[pairs] = p_hat
    scov = np.ascontiguousarray(signal_covariance(ch, p_eff))
    w = matched_filter_init(g, limits.p_max) if w0 is None else np.array(w0, dtype=complex)
    dead = ~np.any(w, axis=1)
    if np.any(dead):
        w[dead] = matched_filter_init(g[dead], limits.p_max)
    if r_hat is None:
        full = np.zeros((ch.n_pairs, g.shape[1]), dtype=complex)
        full[pairs] = w
        r_hat = cran_rates_all(full, p_eff, ch)[pairs]
    r_hat = np.asarray(r_hat, dtype=float)

    trace = []
    sweeps = 0
    qcqp_ok = True
    converged = False
    rho = np.ones(pairs.size)
    noise = ch.noise_power * limits.p_max if noise is None else float(noise)
    quad, cross = mse_terms(np.ascontiguousarray(w), scov, g, p_hat, noise)
    mu = cross / quad
    fixed = beta is not None
    if fixed:
        beta = np.asarray(beta, dtype=float)
        max_rounds = 1
    else:
        beta = update_fronthaul_weights(w, M, tau)
    z = np.zeros(N + pairs.size)
    prev_active = None
    for _ in range(max_rounds):
        if sweeps >= max_sweeps:
            break
        if not fixed:
            beta = update_fronthaul_weights(w, M, tau)
        fh, c = _constraint_data(beta, r_hat, limits.fronthaul, limits.p_max, M, pairs.size)
        budget = max_sweeps - sweeps
        w, mu, rho, z, tr, used, ok, _ = wmmse_round(
            scov, g, u, p_hat, noise, fh, M, c, np.ascontiguousarray(w), z, tol,
            budget, qcqp_tol, qcqp_max_iter, PROX)
        sweeps += used
        qcqp_ok &= bool(ok)
        trace.append(tr.tolist())
        settled = used < budget
        active = block_energy(w, M) > limits.eps_active * np.sum(np.abs(w) ** 2, axis=1)
        if fixed or np.all(z[:N] == 0) or (prev_active is not None and np.array_equal(active, prev_active)):
            converged = settled
            break
        prev_active = active
    return WmmseResult(pairs, w, rho, mu, beta, trace, sweeps, converged and qcqp_ok)
