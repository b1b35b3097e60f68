"""Compiled inner loops of the beamforming solver.

Everything here works on small dense complex matrices (N*M of order 10),
where per-call interpreter overhead would otherwise dominate.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _ball_multiplier(d, c2, p_max):
    """Smallest lam >= 0 with sum c2 / (d + lam)^2 <= p_max (secular equation).

    ``d`` are the eigenvalues of a PSD matrix; directions with ``d + lam``
    numerically zero and no weight in ``c2`` are ignored (pseudo-inverse).
    The equation is solved for weights normalised to unit sum.
    """
    n = d.shape[0]
    total = 0.0
    dmax = 0.0
    for i in range(n):
        total += c2[i]
        dmax = max(dmax, d[i])
    if total <= 1e-150 * p_max:
        # the linear term is numerically zero, so is the minimiser; the
        # bound also keeps q^1.5 below overflow in the iteration
        return 0.0
    q = p_max / total
    floor = 1e-14 * max(dmax, 1e-300)
    norm0 = 0.0
    for i in range(n):
        ci = c2[i] / total
        if d[i] > floor:
            a = np.sqrt(ci) / d[i]
            norm0 += a * a
        elif ci > 1e-28:
            norm0 = np.inf
            break
    if norm0 <= q:
        return 0.0
    lo = 0.0
    for i in range(n):
        lo = max(lo, np.sqrt(c2[i] / total / q) - max(d[i], 0.0))
    hi = 1.0 / np.sqrt(q)
    lam = max(lo, 0.5 * (lo + hi))
    for _ in range(200):
        nrm = 0.0
        dn = 0.0
        for i in range(n):
            t = max(d[i], 0.0) + lam
            if t > 0.0:
                a = np.sqrt(c2[i] / total) / t
                nrm += a * a
                dn -= 2.0 * a * a / t
        if nrm > q:
            lo = lam
        else:
            hi = lam
        if hi - lo <= 1e-15 * hi:
            break
        # Newton on q^(-1/2) - ||w(lam)||^(-1), which is nearly linear in lam
        step = 0.5 * (lo + hi)
        if nrm > 0.0:
            r = np.sqrt(nrm)
            fp = -0.5 * dn / (r * r * r)
            if fp > 0.0 and np.isfinite(fp):
                step = lam - (1.0 / np.sqrt(q) - 1.0 / r) / fp
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)
        lam = step
    return hi


MASK_SHARE = 1e-9  # blocks whose fronthaul budget admits less energy are fixed at zero


@njit(cache=True)
def _free_entries(fh, n_ant, caps, p_max, idx, cnt):
    """Entries of each row that are not fixed at zero.

    A block n of row k whose constraint admits at most
    ``caps[n] / fh[n, k] <= MASK_SHARE * p_max[k]`` energy is dropped; this
    keeps reweighting coefficients near ``1 / tau`` out of the linear
    algebra.
    """
    R, L = idx.shape
    for k in range(R):
        m = 0
        for i in range(L):
            n = i // n_ant
            if fh[n, k] * MASK_SHARE * p_max[k] < caps[n]:
                idx[k, m] = i
                m += 1
        cnt[k] = m


@njit(cache=True)
def _primal(base, b, fh, n_ant, nu, p_max, idx, cnt, w, lam, U, d, h):
    """Per-row minimisers over the power balls for fronthaul multipliers ``nu``.

    Fills ``w``, the ball multipliers ``lam``, the eigen-decompositions of
    each regularised quadratic form restricted to the free entries, and the
    fronthaul constraint values.  Returns the dual function value without
    the ``- nu . C`` term.
    """
    R, L = b.shape
    N = fh.shape[0]
    for n in range(N):
        h[n] = 0.0
    val = 0.0
    for k in range(R):
        m = cnt[k]
        for i in range(L):
            w[k, i] = 0.0
        lam[k] = 0.0
        if m == 0:
            continue
        A = np.empty((m, m), dtype=np.complex128)
        bk = np.empty(m, dtype=np.complex128)
        for i in range(m):
            bk[i] = b[k, idx[k, i]]
            for j in range(m):
                A[i, j] = base[k, idx[k, i], idx[k, j]]
            n = idx[k, i] // n_ant
            A[i, i] += nu[n] * fh[n, k]
        dk, Uk = np.linalg.eigh(A)
        y = np.empty(m, dtype=np.complex128)
        c2 = np.empty(m)
        for i in range(m):
            d[k, i] = dk[i]
            for j in range(m):
                U[k, i, j] = Uk[i, j]
            t = 0.0 + 0.0j
            for j in range(m):
                t += np.conj(Uk[j, i]) * bk[j]
            y[i] = t
            c2[i] = t.real ** 2 + t.imag ** 2
        lk = _ball_multiplier(dk, c2, p_max[k])
        lam[k] = lk
        floor = 1e-14 * max(dk[m - 1], 1e-300)
        for i in range(m):
            den = max(dk[i], 0.0) + lk
            x = y[i] / den if den > floor else 0.0
            # min of x^H D x - 2 Re y^H x, one eigen-direction at a time
            val += max(dk[i], 0.0) * (x.real ** 2 + x.imag ** 2) - 2.0 * (np.conj(y[i]) * x).real
            y[i] = x
        for i in range(m):
            t = 0.0 + 0.0j
            for j in range(m):
                t += Uk[i, j] * y[j]
            w[k, idx[k, i]] = t
            n = idx[k, i] // n_ant
            h[n] += fh[n, k] * (t.real ** 2 + t.imag ** 2)
    return val


@njit(cache=True)
def _apply_inv(Uk, dk, m, lam, x, out):
    """``(A + lam I)^+ x`` from the eigen-decomposition of ``A`` (size m)."""
    floor = 1e-14 * max(dk[m - 1], 1e-300)
    tmp = np.empty(m, dtype=np.complex128)
    for i in range(m):
        t = 0.0 + 0.0j
        for j in range(m):
            t += np.conj(Uk[j, i]) * x[j]
        den = max(dk[i], 0.0) + lam
        tmp[i] = t / den if den > floor else 0.0
    for i in range(m):
        t = 0.0 + 0.0j
        for j in range(m):
            t += Uk[i, j] * tmp[j]
        out[i] = t


@njit(cache=True)
def _hessian(fh, n_ant, idx, cnt, w, lam, U, d, H):
    """Jacobian of the fronthaul constraint values with respect to ``nu``."""
    R, L = w.shape
    N = fh.shape[0]
    for i in range(N):
        for j in range(N):
            H[i, j] = 0.0
    for k in range(R):
        m = cnt[k]
        if m == 0:
            continue
        wk = np.empty(m, dtype=np.complex128)
        for i in range(m):
            wk[i] = w[k, idx[k, i]]
        V = np.zeros((N, m), dtype=np.complex128)
        Aw = np.zeros((N, m), dtype=np.complex128)
        q = np.zeros(m, dtype=np.complex128)
        for i in range(m):
            n = idx[k, i] // n_ant
            V[n, i] = fh[n, k] * wk[i]
        for n in range(N):
            _apply_inv(U[k], d[k], m, lam[k], V[n], Aw[n])
        active = lam[k] > 0.0
        s = 0.0
        if active:
            _apply_inv(U[k], d[k], m, lam[k], wk, q)
            for i in range(m):
                s += (np.conj(wk[i]) * q[i]).real
            active = s > 0.0
        for n in range(N):
            dl = 0.0
            if active:
                t = 0.0
                for i in range(m):
                    t += (np.conj(wk[i]) * Aw[n, i]).real
                dl = -t / s
            for mm in range(N):
                acc = 0.0
                for i in range(m):
                    dw = -(Aw[n, i] + dl * q[i])
                    acc += (np.conj(V[mm, i]) * dw).real
                H[mm, n] += 2.0 * acc


@njit(cache=True)
def _fh_kkt_ok(nu, g, caps, tol):
    for j in range(nu.shape[0]):
        if nu[j] > 0.0:
            if abs(g[j]) > tol * caps[j]:
                return False
        elif g[j] > tol * caps[j]:
            return False
    return True


@njit(cache=True)
def _trial(base, b, fh, n_ant, p_max, caps, idx, cnt, nu, d_nu, free, t, nut, w, lam, U, d, h):
    """Dual value and slope along the projected path at step ``t``."""
    N = nu.shape[0]
    for j in range(N):
        nut[j] = max(nu[j] + t * d_nu[j], 0.0) if free[j] else nu[j]
    val = _primal(base, b, fh, n_ant, nut, p_max, idx, cnt, w, lam, U, d, h)
    slope = 0.0
    for j in range(N):
        val -= nut[j] * caps[j]
        slope += (h[j] - caps[j]) * (nut[j] - nu[j])
    return val, slope


@njit(cache=True)
def qcqp_newton(base, b, fh, n_ant, c, z0, tol, max_iter):
    """Beamformer QCQP through its partial dual.

    Every power ball is handled exactly per pair (a trust-region
    subproblem); the N fronthaul multipliers maximise the concave dual by
    projected Newton steps.  Steps are accepted on the sign of the slope
    at the trial point, which stays accurate where the dual value itself
    suffers from cancellation, or on a strict rise of the value.  ``c``
    stacks the N fronthaul capacities then the per-row power limits, and
    ``z`` the matching multipliers.  Returns ``(w, z, converged, iterations)``.
    """
    R, L = b.shape
    N = fh.shape[0]
    caps = c[:N].copy()
    p_max = c[N:].copy()
    nu = z0[:N].copy()
    for j in range(N):
        nu[j] = max(nu[j], 0.0)
    w = np.zeros((R, L), dtype=np.complex128)
    lam = np.zeros(R)
    U = np.zeros((R, L, L), dtype=np.complex128)
    d = np.zeros((R, L))
    h = np.zeros(N)
    idx = np.zeros((R, L), dtype=np.int64)
    cnt = np.zeros(R, dtype=np.int64)
    _free_entries(fh, n_ant, caps, p_max, idx, cnt)
    val = _primal(base, b, fh, n_ant, nu, p_max, idx, cnt, w, lam, U, d, h)
    for j in range(N):
        val -= nu[j] * caps[j]
    g = h - caps
    H = np.zeros((N, N))
    # two scratch sets: the best trial so far and the current one
    wa, wb = np.empty_like(w), np.empty_like(w)
    la, lb = np.empty(R), np.empty(R)
    Ua, Ub = np.empty_like(U), np.empty_like(U)
    da, db = np.empty_like(d), np.empty_like(d)
    ha, hb = np.empty(N), np.empty(N)
    na, nb = np.empty(N), np.empty(N)
    d_nu = np.zeros(N)
    converged = False
    it = 0
    for it in range(max_iter):
        if _fh_kkt_ok(nu, g, caps, tol):
            converged = True
            break
        _hessian(fh, n_ant, idx, cnt, w, lam, U, d, H)
        free = np.zeros(N, dtype=np.bool_)
        nf = 0
        for j in range(N):
            if nu[j] > 0.0 or g[j] > 0.0:
                free[j] = True
                nf += 1
        fi = np.empty(nf, dtype=np.int64)
        q = 0
        for j in range(N):
            if free[j]:
                fi[q] = j
                q += 1
        Hf = np.empty((nf, nf))
        gf = np.empty(nf)
        dmax = 0.0
        for i in range(nf):
            gf[i] = g[fi[i]]
            for m in range(nf):
                Hf[i, m] = H[fi[i], fi[m]]
            dmax = max(dmax, abs(Hf[i, i]))
        for i in range(nf):
            Hf[i, i] -= 1e-12 * max(dmax, 1e-300)
        # Newton on h^(-1/2) - C^(-1/2) instead of h - C: exact while the
        # loads decay like 1 / (d + nu)^2, identical to first order near h = C
        rhs = np.empty(nf)
        for i in range(nf):
            hj = h[fi[i]]
            cj = caps[fi[i]]
            rhs[i] = -2.0 * hj * (np.sqrt(hj / cj) - 1.0) if hj > 0.0 else -gf[i]
        sd = np.linalg.solve(Hf, rhs)
        slope0 = 0.0
        finite = True
        for i in range(nf):
            finite = finite and np.isfinite(sd[i])
            slope0 += gf[i] * sd[i]
        if not finite or not slope0 > 0.0:
            sd = np.linalg.solve(Hf, -gf)
            slope0 = 0.0
            finite = True
            for i in range(nf):
                finite = finite and np.isfinite(sd[i])
                slope0 += gf[i] * sd[i]
        if not finite or dmax == 0.0 or not slope0 > 0.0:
            # ascent is required; fall back to a scaled gradient step
            for i in range(nf):
                sd[i] = gf[i] / max(dmax, 1e-300)
        for j in range(N):
            d_nu[j] = 0.0
        for i in range(nf):
            d_nu[fi[i]] = sd[i]
        # the slope along a step is reliable where the dual value suffers
        # cancellation, and by concavity a non-negative slope at the trial
        # point means the step went uphill
        t = 1.0
        va, sa = _trial(base, b, fh, n_ant, p_max, caps, idx, cnt, nu, d_nu, free, t, na, wa, la, Ua, da, ha)
        if sa >= 0.0:
            # far from the optimum the constraint values decay like
            # 1 / (d + nu)^2 and full Newton steps undershoot, so expand
            for _ in range(60):
                if sa <= 0.0:
                    break
                t *= 2.0
                vb, sb = _trial(base, b, fh, n_ant, p_max, caps, idx, cnt, nu, d_nu, free, t, nb, wb, lb, Ub, db, hb)
                if sb < 0.0 and not vb > va:
                    break
                va, sa = vb, sb
                na[:] = nb
                wa[:] = wb
                la[:] = lb
                Ua[:] = Ub
                da[:] = db
                ha[:] = hb
        elif not va > val:
            # overshoot: bisect on the sign of the slope, keep the uphill end
            lo, hi = 0.0, 1.0
            found = False
            for _ in range(45):
                mid = 0.5 * (lo + hi)
                vb, sb = _trial(base, b, fh, n_ant, p_max, caps, idx, cnt, nu, d_nu, free, mid, nb, wb, lb, Ub, db, hb)
                if sb >= 0.0 or vb > val:
                    lo = mid
                    found = True
                    va, sa = vb, sb
                    na[:] = nb
                    wa[:] = wb
                    la[:] = lb
                    Ua[:] = Ub
                    da[:] = db
                    ha[:] = hb
                    if hi - lo <= 0.25 * hi:
                        break
                else:
                    hi = mid
            if not found:
                break
        nu[:] = na
        w[:] = wa
        lam[:] = la
        U[:] = Ua
        d[:] = da
        h[:] = ha
        val = va
        for j in range(N):
            g[j] = h[j] - caps[j]
    if not converged:
        converged = _fh_kkt_ok(nu, g, caps, tol)
    z = np.empty(N + R)
    z[:N] = nu
    z[N:] = lam
    return w, z, converged, it


@njit(cache=True)
def restore_feasibility(fh, n_ant, c, w):
    """Scale overloaded RRH blocks, then over-norm rows, onto the feasible set.

    Returns the largest relative violation found before the repair.
    """
    R, L = w.shape
    N = fh.shape[0]
    h = constraint_values(fh, n_ant, w)
    worst = 0.0
    for n in range(N):
        viol = (h[n] - c[n]) / c[n]
        if viol > 0.0:
            worst = max(worst, viol)
            f = np.sqrt(c[n] / h[n])
            for k in range(R):
                for i in range(n * n_ant, (n + 1) * n_ant):
                    w[k, i] *= f
    for k in range(R):
        e = 0.0
        for i in range(L):
            e += w[k, i].real ** 2 + w[k, i].imag ** 2
        viol = (e - c[N + k]) / c[N + k]
        if viol > 0.0:
            worst = max(worst, viol)
            f = np.sqrt(c[N + k] / e)
            for i in range(L):
                w[k, i] *= f
    return worst


@njit(cache=True)
def constraint_values(fh, n_ant, w):
    R, L = w.shape
    N = fh.shape[0]
    h = np.zeros(N + R)
    for k in range(R):
        for i in range(L):
            e = w[k, i].real ** 2 + w[k, i].imag ** 2
            n = i // n_ant
            h[n] += fh[n, k] * e
            h[N + k] += e
    return h


@njit(cache=True)
def mse_terms(w, scov, g, p_hat, noise):
    """Per-row ``((w^H S w + sigma^2) / p, g^H w)``."""
    R, L = w.shape
    quad = np.empty(R)
    cross = np.empty(R, dtype=np.complex128)
    for k in range(R):
        s = 0.0
        for i in range(L):
            t = 0.0 + 0.0j
            for m in range(L):
                t += scov[i, m] * w[k, m]
            s += (np.conj(w[k, i]) * t).real
        quad[k] = (s + noise) / p_hat[k]
        x = 0.0 + 0.0j
        for i in range(L):
            x += np.conj(g[k, i]) * w[k, i]
        cross[k] = x
    return quad, cross


@njit(cache=True)
def expand_to_boundary(fh, n_ant, c, w):
    """Scales every row towards its power sphere as far as fronthaul allows.

    Row k grows by ``sqrt(1 + a (t_k - 1))`` with ``t_k = P_k / ||w_k||^2``
    and the largest common ``a`` in [0, 1] keeping all fronthaul loads
    within capacity.  Each virtual SINR only depends on its own row and
    increases with its scale.
    """
    R, L = w.shape
    N = fh.shape[0]
    t = np.ones(R)
    for k in range(R):
        e = 0.0
        for i in range(L):
            e += w[k, i].real ** 2 + w[k, i].imag ** 2
        # rows switched off by the fronthaul prices stay off
        if e > 1e-24 * c[N + k]:
            t[k] = max(c[N + k] / e, 1.0)
    h = constraint_values(fh, n_ant, w)
    a = 1.0
    for n in range(N):
        grow = 0.0
        for k in range(R):
            e = 0.0
            for i in range(n * n_ant, (n + 1) * n_ant):
                e += w[k, i].real ** 2 + w[k, i].imag ** 2
            grow += fh[n, k] * e * (t[k] - 1.0)
        if grow > 0.0:
            a = min(a, max(c[n] - h[n], 0.0) / grow)
    # stay a hair inside the fronthaul caps
    a *= 1.0 - 1e-12
    if a <= 0.0:
        return
    for k in range(R):
        f = np.sqrt(1.0 + a * (t[k] - 1.0))
        for i in range(L):
            w[k, i] *= f


@njit(cache=True)
def add_prox(base, b, w_prev, prox):
    """Adds ``eps_k ||w_k - w_prev_k||^2`` with ``eps_k = prox * tr(base_k) / L``.

    The beamformer quadratic form has rank at most the number of C-RAN
    pairs, so without this term the minimiser is not unique and the dual
    is not differentiable.
    """
    R, L = b.shape
    for k in range(R):
        t = 0.0
        for i in range(L):
            t += base[k, i, i].real
        eps = prox * t / L
        for i in range(L):
            base[k, i, i] += eps
            b[k, i] += eps * w_prev[k, i]


@njit(cache=True)
def wmmse_round(scov, g, u, p_hat, noise, fh, n_ant, c, w0, z0, tol, max_sweeps, qtol, qmax,
                prox):
    """Sweeps {MSE weight, receiver, QCQP} with fixed reweighting coefficients.

    Each QCQP carries a proximal term around the current beamformers, so
    the objective cannot increase.  Stops when the objective changes by at
    most ``tol`` relative.  Returns
    ``(w, mu, rho, z, trace, sweeps, qcqp_ok, worst_violation)``.
    """
    R, L = w0.shape
    w = w0.copy()
    z = z0.copy()
    trace = np.empty(max_sweeps)
    mu = np.zeros(R, dtype=np.complex128)
    rho = np.ones(R)
    base = np.empty((R, L, L), dtype=np.complex128)
    b = np.empty((R, L), dtype=np.complex128)
    ok = True
    worst = 0.0
    s = 0
    for s in range(max_sweeps):
        quad, cross = mse_terms(w, scov, g, p_hat, noise)
        for k in range(R):
            # MMSE receiver, then the MSE weight at that receiver
            mu[k] = cross[k] / quad[k]
            e = 1.0 - abs(cross[k]) ** 2 / quad[k]
            rho[k] = 1.0 / max(e, 1e-300)
            sc = u[k] * rho[k] * abs(mu[k]) ** 2 / p_hat[k]
            for i in range(L):
                b[k, i] = u[k] * rho[k] * mu[k] * g[k, i]
                for j in range(L):
                    base[k, i, j] = sc * scov[i, j]
        add_prox(base, b, w, prox)
        w_new, z, conv, _ = qcqp_newton(base, b, fh, n_ant, c, z, qtol, qmax)
        ok = ok and conv
        worst = max(worst, restore_feasibility(fh, n_ant, c, w_new))
        N = fh.shape[0]
        for k in range(R):
            e = 0.0
            for i in range(L):
                e += w_new[k, i].real ** 2 + w_new[k, i].imag ** 2
            if e <= 1e-30 * c[N + k]:
                # a row priced out of every RRH stays off; exact zeros keep
                # the later sweeps away from subnormal arithmetic
                for i in range(L):
                    w_new[k, i] = 0.0
        w = w_new
        quad, cross = mse_terms(w, scov, g, p_hat, noise)
        obj = 0.0
        for k in range(R):
            e = (abs(mu[k]) ** 2) * quad[k] - 2.0 * (np.conj(mu[k]) * cross[k]).real + 1.0
            obj += u[k] * (rho[k] * e - np.log(rho[k]))
        trace[s] = obj
        expand_to_boundary(fh, n_ant, c, w)
        if s > 0 and abs(trace[s - 1] - obj) <= tol * max(1.0, abs(obj)):
            break
    return w, mu, rho, z, trace[:s + 1].copy(), s + 1, ok, worst


@njit(cache=True)
def _wsr(p, direct, cross, noise, u):
    n = p.shape[0]
    f = 0.0
    for k in range(n):
        interf = noise[k]
        for l in range(n):
            interf += cross[l, k] * p[l]
        f += u[k] * np.log2(1.0 + p[k] * direct[k] / interf)
    return f


@njit(cache=True)
def _price_interf(p, direct, cross, noise, u, price, interf):
    n = p.shape[0]
    marg = np.empty(n)
    for k in range(n):
        t = noise[k]
        for l in range(n):
            t += cross[l, k] * p[l]
        interf[k] = t
        s = p[k] * direct[k]
        marg[k] = u[k] * s / (t * (t + s))
    for l in range(n):
        acc = 0.0
        for k in range(n):
            acc += cross[l, k] * marg[k]
        price[l] = acc / np.log(2.0)


@njit(cache=True)
def _waterfill(delta, u, direct, interf, price, p_max, out):
    """Priced water-filling powers for multiplier ``delta``; returns their sum."""
    ln2 = np.log(2.0)
    total = 0.0
    for k in range(u.shape[0]):
        denom = ln2 * (delta + price[k])
        level = u[k] / denom if denom > 0 else np.inf
        v = min(max(level - interf[k] / direct[k], 0.0), p_max)
        out[k] = v
        total += v
    return total


@njit(cache=True)
def _budget_delta(u, direct, interf, price, p_max, budget, buf, tol=1e-12):
    """Smallest delta >= 0 whose water-filling powers fit ``budget``."""
    if _waterfill(0.0, u, direct, interf, price, p_max, buf) <= budget:
        return 0.0
    lo, hi = 0.0, 1.0
    while _waterfill(hi, u, direct, interf, price, p_max, buf) > budget:
        hi *= 2.0
        if hi > 1e30:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _waterfill(mid, u, direct, interf, price, p_max, buf) > budget:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(hi, 1e-300):
            break
    return hi


@njit(cache=True)
def power_ascent(p0, direct, cross, noise, u, p_max, budget, tol, max_iter):
    """Backtracking ascent towards the priced water-filling target.

    ``budget`` is ``inf`` when there is no sum-power constraint.  Returns
    ``(p, f, delta, iterations, converged, history)``.
    """
    n = p0.shape[0]
    p = p0.copy()
    f = _wsr(p, direct, cross, noise, u)
    history = np.empty(max_iter + 1)
    history[0] = f
    nh = 1
    price = np.empty(n)
    interf = np.empty(n)
    target = np.empty(n)
    cand = np.empty(n)
    delta = 0.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        _price_interf(p, direct, cross, noise, u, price, interf)
        delta = _budget_delta(u, direct, interf, price, p_max, budget, target)
        tot = _waterfill(delta, u, direct, interf, price, p_max, target)
        if tot > budget:
            for k in range(n):
                target[k] *= budget / tot
        dmax = 0.0
        for k in range(n):
            dmax = max(dmax, abs(target[k] - p[k]))
        if dmax < tol:
            converged = True
            break
        eta = 1.0
        while True:
            for k in range(n):
                cand[k] = p[k] + eta * (target[k] - p[k])
            fc = _wsr(cand, direct, cross, noise, u)
            if fc >= f - 1e-13 * max(1.0, abs(f)):
                break
            eta *= 0.5
            if eta < 1e-8:
                for k in range(n):
                    cand[k] = p[k]
                fc = f
                break
        step = 0.0
        for k in range(n):
            step = max(step, abs(cand[k] - p[k]))
            p[k] = cand[k]
        f = fc
        history[nh] = f
        nh += 1
        if step < tol:
            converged = True
            break
    return p, f, delta, it, converged, history[:nh].copy()
