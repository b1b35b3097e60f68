"""Per-slot controllers, Monte Carlo runs and parameter sweeps."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field

import numpy as np

from .beamforming import matched_filter_init, receive_covariance, wmmse_iterate
from .config import SimConfig
from .lyapunov import assert_lemma1, drift_weights
from .mode_selection import modified_bnb
from .net_model import draw_channels, large_scale_gains, place_random
from .power_control import solve_cran_power, solve_d2d_power
from .queues import ArrivalProcess, QueueState, draw_arrivals, update_queues
from .rates import (ResourceAllocation, active_links, cap_fronthaul_rates, cran_rates_all,
                    d2d_rates_all, pair_rates)

SLOT_COLUMNS = ("t", "algorithm", "seed", "sum_rate", "avg_queue", "modes_bitstring")
TAIL_COLUMNS = ("outer_iters", "lemma1_ok", "avg_throughput", "avg_delay_slots", "avg_fh_load")
SWEEP_COLUMNS = ("algorithm", "axis", "value", "seed", "avg_throughput", "avg_delay_slots",
                 "avg_fh_load", "median_outer_iters", "slots")
# RRH blocks carrying less than this share of a beamformer's energy are
# switched off after each reweighting round
PRUNE_SHARE = 1e-3
# outer iterations that refresh the fronthaul reweighting before it is frozen
REWEIGHT_ITERS = 3

SWEEP_AXES = {"v": "v_param", "v_param": "v_param", "lambda": "lam", "lam": "lam",
              "fronthaul": "fronthaul_cap", "fronthaul_cap": "fronthaul_cap",
              "distance": "max_pair_dist", "max_pair_dist": "max_pair_dist"}


class NonConvergenceError(RuntimeError):
    """A solver failed to converge while running in strict mode."""


@dataclass
class SlotMetrics:
    t: int
    per_pair_rate: np.ndarray
    per_pair_queue: np.ndarray
    modes: np.ndarray
    fronthaul_load: np.ndarray
    outer_iters: int
    objective_trace_len: int
    lemma1_ok: bool = True
    converged: bool = True
    flags: dict = field(default_factory=dict)


@dataclass
class SlotOutcome:
    alloc: ResourceAllocation
    rates: np.ndarray  # transmitted rates after the fronthaul cap
    loads: np.ndarray
    outer_iters: int
    trace_len: int
    converged: bool
    flags: dict
    objective_history: list


def _finish(alloc, ch, limits, u):
    """Rates actually carried, with every fronthaul link kept within its cap."""
    raw = pair_rates(alloc, ch)
    rates = cap_fronthaul_rates(raw, alloc, ch.n_antennas, limits.fronthaul, u, limits.eps_active)
    act = active_links(alloc.w, alloc.x, ch.n_antennas, limits.eps_active)
    return rates, act.astype(float) @ rates, raw


def _prune(w, n_antennas, eps, floor):
    """Zero blocks whose energy share is below ``eps`` and rows below ``floor``."""
    K, L = w.shape
    blocks = (np.abs(w) ** 2).reshape(K, L // n_antennas, n_antennas).sum(axis=2)
    total = blocks.sum(axis=1, keepdims=True)
    dead = (blocks <= eps * total) | (total <= floor)
    mask = np.repeat(~dead, n_antennas, axis=1)
    return w * mask


class _CranTracker:
    """Beamformers and reweighting data of every pair across outer iterations.

    For the first ``reweight_iters`` outer iterations each call refreshes the
    fronthaul reweighting coefficients and rate estimates, which is where
    the RRH clusters are chosen.  Afterwards both are frozen so the
    remaining iterations refine beamformers and powers on a fixed problem,
    and power control only ascends from the current powers.
    """

    def __init__(self, ch, limits, cfg):
        K, L = ch.g_cran.shape
        self.ch, self.limits, self.cfg = ch, limits, cfg
        self.w = matched_filter_init(ch.g_cran, limits.p_max)
        self.beta = np.zeros((cfg.n_rrh, K))
        self.r_hat = np.zeros(K)
        self.known = np.zeros(K, dtype=bool)
        self.calls = 0
        self.sweeps = 0

    @property
    def frozen(self):
        return self.calls >= REWEIGHT_ITERS

    def step(self, pairs, p, u, r_hat, flags):
        ch, limits, cfg = self.ch, self.limits, self.cfg
        # silent pairs neither carry signal nor interfere; they keep their
        # stored beamformers so power control can revive them
        on = p[pairs] > 0
        if not np.any(on):
            on[:] = True
        sub = pairs[on]
        r_hat = np.asarray(r_hat, dtype=float)[on]
        frozen = self.frozen and np.all(self.known[sub])
        beta = self.beta[:, sub] if frozen else None
        if frozen:
            r_hat = self.r_hat[sub]
        res = wmmse_iterate(sub, ch, p, limits, u, r_hat=r_hat, tau=cfg.tau, tol=cfg.wmmse_tol,
                            max_sweeps=cfg.wmmse_max_sweeps, max_rounds=1, w0=self.w[sub],
                            beta=beta)
        self.calls += 1
        self.sweeps += res.sweeps
        if not frozen:
            self.beta[:, sub] = res.beta
            self.r_hat[sub] = r_hat
            self.known[sub] = True
        flags["wmmse"] = flags.get("wmmse", True) and res.converged
        w = self.w[pairs].copy()
        w[on] = res.w
        w = _prune(w, ch.n_antennas, PRUNE_SHARE, 1e-12 * limits.p_max)
        starts = [p[pairs]] if frozen else None
        pc = solve_cran_power(pairs, w, u, ch, limits, powers=p, starts=starts)
        flags["cran_power"] = flags.get("cran_power", True) and pc.converged
        live = np.any(w, axis=1)
        self.w[pairs[live]] = w[live]
        return w, pc.scatter(p)


def _d2d_step(pairs, ch, p, limits, u, flags, warm=False):
    starts = [p[pairs]] if warm else None
    pd = solve_d2d_power(pairs, u, ch, limits, powers=p, starts=starts)
    flags["d2d_power"] = flags.get("d2d_power", True) and pd.converged
    return pd.scatter(p)


def _candidate_cran_rates(p, ch, limits):
    """C-RAN rate estimate of every pair at full power for mode selection.

    Uses the MMSE receiver against the interference of ``p`` and caps the
    result by the largest fronthaul capacity, since that rate has to cross
    at least one fronthaul link.
    """
    K = ch.n_pairs
    rc = np.zeros(K)
    for k in range(K):
        pe = np.array(p, dtype=float)
        pe[k] = limits.p_max
        cov = receive_covariance(ch, pe)
        v = np.linalg.solve(cov, ch.g_cran[k])
        s = limits.p_max * np.vdot(ch.g_cran[k], v).real
        rc[k] = np.log2(1.0 / max(1.0 - s, 1e-300))
    return np.minimum(rc, np.max(limits.fronthaul))


def _record(best, obj, alloc, rates, loads):
    if best is None or obj > best[0] + 1e-12 * max(1.0, abs(obj)):
        return (obj, alloc.copy(), rates, loads)
    return best


def _settled(x, prev_x, rates, prev_rates, tol):
    return np.array_equal(x, prev_x) and np.max(np.abs(rates - prev_rates)) <= tol


def run_slot_jmsra(topo, ch, q, cfg, limits=None):
    """Joint mode selection, beamforming and power control for one slot.

    Starts from the all-D2D power solution, then alternates mode selection
    with one WMMSE round plus power control per outer iteration until the
    modes repeat and no pair's rate moves by more than ``cfg.outer_tol``.
    Mode selection sees, for every pair, the rate it last achieved in each
    mode (an optimistic full-power estimate before it has tried C-RAN
    mode).  The best drift-plus-penalty iterate is returned.
    """
    limits = limits or cfg.limits()
    K = ch.n_pairs
    L = ch.g_cran.shape[1]
    weights = drift_weights(q, cfg.v_param)
    u = weights.rate_weights
    flags = {}

    x = np.ones(K, dtype=np.int64)
    p = _d2d_step(np.arange(K), ch, np.zeros(K), limits, u, flags)
    alloc = ResourceAllocation(x, np.zeros((K, L), complex), p)
    rates, loads, raw = _finish(alloc, ch, limits, u)
    best = _record(None, float(u @ rates), alloc, rates, loads)
    history = [best[0]]

    tracker = _CranTracker(ch, limits, cfg)
    rc = _candidate_cran_rates(p, ch, limits)
    rd, pd = rates.copy(), p.copy()
    prev_rates, prev_x = rates, x
    converged = False
    n = 0
    for n in range(1, cfg.outer_max_iter + 1):
        x = modified_bnb(weights, rc, rd, pd, limits).x
        cset, dset = np.flatnonzero(x == 0), np.flatnonzero(x == 1)
        p = p.copy()
        moved_c = prev_x[cset] == 1
        p[cset] = np.where(moved_c, limits.p_max, p[cset])
        p[dset] = np.where(prev_x[dset] == 0, pd[dset], p[dset])
        if dset.size and p[dset].sum() > limits.p_d_max:
            p[dset] *= limits.p_d_max / p[dset].sum()
        w_full = np.zeros((K, L), complex)
        if cset.size:
            r_hat = np.where(moved_c, rc[cset], raw[cset])
            w_full[cset], p = tracker.step(cset, p, u, r_hat, flags)
        if dset.size:
            warm = tracker.frozen and np.array_equal(x, prev_x)
            p = _d2d_step(dset, ch, p, limits, u, flags, warm)
        alloc = ResourceAllocation(x, w_full, np.clip(p, 0.0, limits.p_max))
        rates, loads, raw = _finish(alloc, ch, limits, u)
        obj = float(u @ rates)
        history.append(obj)
        best = _record(best, obj, alloc, rates, loads)
        rc[cset] = rates[cset]
        rd[dset], pd[dset] = rates[dset], alloc.p[dset]
        if _settled(x, prev_x, rates, prev_rates, cfg.outer_tol):
            converged = True
            break
        prev_rates, prev_x = rates, x
    _, alloc, rates, loads = best
    return SlotOutcome(alloc, rates, loads, n, tracker.sweeps, converged, flags, history)


def run_slot_cran_mode(topo, ch, q, cfg, limits=None):
    """Baseline with every pair forced into C-RAN mode."""
    limits = limits or cfg.limits()
    K = ch.n_pairs
    u = drift_weights(q, cfg.v_param).rate_weights
    x = np.zeros(K, dtype=np.int64)
    pairs = np.arange(K)
    p = np.full(K, limits.p_max)
    tracker = _CranTracker(ch, limits, cfg)
    r_hat = _candidate_cran_rates(p, ch, limits)
    prev = None
    best = None
    history = []
    flags = {}
    converged = False
    n = 0
    for n in range(1, cfg.outer_max_iter + 1):
        w, p = tracker.step(pairs, p, u, r_hat, flags)
        alloc = ResourceAllocation(x, w, p)
        rates, loads, r_hat = _finish(alloc, ch, limits, u)
        obj = float(u @ rates)
        history.append(obj)
        best = _record(best, obj, alloc, rates, loads)
        if prev is not None and _settled(x, x, rates, prev, cfg.outer_tol):
            converged = True
            break
        prev = rates
    _, alloc, rates, loads = best
    return SlotOutcome(alloc, rates, loads, n, tracker.sweeps, converged, flags, history)


def run_slot_d2d_mode(topo, ch, q, cfg, limits=None):
    """Baseline with every pair forced into D2D mode."""
    limits = limits or cfg.limits()
    K = ch.n_pairs
    u = drift_weights(q, cfg.v_param).rate_weights
    flags = {}
    p = _d2d_step(np.arange(K), ch, np.zeros(K), limits, u, flags)
    total = p.sum()
    if total > limits.p_d_max:
        p *= limits.p_d_max / total
    alloc = ResourceAllocation(np.ones(K, dtype=np.int64), np.zeros((K, ch.g_cran.shape[1]), complex), p)
    rates, loads, _ = _finish(alloc, ch, limits, u)
    return SlotOutcome(alloc, rates, loads, 1, 0, flags.get("d2d_power", True), flags,
                       [float(u @ rates)])


SLOT_RUNNERS = {"jmsra": run_slot_jmsra, "cran_mode": run_slot_cran_mode,
                "d2d_mode": run_slot_d2d_mode}


def run_slot(topo, ch, q, cfg, limits=None):
    return SLOT_RUNNERS[cfg.algorithm](topo, ch, q, cfg, limits)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if v == 0:
            return "0"
        return format(v, ".9g")
    return str(v)


@dataclass
class RunResult:
    cfg: SimConfig
    metrics: list
    avg_throughput: float
    avg_delay_slots: float
    avg_fh_load: float
    csv_text: str

    @property
    def outer_iters(self):
        return np.array([m.outer_iters for m in self.metrics])

    @property
    def rates(self):
        return np.stack([m.per_pair_rate for m in self.metrics])

    @property
    def queues(self):
        return np.stack([m.per_pair_queue for m in self.metrics])


def simulate(cfg, topo=None, progress=None):
    """Run ``cfg.slots`` slots; returns metrics and the CSV text."""
    rng_topo = np.random.default_rng([cfg.seed, 0])
    rng_ch = np.random.default_rng([cfg.seed, 1])
    rng_arr = np.random.default_rng([cfg.seed, 2])
    topo = topo or place_random(cfg, rng_topo)
    gains = large_scale_gains(topo)
    limits = cfg.limits()
    runner = SLOT_RUNNERS[cfg.algorithm]
    arrivals = ArrivalProcess(cfg.lam)
    q = QueueState.empty(cfg.n_pairs)
    metrics = []
    N = cfg.n_rrh
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    fh_cols = tuple(f"fh_load_{n + 1}" for n in range(N))
    writer.writerow(SLOT_COLUMNS + fh_cols + TAIL_COLUMNS)
    for t in range(1, cfg.slots + 1):
        ch = draw_channels(topo, rng_ch, cfg.noise_power, gains)
        a = draw_arrivals(arrivals, cfg.n_pairs, rng_arr)
        out = runner(topo, ch, q, cfg, limits)
        q_next = update_queues(q, out.rates, a)
        ok = True
        if cfg.check_lemma:
            ok = assert_lemma1(q, q_next, out.rates, a, cfg.v_param).holds
        bad = [k for k, v in out.flags.items() if not v and k != "wmmse"]
        if not out.converged:
            bad.append("outer")
        if cfg.strict and bad:
            raise NonConvergenceError(f"slot {t}: no convergence in {', '.join(sorted(bad))}")
        m = SlotMetrics(t, out.rates, q_next.q, out.alloc.x, out.loads, out.outer_iters,
                        out.trace_len, ok, out.converged, dict(out.flags))
        metrics.append(m)
        writer.writerow([t, cfg.algorithm, cfg.seed, _fmt(float(out.rates.sum())),
                         _fmt(float(q_next.q.mean())), "".join(str(int(v)) for v in out.alloc.x)]
                        + [_fmt(float(v)) for v in out.loads]
                        + [out.outer_iters, _fmt(ok), "", "", ""])
        q = q_next
        if progress is not None:
            progress(t)
    rates = np.stack([m.per_pair_rate for m in metrics])
    queues = np.stack([m.per_pair_queue for m in metrics])
    loads = np.stack([m.fronthaul_load for m in metrics])
    thr = float(rates.sum(axis=1).mean())
    delay = float(queues.mean() / cfg.lam) if cfg.lam > 0 else 0.0
    fh = float(loads.mean())
    writer.writerow([-1, cfg.algorithm, cfg.seed, "", "", ""] + [""] * N
                    + ["", "", _fmt(thr), _fmt(delay), _fmt(fh)])
    return RunResult(cfg, metrics, thr, delay, fh, buf.getvalue())


def write_text(path, text):
    """Atomic write; failures surface as ``OSError`` naming ``path``."""
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def run_experiment(cfg, out=None):
    """``simulate`` plus an optional CSV file at ``out``."""
    res = simulate(cfg)
    if out is not None:
        write_text(out, res.csv_text)
    return res


def _sweep_job(args):
    cfg, axis, value = args
    res = simulate(cfg)
    return (cfg.algorithm, axis, value, cfg.seed, res.avg_throughput, res.avg_delay_slots,
            res.avg_fh_load, float(np.median(res.outer_iters)), cfg.slots)


def sweep_jobs(cfg, axis, values, algorithms=None, seeds=None):
    name = SWEEP_AXES.get(axis)
    if name is None:
        raise ValueError(f"unknown sweep axis {axis!r}")
    algorithms = algorithms or (cfg.algorithm,)
    seeds = (cfg.seed,) if seeds is None else tuple(seeds)
    jobs = []
    for alg in algorithms:
        for v in values:
            for s in seeds:
                jobs.append((cfg.with_(**{name: float(v), "algorithm": alg, "seed": int(s)}), name, float(v)))
    return jobs


def sweep(cfg, axis, values, algorithms=None, seeds=None, out=None, workers=1):
    """Run every (algorithm, value, seed) and merge the summaries.

    Rows are sorted by the key, so the output does not depend on ``workers``.
    """
    jobs = sweep_jobs(cfg, axis, values, algorithms, seeds)
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for r in rows:
        writer.writerow([r[0], r[1], _fmt(r[2]), r[3]] + [_fmt(v) for v in r[4:8]] + [r[8]])
    text = buf.getvalue()
    if out is not None:
        write_text(out, text)
    return rows, text
