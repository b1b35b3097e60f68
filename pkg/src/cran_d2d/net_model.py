"""Network geometry and per-slot channel realizations.

Powers are linear milliwatts and channel gains are linear amplitudes
throughout; dB/dBm only appear at the configuration boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_count, check_positive

# Distances are clamped to this floor (km) before evaluating pathloss so that
# co-located terminals stay finite.
MIN_DISTANCE_KM = 1e-3

NOISE_DENSITY_DBM_HZ = -174.0


def dbm_to_mw(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    return 10.0 * np.log10(np.asarray(mw, dtype=float))


def noise_power_mw(bandwidth_hz, density_dbm_hz=NOISE_DENSITY_DBM_HZ):
    """Thermal noise power over ``bandwidth_hz`` (mW)."""
    check_positive(bandwidth_hz, "bandwidth")
    return float(10.0 ** (density_dbm_hz / 10.0) * bandwidth_hz)


@dataclass(frozen=True)
class NetworkTopology:
    n_rrh: int
    n_pairs: int
    n_antennas: int
    rrh_pos: np.ndarray  # (N, 2) km
    tx_pos: np.ndarray  # (K, 2) km
    rx_pos: np.ndarray  # (K, 2) km
    area_side: float
    max_pair_dist: float

    def __post_init__(self):
        if self.rrh_pos.shape != (self.n_rrh, 2):
            raise ValueError("rrh_pos must have shape (n_rrh, 2)")
        if self.tx_pos.shape != (self.n_pairs, 2) or self.rx_pos.shape != (self.n_pairs, 2):
            raise ValueError("tx_pos and rx_pos must have shape (n_pairs, 2)")
        for pts in (self.rrh_pos, self.tx_pos, self.rx_pos):
            if np.any(pts < 0) or np.any(pts > self.area_side):
                raise ValueError("positions must lie inside [0, area_side]^2")
        if np.any(self.pair_distances() > self.max_pair_dist + 1e-12):
            raise ValueError("a D2D pair exceeds max_pair_dist")

    @property
    def dim(self):
        """Length of a network-wide beamformer, N*M."""
        return self.n_rrh * self.n_antennas

    def pair_distances(self):
        return np.linalg.norm(self.tx_pos - self.rx_pos, axis=1)

    def block(self, n):
        """Index slice of RRH ``n`` inside a stacked N*M vector."""
        return slice(n * self.n_antennas, (n + 1) * self.n_antennas)


@dataclass(frozen=True)
class ChannelRealization:
    g_cran: np.ndarray  # (K, N*M) complex, row k = uplink CSI of Tx k
    g_d2d: np.ndarray  # (K, K) complex, [j, i] = Tx j -> Rx i
    noise_power: float
    n_antennas: int

    def __post_init__(self):
        K = self.g_d2d.shape[0]
        if self.g_d2d.shape != (K, K) or self.g_cran.shape[0] != K:
            raise ValueError("inconsistent channel shapes")
        if self.g_cran.shape[1] % self.n_antennas:
            raise ValueError("g_cran width must be a multiple of n_antennas")
        if not (np.all(np.isfinite(self.g_cran)) and np.all(np.isfinite(self.g_d2d))):
            raise ValueError("channel gains must be finite")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be > 0")

    @property
    def n_pairs(self):
        return self.g_d2d.shape[0]

    @property
    def n_rrh(self):
        return self.g_cran.shape[1] // self.n_antennas

    def cran_block(self, k, n):
        """Channel of Tx ``k`` seen by the antennas of RRH ``n``."""
        M = self.n_antennas
        return self.g_cran[k, n * M:(n + 1) * M]


def pathloss_cran_db(d):
    """Tx UE to RRH pathloss in dB for distance ``d`` in km."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = 128.1 + 37.6 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def pathloss_d2d_db(d):
    """UE to UE pathloss in dB for distance ``d`` in km."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = 148.0 + 40.0 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def _uniform_in_disc(rng, center, radius):
    r = radius * np.sqrt(rng.uniform())
    theta = rng.uniform(0.0, 2.0 * np.pi)
    return center + r * np.array([np.cos(theta), np.sin(theta)])


def place_random(cfg, rng):
    """Drop RRHs and D2D pairs uniformly in the square deployment area.

    Each Rx is uniform in the disc of radius ``cfg.max_pair_dist`` around its
    Tx. Points falling outside the square are redrawn, which keeps the pair
    distance bound intact (clipping the coordinates would as well).
    """
    N = check_count(cfg.n_rrh, "n_rrh")
    K = check_count(cfg.n_pairs, "n_pairs")
    M = check_count(cfg.n_antennas, "n_antennas")
    side = check_positive(cfg.area_side, "area_side")
    dmax = check_positive(cfg.max_pair_dist, "max_pair_dist", strict=False)

    rrh = rng.uniform(0.0, side, size=(N, 2))
    tx = rng.uniform(0.0, side, size=(K, 2))
    rx = np.empty_like(tx)
    for k in range(K):
        for _ in range(1000):
            cand = _uniform_in_disc(rng, tx[k], dmax)
            if np.all(cand >= 0) and np.all(cand <= side):
                break
        else:
            cand = np.clip(cand, 0.0, side)
        rx[k] = cand
    return NetworkTopology(N, K, M, rrh, tx, rx, side, dmax)


def large_scale_gains(topo):
    """Linear power gains: (K, N) Tx->RRH and (K, K) Tx j -> Rx i."""
    d_cran = np.linalg.norm(topo.tx_pos[:, None, :] - topo.rrh_pos[None, :, :], axis=2)
    d_d2d = np.linalg.norm(topo.tx_pos[:, None, :] - topo.rx_pos[None, :, :], axis=2)
    d_cran = np.maximum(d_cran, MIN_DISTANCE_KM)
    d_d2d = np.maximum(d_d2d, MIN_DISTANCE_KM)
    pl_c = 10.0 ** (-pathloss_cran_db(d_cran) / 10.0)
    pl_d = 10.0 ** (-pathloss_d2d_db(d_d2d) / 10.0)
    return pl_c, pl_d


def _cn(rng, shape):
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def draw_channels(topo, rng, noise_power=None, gains=None):
    """Draw one slot of Rayleigh fast fading on top of the pathloss.

    ``gains`` may carry precomputed :func:`large_scale_gains` output since the
    geometry is fixed for a whole run.
    """
    if noise_power is None:
        noise_power = noise_power_mw(10e6)
    pl_c, pl_d = gains if gains is not None else large_scale_gains(topo)
    K, N, M = topo.n_pairs, topo.n_rrh, topo.n_antennas
    amp_c = np.repeat(np.sqrt(pl_c), M, axis=1)  # (K, N*M)
    g_cran = _cn(rng, (K, N * M)) * amp_c
    g_d2d = _cn(rng, (K, K)) * np.sqrt(pl_d)
    return ChannelRealization(g_cran, g_d2d, float(noise_power), M)
