"""Simulation configuration and its flat ``key = value`` file format."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .net_model import dbm_to_mw, noise_power_mw
from .rates import Limits

ALGORITHMS = ("jmsra", "cran_mode", "d2d_mode")
ALGORITHM_ALIASES = {"jmsra": "jmsra", "cran": "cran_mode", "cran_mode": "cran_mode",
                     "d2d": "d2d_mode", "d2d_mode": "d2d_mode"}
# file keys that differ from attribute names (``lambda`` is reserved in Python)
KEY_ALIASES = {"lambda": "lam"}


class ConfigError(ValueError):
    """Invalid configuration value or file."""


@dataclass(frozen=True)
class SimConfig:
    n_rrh: int = 3
    n_pairs: int = 6
    n_antennas: int = 2
    area_side: float = 0.5  # km
    max_pair_dist: float = 0.05  # km
    bandwidth: float = 10e6  # Hz
    p_max_dbm: float = 23.0
    p_i_dmax_dbm: float = 29.0
    fronthaul_cap: float = 10.0  # bit/s/Hz per RRH
    v_param: float = 10.0
    lam: float = 1.0  # bit/slot/Hz
    slots: int = 5000
    seed: int = 0
    algorithm: str = "jmsra"
    outer_tol: float = 1e-3
    outer_max_iter: int = 50
    tau: float = 1e-10
    eps_active: float = 1e-8
    wmmse_tol: float = 1e-5
    wmmse_max_sweeps: int = 100
    strict: bool = False
    check_lemma: bool = True

    def __post_init__(self):
        for name in ("n_rrh", "n_pairs", "n_antennas", "slots", "outer_max_iter", "wmmse_max_sweeps"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {v!r}")
        for name in ("area_side", "bandwidth", "outer_tol", "tau", "eps_active", "wmmse_tol"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a finite positive number, got {v!r}")
        for name in ("max_pair_dist", "fronthaul_cap", "v_param", "lam"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be a finite non-negative number, got {v!r}")
        for name in ("p_max_dbm", "p_i_dmax_dbm"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.fronthaul_cap <= 0:
            raise ConfigError("fronthaul_cap must be > 0")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.max_pair_dist > self.area_side * math.sqrt(2):
            raise ConfigError("max_pair_dist exceeds the deployment area")

    @property
    def p_max(self):
        return float(dbm_to_mw(self.p_max_dbm))

    @property
    def p_d_max(self):
        return float(dbm_to_mw(self.p_i_dmax_dbm))

    @property
    def noise_power(self):
        return noise_power_mw(self.bandwidth)

    def limits(self):
        return Limits(self.p_max, self.p_d_max, np.full(self.n_rrh, float(self.fronthaul_cap)),
                      self.eps_active)

    def with_(self, **kw):
        if "algorithm" in kw:
            kw["algorithm"] = normalize_algorithm(kw["algorithm"])
        try:
            return replace(self, **kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self):
        return asdict(self)


def normalize_algorithm(name):
    try:
        return ALGORITHM_ALIASES[str(name).strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown algorithm {name!r}") from None


_FIELD_TYPES = {f.name: f.type for f in fields(SimConfig)}


def _coerce(name, raw):
    typ = _FIELD_TYPES[name]
    s = raw.strip()
    try:
        if typ == "int":
            f = float(s)
            if not f.is_integer():
                raise ValueError
            return int(f)
        if typ == "float":
            return float(s)
        if typ == "bool":
            low = s.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if name == "algorithm":
            return normalize_algorithm(s)
        return s
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config_text(text, base=None):
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (p.strip() for p in line.split("=", 1))
        name = KEY_ALIASES.get(key, key)
        if name not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if name in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[name] = _coerce(name, raw)
    base = base or SimConfig()
    return base.with_(**values)


def load_config(path, base=None):
    """Read a config file; I/O problems raise ``OSError``."""
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)


def dump_config(cfg):
    lines = []
    for k, v in cfg.to_dict().items():
        key = {v_: k_ for k_, v_ in KEY_ALIASES.items()}.get(k, k)
        lines.append(f"{key} = {str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(lines) + "\n"
