"""Scenario parameters, unit conversions and link budget.

All internal math is carried out in watts / linear gains; dB(m) appears only
at the config-file and reporting boundaries.
"""

import dataclasses
import json
import math
import os
from dataclasses import dataclass

from .exceptions import ConfigError

DBM_PER_WATT_OFFSET = 30.0

# Urban-macro style constants: L[dB] = 10*log10(d^n / G), d in meters.
DEFAULT_PATHLOSS_G = 0.029512
DEFAULT_PATHLOSS_N = 3.76


def dbm_to_watts(p_dbm):
    return 10.0 ** ((p_dbm - DBM_PER_WATT_OFFSET) / 10.0)


def watts_to_dbm(p_watts):
    if p_watts <= 0:
        raise ConfigError(f"power must be positive to express in dBm, got {p_watts}")
    return 10.0 * math.log10(p_watts) + DBM_PER_WATT_OFFSET


def noise_power_watts(density_dbm_hz, bandwidth_hz):
    """Total thermal noise power over a bandwidth, from a dBm/Hz density."""
    if bandwidth_hz <= 0:
        raise ConfigError(f"bandwidth_hz must be positive, got {bandwidth_hz}")
    return dbm_to_watts(density_dbm_hz) * bandwidth_hz


def path_loss_linear_gain(distance_m, G=DEFAULT_PATHLOSS_G, n=DEFAULT_PATHLOSS_N):
    """Linear power gain G / d^n (i.e. 10^(-L/10) for L = 10 log10(d^n/G))."""
    if distance_m <= 0:
        raise ConfigError(f"distance_m must be positive, got {distance_m}")
    if G <= 0 or n <= 0:
        raise ConfigError("path-loss constants must be positive")
    return G / distance_m**n


def path_loss_db(distance_m, G=DEFAULT_PATHLOSS_G, n=DEFAULT_PATHLOSS_N):
    return -10.0 * math.log10(path_loss_linear_gain(distance_m, G, n))


def regularization_from_table(K, M, rho_linear):
    """RZF regularization rule alpha = K / (10 * M * rho)."""
    if K <= 0 or M <= 0 or rho_linear <= 0:
        raise ConfigError("K, M and rho_linear must all be positive")
    return K / (10.0 * M * rho_linear)


@dataclass(frozen=True)
class SystemConfig:
    """All scenario scalars. Immutable after validation; share freely."""

    M: int
    K: int
    P_watts: float
    noise_density_dbm_hz: float = -174.0
    bandwidth_hz: float = 1e7
    tau_sr: float = 0.0
    tau_rd: float = 0.0
    d_sr_m: float = 2500.0
    d_rd_m: float = 1500.0
    pathloss_G: float = DEFAULT_PATHLOSS_G
    pathloss_n: float = DEFAULT_PATHLOSS_N
    # Explicit regularization overrides the Table-rule; with rho_linear=None
    # the rule uses the per-sweep-point transmit SNR P/N0.
    alpha1: float | None = None
    alpha2: float | None = None
    rho_linear: float | None = None
    correlation_mode: str = "identity"  # "identity" | "one_ring"
    spacing_wavelengths: float = 0.5
    angular_spread_rad: float = math.pi / 6
    trials: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.M < 1 or self.K < 1:
            raise ConfigError("M and K must be positive integers")
        if self.M < self.K:
            raise ConfigError(f"M >= K required, got M={self.M}, K={self.K}")
        if self.P_watts <= 0:
            raise ConfigError("P_watts must be positive")
        for name in ("tau_sr", "tau_rd"):
            t = getattr(self, name)
            if not 0.0 <= t <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {t}")
        for name in ("bandwidth_hz", "d_sr_m", "d_rd_m", "pathloss_G",
                     "pathloss_n", "spacing_wavelengths", "angular_spread_rad"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("alpha1", "alpha2", "rho_linear"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ConfigError(f"{name} must be positive when given")
        if self.correlation_mode not in ("identity", "one_ring"):
            raise ConfigError(
                f"correlation_mode must be 'identity' or 'one_ring', "
                f"got {self.correlation_mode!r}")
        if self.trials < 1:
            raise ConfigError("trials must be a positive integer")

    @property
    def noise_power_w(self):
        return noise_power_watts(self.noise_density_dbm_hz, self.bandwidth_hz)

    @property
    def link_gain_sr(self):
        return path_loss_linear_gain(self.d_sr_m, self.pathloss_G, self.pathloss_n)

    @property
    def link_gain_rd(self):
        return path_loss_linear_gain(self.d_rd_m, self.pathloss_G, self.pathloss_n)

    def alphas_at(self, p_watts=None):
        """Per-hop regularization (alpha1, alpha2) at a transmit power."""
        p = self.P_watts if p_watts is None else p_watts
        rho = self.rho_linear
        if rho is None:
            rho = p / self.noise_power_w
        default = regularization_from_table(self.K, self.M, rho)
        a1 = self.alpha1 if self.alpha1 is not None else default
        a2 = self.alpha2 if self.alpha2 is not None else default
        return a1, a2

    def with_power(self, p_watts):
        return dataclasses.replace(self, P_watts=p_watts)

    def fingerprint(self):
        """Stable short hash of the resolved configuration."""
        import hashlib

        payload = json.dumps(_to_schema_dict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


_SCHEMA_KEYS = {f.name for f in dataclasses.fields(SystemConfig)} - {"P_watts"}


def _to_schema_dict(cfg):
    d = dataclasses.asdict(cfg)
    d["p_dbm"] = watts_to_dbm(d.pop("P_watts"))
    return d


def config_from_dict(raw):
    """Build a validated SystemConfig from a plain dict (JSON schema)."""
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a JSON object")
    d = dict(raw)
    if "p_dbm" in d and "P_watts" in d:
        raise ConfigError("give either p_dbm or P_watts, not both")
    if "p_dbm" in d:
        d["P_watts"] = dbm_to_watts(float(d.pop("p_dbm")))
    unknown = set(d) - _SCHEMA_KEYS - {"P_watts"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "M" not in d or "K" not in d:
        raise ConfigError("config must set at least M and K")
    d.setdefault("P_watts", 1.0)
    try:
        return SystemConfig(**d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    """Load and validate a JSON config file.

    The environment variable MMRELAY_SEED, when set, overrides the seed.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    env_seed = os.environ.get("MMRELAY_SEED")
    if env_seed is not None:
        raw["seed"] = int(env_seed)
    return config_from_dict(raw)


def save_config(cfg, path):
    """Write a config as JSON; load_config(save_config(cfg)) == cfg."""
    with open(path, "w") as fh:
        json.dump(_to_schema_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
