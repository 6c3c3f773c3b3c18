"""Named scenario presets for the standard experiment configurations."""

import math

from .config import SystemConfig, dbm_to_watts
from .exceptions import ConfigError

_TAU_IMPERFECT = math.sqrt(0.1)

# (M, K, correlation_mode, tau): "a" variants use tau^2 = 0.1, "b" perfect CSIT.
_PRESET_TABLE = {
    "fig2a": (768, 64, "one_ring", _TAU_IMPERFECT),
    "fig2b": (768, 64, "one_ring", 0.0),
    "fig3a": (768, 64, "identity", _TAU_IMPERFECT),
    "fig3b": (768, 64, "identity", 0.0),
    "fig4a": (256, 32, "one_ring", _TAU_IMPERFECT),
    "fig4b": (256, 32, "one_ring", 0.0),
    "fig5a": (256, 32, "identity", _TAU_IMPERFECT),
    "fig5b": (256, 32, "identity", 0.0),
    "fig6a": (768, 64, "one_ring", _TAU_IMPERFECT),
    "fig6b": (768, 64, "one_ring", 0.0),
    "fig7a": (768, 64, "identity", _TAU_IMPERFECT),
    "fig7b": (768, 64, "identity", 0.0),
}

PRESET_NAMES = tuple(sorted(_PRESET_TABLE))

DEFAULT_GRID_DBM = tuple(range(-20, 51, 5))


def preset_config(name, trials=None, seed=0):
    """Build the SystemConfig for a named preset.

    Default trial counts: 100 at M <= 256, 25 at M = 768 (desk runtimes).
    """
    try:
        M, K, mode, tau = _PRESET_TABLE[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}"
        ) from None
    if trials is None:
        trials = 100 if M <= 256 else 25
    return SystemConfig(
        M=M, K=K,
        P_watts=dbm_to_watts(30.0),
        tau_sr=tau, tau_rd=tau,
        correlation_mode=mode,
        trials=trials, seed=seed,
    )
