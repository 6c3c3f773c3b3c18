"""Two-hop massive-MIMO relay downlink simulator.

Monte-Carlo rate evaluation and large-system deterministic equivalents for a
regularized zero-forcing precoded base-station -> relay -> users downlink,
with amplify-and-forward and decode-and-forward relaying.
"""

from .config import SystemConfig, load_config, save_config
from .determ import det_sinr_af, det_sinr_df, solve_hop
from .exceptions import (ConfigError, ConvergenceError, DegenerateChannelError,
                         MmRelayError, NotPsdError, NumericError)
from .mc import monte_carlo_sweep
from .presets import PRESET_NAMES, preset_config
from .report import run_sweep

__version__ = "0.1.0"

__all__ = [
    "SystemConfig", "load_config", "save_config",
    "solve_hop", "det_sinr_af", "det_sinr_df",
    "monte_carlo_sweep", "run_sweep",
    "preset_config", "PRESET_NAMES",
    "MmRelayError", "ConfigError", "NumericError", "NotPsdError",
    "ConvergenceError", "DegenerateChannelError",
    "__version__",
]
