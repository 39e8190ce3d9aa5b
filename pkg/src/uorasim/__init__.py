"""Discrete-event simulator for 802.11ax uplink OFDMA random access (UORA)."""

from uorasim.errors import (
    ConfigError,
    MalformedElementError,
    MalformedFrameError,
    UoraSimError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "MalformedElementError",
    "MalformedFrameError",
    "UoraSimError",
    "__version__",
]
