"""Tag-aware job dispatch: configuration, routing, and simulation."""

from ._vortex import (
    Config,
    VortexError,
    __version__,
    evaluate,
    interpolate,
)

__all__ = ["Config", "VortexError", "evaluate", "interpolate", "__version__"]
