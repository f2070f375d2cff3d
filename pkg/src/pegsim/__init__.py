"""Simulator for a pegged-asset derivatives exchange.

Fixed-point amounts are plain ints scaled by ``SCALE`` (10**18).
"""

from .fixed import SCALE, fmt, fp

__version__ = "0.1.0"
__all__ = ["SCALE", "fmt", "fp", "__version__"]
