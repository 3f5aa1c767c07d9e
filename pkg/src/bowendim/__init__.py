"""Dimension of radial Julia sets of random exponential maps via expected pressure."""

import warnings

# numba falls back to another threading layer when the installed TBB is too old
warnings.filterwarnings("ignore", message="The TBB threading layer")

__version__ = "0.1.0"
