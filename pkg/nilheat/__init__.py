"""
nilheat: the heat kernel transform on Heisenberg nilmanifolds.

Modules, bottom-up:
  numerics        grids, sampled fields, quadrature, lattice sums with tail bounds
  hermite         Hermite functions, the Mehler kernel, Hermite-Bergman norms
  heisenberg      group law, heat kernel and its continuation, twisted convolution
  nilmanifold     lattice averages, central sectors, invariant distributions
  bergman         twisted Bergman spaces, the finite group action, inversion
  heat_transform  the transform by convolution, Hermite and kernel-series routes
  checks, report  the verification suite and its reports
  cli             command line (python3 -m nilheat)
"""

from .config import RunConfig, load_config
from .errors import (
    AliasingError,
    ConfigError,
    IllPosedError,
    InvalidInputError,
    InvalidParameterError,
    KernelOverflowError,
    NilheatError,
    NonConvergenceError,
    ParseError,
    RangeWarning,
    ResampleWarning,
    TruncationWarning,
)

__version__ = "0.1.0"

__all__ = [
    "AliasingError",
    "ConfigError",
    "IllPosedError",
    "InvalidInputError",
    "InvalidParameterError",
    "KernelOverflowError",
    "NilheatError",
    "NonConvergenceError",
    "ParseError",
    "RangeWarning",
    "ResampleWarning",
    "RunConfig",
    "TruncationWarning",
    "load_config",
    "__version__",
]
