"""Quasi-stationary distributions of absorbed finite Markov chains."""

__version__ = "0.1.0"

from .chain import (  # noqa: E402
    AbsorbedChain,
    DeviationMatrix,
    deviation_matrix,
    drift,
    example_chain,
    green_function,
    kernel,
    pi,
    validate_chain,
)
from .spectral import SpectralSummary, qsd_exact  # noqa: E402
from .schedules import StepSchedule, l_gamma, parse_schedule  # noqa: E402

__all__ = [
    "AbsorbedChain",
    "DeviationMatrix",
    "SpectralSummary",
    "StepSchedule",
    "deviation_matrix",
    "drift",
    "example_chain",
    "green_function",
    "kernel",
    "l_gamma",
    "parse_schedule",
    "pi",
    "qsd_exact",
    "validate_chain",
]
