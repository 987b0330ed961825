"""Exact derivatives: forward jets over inputs, reverse tape over parameters."""
from .fdcheck import check_fd, fd_derivatives, relative_error
from .jet import (
    DerivativeDomainError,
    Jet2,
    channels,
    clamp_min,
    jet_arith,
    seed_inputs,
    stacked_activation,
    stacked_affine,
    tri_index,
    tri_pairs,
    unstack,
)
from .tape import NonFiniteAdjointError, Tape, Var

__all__ = [
    "DerivativeDomainError", "Jet2", "NonFiniteAdjointError", "Tape", "Var",
    "channels", "check_fd", "clamp_min", "fd_derivatives", "jet_arith", "relative_error",
    "seed_inputs", "stacked_activation", "stacked_affine", "tri_index", "tri_pairs", "unstack",
]
