"""Restricted diagonalization by unitaries of the form I + J, at finite truncation."""

from .config import ToleranceConfig, get_tolerances, use_tolerances
from .errors import PreconditionFailed, RestdiagError
from .operators import (DiagonalizableOperator, IdentityDecomposition, PartialIsometry,
                        Projection, Tail, TruncOperator)
from .seq_ideal import COMPACT, FINITE_RANK, IdealTag, SeqProfile, TailModel, schatten

__version__ = "0.1.0"

__all__ = [
    "COMPACT", "FINITE_RANK", "DiagonalizableOperator", "IdealTag", "IdentityDecomposition",
    "PartialIsometry", "PreconditionFailed", "Projection", "RestdiagError", "SeqProfile",
    "Tail", "TailModel", "ToleranceConfig", "TruncOperator", "get_tolerances", "schatten",
    "use_tolerances",
]
