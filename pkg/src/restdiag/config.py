"""Numerical tolerances shared by every module."""

import contextlib
import contextvars
from dataclasses import dataclass


@dataclass(frozen=True)
class ToleranceConfig:
    """Thresholds used for rank counting and gap tests.

    rank_eps
        Singular values ``<= rank_eps * max(1, s_max)`` count as zero.
    gap_lo, gap_hi
        A Fredholm pair must have every singular value of the compressed
        product either ``<= gap_lo`` or ``>= gap_hi``.
    residual_tol
        Acceptance threshold for off-diagonal residuals and reconstruction
        errors of assembled unitaries.
    """

    rank_eps: float = 1e-9
    gap_lo: float = 1e-9
    gap_hi: float = 1e-6
    residual_tol: float = 1e-8

    def __post_init__(self):
        for name in ("rank_eps", "gap_lo", "gap_hi", "residual_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        # equality allowed: the default rank threshold and zero-class gap coincide
        if not self.rank_eps <= self.gap_lo < self.gap_hi:
            raise ValueError("tolerances must satisfy rank_eps <= gap_lo < gap_hi")


_current = contextvars.ContextVar("restdiag_tolerances", default=ToleranceConfig())


def get_tolerances() -> ToleranceConfig:
    return _current.get()


@contextlib.contextmanager
def use_tolerances(config: ToleranceConfig):
    token = _current.set(config)
    try:
        yield config
    finally:
        _current.reset(token)
