"""Truncation-error bounds for Lagrange interpolation of band-limited responses.

For an even sampling interval h, a degree-n polynomial and a response whose
spectrum vanishes above the cut-off f0 with finite energy B^2:

    R1_n(h)     = [pi (n+1) / 2]^(-1/2) (h/2)^(n+1)
    |f^(n+1)|  <= B pi (2n+3)^(-1/2) (2 pi f0)^(n+3/2)
    R_n(x)     <= B / (n+1) (2 f0 / pi)^(1/2) (pi h f0)^(n+1)

The interpolation converges when h < 1 / (pi f0).
"""
import math
from typing import Dict

from pydantic import BaseModel, ConfigDict, model_validator


class BoundParams(BaseModel):
    """Degree n, interval h (Hz), cut-off f0 (Hz) and energy root B."""

    model_config = ConfigDict(frozen=True)

    n: int
    h: float
    f0: float
    B: float

    @model_validator(mode="after")
    def _check_params(self) -> "BoundParams":
        if self.n < 0:
            raise ValueError(f"degree must be non-negative, got {self.n}")
        if not (math.isfinite(self.h) and self.h > 0):
            raise ValueError(f"sampling interval must be positive, got {self.h}")
        if not (math.isfinite(self.f0) and self.f0 > 0):
            raise ValueError(f"cut-off frequency must be positive, got {self.f0}")
        if not (math.isfinite(self.B) and self.B >= 0):
            raise ValueError(f"energy root must be non-negative, got {self.B}")
        return self


def r1_bound(n: int, h: float) -> float:
    """Even-spacing bound on |v(x)| / (n+1)! for n+1 nodes spaced h apart."""
    if n < 0 or h <= 0:
        raise ValueError("r1_bound needs n >= 0 and h > 0")
    return (math.pi * (n + 1) / 2.0) ** -0.5 * (h / 2.0) ** (n + 1)


def derivative_bound(params: BoundParams) -> float:
    """Bound on the (n+1)-th derivative of a band-limited response."""
    n = params.n
    return params.B * math.pi * (2 * n + 3) ** -0.5 * (2 * math.pi * params.f0) ** (n + 1.5)


def truncation_bound(params: BoundParams) -> float:
    """Upper bound on the degree-n Lagrange remainder for interval h."""
    n = params.n
    return params.B / (n + 1) * math.sqrt(2 * params.f0 / math.pi) * (math.pi * params.h * params.f0) ** (n + 1)


def nyquist_check(h: float, f0: float) -> bool:
    """True iff h < 1 / (pi f0), the convergence condition of the sampling."""
    if h <= 0 or f0 <= 0:
        raise ValueError("nyquist_check needs h > 0 and f0 > 0")
    return h < 1.0 / (math.pi * f0)


def all_bounds(params: BoundParams) -> Dict[str, object]:
    """Every bound for one parameter set, keyed as printed by the bounds command."""
    return {
        "r1_bound": r1_bound(params.n, params.h),
        "derivative_bound": derivative_bound(params),
        "truncation_bound": truncation_bound(params),
        "nyquist_check": nyquist_check(params.h, params.f0)
    }
