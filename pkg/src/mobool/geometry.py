"""Euclidean ball and sphere constants used throughout the detection laws.

Unit-ball volumes are evaluated from the exact parity-split products

    vol(B_2n) = pi^n / n!,        vol(B_{2n+1}) = 2^{n+1} pi^n / (2n+1)!!,

with the integer parts computed exactly, so the values are reproducible bit
for bit and independent of any platform gamma function.  The gamma-function
form pi^(d/2) / Gamma(d/2 + 1) is kept as a cross-check.
"""

import math
from dataclasses import dataclass

#: Largest supported dimension.  Beyond this the ball volume is uselessly
#: small and Bessel-polynomial coefficients stop being practical.
MAX_DIMENSION = 64

#: Largest n for which odd_double_factorial(n) = (2n+1)!! is supported.
MAX_DOUBLE_FACTORIAL_INDEX = 33


def check_dimension(dim: int) -> int:
    """Validate an ambient dimension, returning it unchanged."""
    if not isinstance(dim, (int,)) or isinstance(dim, bool):
        raise ValueError(f"dimension must be an integer, got {dim!r}")
    if dim < 1 or dim > MAX_DIMENSION:
        raise ValueError(f"dimension must be in [1, {MAX_DIMENSION}], got {dim}")
    return dim


def odd_double_factorial(n: int) -> int:
    """Exact (2n+1)!! = 1 * 3 * 5 * ... * (2n+1).

    Supported for 0 <= n <= 33; larger arguments are rejected outright
    rather than returning an implementation-defined value.
    """
    if not isinstance(n, int) or isinstance(n, bool):
        raise ValueError(f"n must be an integer, got {n!r}")
    if n < 0 or n > MAX_DOUBLE_FACTORIAL_INDEX:
        raise ValueError(
            f"odd_double_factorial supports 0 <= n <= {MAX_DOUBLE_FACTORIAL_INDEX}, got {n}"
        )
    out = 1
    for k in range(3, 2 * n + 2, 2):
        out *= k
    return out


def unit_ball_volume(dim: int) -> float:
    """Volume of the unit ball in the given dimension."""
    check_dimension(dim)
    if dim % 2 == 0:
        n = dim // 2
        return math.pi**n / math.factorial(n)
    n = (dim - 1) // 2
    return 2 ** (n + 1) * math.pi**n / odd_double_factorial(n)


def unit_ball_volume_gamma(dim: int) -> float:
    """Gamma-function form of the unit-ball volume (cross-check only)."""
    check_dimension(dim)
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


def sphere_surface(dim: int) -> float:
    """Surface measure of the unit sphere bounding the ball: d * vol(B_d)."""
    return check_dimension(dim) * unit_ball_volume(dim)


@dataclass(frozen=True)
class BallConstants:
    """Volume and surface constants of the unit ball in one dimension."""

    dim: int
    volume: float
    surface: float


def ball_constants(dim: int) -> BallConstants:
    vol = unit_ball_volume(dim)
    return BallConstants(dim=dim, volume=vol, surface=dim * vol)
