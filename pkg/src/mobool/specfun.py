r"""Special functions behind the Brownian detection analysis.

Three families live here:

* the modified Bessel function of the second kind ``K_nu``, evaluated from
  its integral representation

      K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt,       x > 0,

  (DLMF 10.32.9) by the trapezoidal rule.  The integrand extends to an even,
  analytic function of t with double-exponential decay, for which the
  trapezoidal rule converges geometrically, so a few step halvings reach
  machine precision for every real order;

* the integer-coefficient Bessel polynomials ``y_n`` that collapse
  half-integer orders to elementary closed forms,

      K_{n+1/2}(x) = sqrt(pi/2) * exp(-x)/sqrt(x) * y_n(1/x);

* the complementary error function and its exponentially scaled variant
  ``erfcx(x) = exp(x^2) erfc(x)``, needed to evaluate survival tails whose
  naive form is a product of a huge exponential and a tiny erfc.

Convention: ``erfc`` is the standard complement, erfc(x) =
(2/sqrt(pi)) * int_x^inf exp(-u^2) du, so erfc(0) = 1 and erfc is
decreasing.  All identities in :mod:`mobool.analytic` assume this.
"""

import math
from dataclasses import dataclass

import numpy as np

from .geometry import MAX_DOUBLE_FACTORIAL_INDEX, odd_double_factorial

__all__ = [
    "UnderflowError",
    "BesselPolynomial",
    "bessel_poly",
    "bessel_poly_recursive",
    "bessel_k",
    "bessel_k_scaled",
    "bessel_k_half",
    "erfc",
    "erfcx",
]

_LOG2 = math.log(2.0)
_SQRT_PI = math.sqrt(math.pi)
_TINY_NORMAL = 2.2250738585072014e-308  # smallest positive normal double


class UnderflowError(ArithmeticError):
    """Result is below the smallest normal double.

    Carries ``log_value``, the natural log of the true result, so callers
    that need log-scale magnitudes can recover it.
    """

    def __init__(self, message: str, log_value: float):
        super().__init__(message)
        self.log_value = log_value


@dataclass(frozen=True)
class BesselPolynomial:
    """Bessel polynomial y_n with exact integer coefficients c_0..c_n.

    The degenerate degree -1 is admitted and equals the constant 1.
    """

    degree: int
    coeffs: tuple

    def __call__(self, x: float) -> float:
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def __len__(self) -> int:
        return len(self.coeffs)


def _check_poly_degree(n: int) -> None:
    if not isinstance(n, int) or isinstance(n, bool):
        raise ValueError(f"degree must be an integer, got {n!r}")
    if n < -1 or n > MAX_DOUBLE_FACTORIAL_INDEX:
        raise ValueError(
            f"Bessel polynomial degree must be in [-1, {MAX_DOUBLE_FACTORIAL_INDEX}], got {n}"
        )


def bessel_poly(n: int) -> BesselPolynomial:
    """Bessel polynomial of degree n from the explicit sum.

    c_k = (n+k)! / ((n-k)! k! 2^k), an exact integer for 0 <= k <= n.
    """
    _check_poly_degree(n)
    if n == -1:
        return BesselPolynomial(degree=-1, coeffs=(1,))
    coeffs = []
    for k in range(n + 1):
        num = math.factorial(n + k)
        den = math.factorial(n - k) * math.factorial(k) * 2**k
        q, r = divmod(num, den)
        if r:  # cannot happen; guards against a typo in the formula
            raise ArithmeticError(f"non-integer Bessel coefficient at n={n}, k={k}")
        coeffs.append(q)
    return BesselPolynomial(degree=n, coeffs=tuple(coeffs))


def bessel_poly_recursive(n: int) -> BesselPolynomial:
    """Bessel polynomial of degree n built from the three-term recursion.

    y_n(x) = (2n-1) x y_{n-1}(x) + y_{n-2}(x) with y_{-1} = y_0 = 1.
    Coefficient-for-coefficient identical to :func:`bessel_poly`.
    """
    _check_poly_degree(n)
    if n <= 0:
        return BesselPolynomial(degree=n, coeffs=(1,))
    prev2 = [1]  # y_{-1}
    prev1 = [1]  # y_0
    for m in range(1, n + 1):
        cur = [0] * (m + 1)
        for k, c in enumerate(prev1):
            cur[k + 1] += (2 * m - 1) * c
        for k, c in enumerate(prev2):
            cur[k] += c
        prev2, prev1 = prev1, cur
    return BesselPolynomial(degree=n, coeffs=tuple(prev1))


def _log_cosh(y: np.ndarray) -> np.ndarray:
    y = np.abs(y)
    return y + np.log1p(np.exp(-2.0 * y)) - _LOG2


def bessel_k_scaled(nu: float, x: float) -> float:
    """Exponentially scaled modified Bessel function e^x K_nu(x).

    Symmetric in nu by construction (the integrand depends on |nu| only).
    Never under- or overflows for x > 0 and |nu| <= 33 within the supported
    argument range, which makes it the right building block for ratios
    K_{b+1}(x)/K_b(x) at large x.
    """
    if not (x > 0.0) or not math.isfinite(x):
        raise ValueError(f"bessel_k requires x > 0, got {x!r}")
    nu = abs(float(nu))
    if not math.isfinite(nu):
        raise ValueError("order must be finite")

    # Upper cutoff where the scaled integrand drops below 1e-326 relative
    # to its t=0 value of 1: x (cosh T - 1) - nu T > 750.
    T = 1.0
    while x * (math.cosh(T) - 1.0) - nu * T < 750.0:
        T *= 1.4
        if T > 2.0e4:
            break

    def partial_sum(ts: np.ndarray) -> float:
        expo = -x * (np.cosh(ts) - 1.0) + _log_cosh(nu * ts)
        # exactly rounded sum: downstream Laplace inversion multiplies these
        # values by ~1e8 alternating weights, so accumulation noise matters
        return math.fsum(np.exp(expo))

    # Start near the scale of the integrand: width ~1/sqrt(x) at large x,
    # oscillation-free resolution ~1/nu for large orders.
    h = min(0.5, 3.0 / max(1.0, math.sqrt(x)), 3.0 / max(1.0, nu))
    grid = np.arange(0.0, T, h)
    total = h * (partial_sum(grid) - 0.5)  # integrand is exactly 1 at t=0
    for _ in range(30):
        mids = np.arange(h / 2.0, T, h)
        refined = 0.5 * total + (h / 2.0) * partial_sum(mids)
        h /= 2.0
        if abs(refined - total) <= 5e-15 * abs(refined):
            return refined
        total = refined
    return total


def bessel_k(nu: float, x: float) -> float:
    """Modified Bessel function of the second kind K_nu(x) for x > 0.

    Raises :class:`UnderflowError` (with the log-scale value attached) when
    the true result is below the smallest normal double, rather than
    silently returning 0.
    """
    scaled = bessel_k_scaled(nu, x)
    log_value = math.log(scaled) - x
    if log_value < math.log(_TINY_NORMAL):
        raise UnderflowError(
            f"K_{nu}({x}) underflows double precision; log value {log_value:.6g}",
            log_value=log_value,
        )
    return scaled * math.exp(-x)


def bessel_k_half(n: int, x: float) -> float:
    """Closed form K_{n+1/2}(x) = sqrt(pi/2) e^{-x}/sqrt(x) * y_n(1/x)."""
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise ValueError(f"bessel_k_half requires integer n >= 0, got {n!r}")
    if n > MAX_DOUBLE_FACTORIAL_INDEX:
        raise ValueError(f"bessel_k_half supports n <= {MAX_DOUBLE_FACTORIAL_INDEX}")
    if not (x > 0.0):
        raise ValueError(f"bessel_k_half requires x > 0, got {x!r}")
    poly = bessel_poly(n)(1.0 / x)
    log_value = 0.5 * math.log(math.pi / 2.0) - x - 0.5 * math.log(x) + math.log(poly)
    if log_value < math.log(_TINY_NORMAL):
        raise UnderflowError(
            f"K_{n}+1/2({x}) underflows double precision", log_value=log_value
        )
    return math.sqrt(math.pi / 2.0) * math.exp(-x) / math.sqrt(x) * poly


def erfc(x: float) -> float:
    """Standard complementary error function."""
    return math.erfc(x)


def erfcx(x: float) -> float:
    """Scaled complement erfcx(x) = exp(x^2) erfc(x).

    Direct product below x = 4; Laplace continued fraction above, where the
    product would mix a huge exponential with a vanishing erfc.  For
    negative x the reflection erfcx(x) = 2 exp(x^2) - erfcx(-x) is used and
    genuinely overflows once exp(x^2) does (x < -26.6), matching the true
    value leaving double range.
    """
    if math.isnan(x):
        return x
    if x < 0.0:
        return 2.0 * math.exp(x * x) - erfcx(-x)
    if x < 4.0:
        return math.exp(x * x) * math.erfc(x)
    # Laplace continued fraction, evaluated backward:
    # erfcx(x) = (1/sqrt(pi)) / (x + (1/2)/(x + (2/2)/(x + (3/2)/(x + ...))))
    t = x
    for k in range(64, 0, -1):
        t = x + (0.5 * k) / t
    return 1.0 / (_SQRT_PI * t)
