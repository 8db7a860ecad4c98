r"""Exact, recursive, inverted, and asymptotic laws of the detection time.

A target ball sits at the origin while sensors, dropped as a homogeneous
Poisson process of intensity ``lam``, move independently.  Only the combined
radius R (target radius plus sensing radius) enters the law.  The survival
function of the detection time S is

    P(S > t) = exp(-lam * V(t)),

where V(t) is the expected volume swept by one sensor's R-neighborhood up
to time t.  For straight-line motion at random speed the swept region is a
spherical cylinder ("stadium"): V(t) = vol(B_R) + vol(B_R cross-section) *
E|v| * t.  For Brownian motion V(t) is the expected Wiener sausage volume,
available in closed form for d = 1, 3, 5, through Bessel-polynomial
transforms for every odd d, and by numerical Laplace inversion otherwise.

Laplace-domain building block: the hitting-time transform of the radial
(Bessel) process started at rho >= R,

    E[e^{-s T}] = (rho/R)^{-b} K_b(rho sqrt(2s)) / K_b(R sqrt(2s)),
    b = d/2 - 1,

which integrates to the sausage-volume transform

    Vhat_d^1(s) = omega_d / s
                + sigma_{d-1} / sqrt(2 s^3) * K_{d/2}(sqrt(2s)) / K_{d/2-1}(sqrt(2s)).

Time units: the Brownian motion has variance t per coordinate at time t.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .geometry import check_dimension, unit_ball_volume
from .specfun import bessel_k_scaled, bessel_poly, erfcx

__all__ = [
    "SpeedLaw",
    "ConstantSpeed",
    "ExponentialSpeed",
    "ParetoSpeed",
    "EmpiricalSpeed",
    "Brownian",
    "Inertial",
    "MotionModel",
    "ModelSpec",
    "SausageTransform",
    "SurvivalCurve",
    "NonConvergenceError",
    "CLOSED_FORM",
    "INVERTED",
    "ASYMPTOTIC",
    "EMPIRICAL",
    "bessel_hitting_laplace",
    "sausage_transform",
    "vhat_odd",
    "vhat_odd_cf",
    "sausage_volume",
    "unit_sausage_volume",
    "invert_laplace",
    "invert_laplace_with_error",
    "survival",
    "survival_curve",
    "hazard_rate",
    "hazard_rate_numeric",
    "survival_asymptotic",
    "expected_detection_time",
    "expected_detection_time_numeric",
    "fit_small_radius_law",
]

CLOSED_FORM = "closed-form"
INVERTED = "laplace-inverted"
ASYMPTOTIC = "asymptotic"
EMPIRICAL = "empirical"

_SQRT_PI = math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# model description
# ---------------------------------------------------------------------------

class SpeedLaw:
    """Distribution of a sensor's (nonnegative) speed."""

    @property
    def mean_speed(self) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantSpeed(SpeedLaw):
    speed: float

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be >= 0")

    @property
    def mean_speed(self) -> float:
        return self.speed

    def sample(self, rng, size):
        return np.full(size, self.speed)


@dataclass(frozen=True)
class ExponentialSpeed(SpeedLaw):
    mean: float

    def __post_init__(self):
        if not self.mean > 0:
            raise ValueError("mean must be > 0")

    @property
    def mean_speed(self) -> float:
        return self.mean

    def sample(self, rng, size):
        return rng.exponential(self.mean, size)


@dataclass(frozen=True)
class ParetoSpeed(SpeedLaw):
    """Pareto speed with tail index ``shape`` and lower bound ``scale``.

    The mean is infinite for shape <= 1, in which case the detection time
    degenerates to 0 almost surely.
    """

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("shape and scale must be > 0")

    @property
    def mean_speed(self) -> float:
        if self.shape <= 1.0:
            return math.inf
        return self.shape * self.scale / (self.shape - 1.0)

    def quantile(self, q: float) -> float:
        return self.scale * (1.0 - q) ** (-1.0 / self.shape)

    def sample(self, rng, size):
        return self.scale * rng.random(size) ** (-1.0 / self.shape)


@dataclass(frozen=True)
class EmpiricalSpeed(SpeedLaw):
    speeds: tuple

    def __post_init__(self):
        if len(self.speeds) == 0 or any(v < 0 for v in self.speeds):
            raise ValueError("speeds must be a nonempty list of nonnegative values")

    @property
    def mean_speed(self) -> float:
        return float(np.mean(self.speeds))

    def sample(self, rng, size):
        return rng.choice(np.asarray(self.speeds, dtype=float), size=size)


@dataclass(frozen=True)
class Brownian:
    kind: str = field(default="brownian", init=False)


@dataclass(frozen=True)
class Inertial:
    speed_law: SpeedLaw
    kind: str = field(default="inertial", init=False)


MotionModel = Union[Brownian, Inertial]


@dataclass(frozen=True)
class ModelSpec:
    """Model parameters: dimension, Poisson intensity, combined radius, motion.

    ``radius`` is the sum of the target radius and the sensing radius; the
    detection-time law depends on the two only through this sum.
    """

    dim: int
    intensity: float
    radius: float
    motion: MotionModel

    def __post_init__(self):
        check_dimension(self.dim)
        if not self.intensity > 0:
            raise ValueError("intensity must be > 0")
        if not self.radius > 0:
            raise ValueError("radius must be > 0")
        if not isinstance(self.motion, (Brownian, Inertial)):
            raise ValueError(f"unknown motion model {self.motion!r}")

    @property
    def atom_at_zero(self) -> float:
        """P(S = 0) = exp(-lam * vol(B_R)): a sensor already covers the target."""
        return math.exp(-self.intensity * unit_ball_volume(self.dim) * self.radius**self.dim)


@dataclass(frozen=True)
class SurvivalCurve:
    """Tabulated P(S > t) with provenance and optional per-point error."""

    ts: np.ndarray
    values: np.ndarray
    provenance: str
    stderr: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "ts", np.asarray(self.ts, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.ts.shape != self.values.shape:
            raise ValueError("ts and values must have equal length")
        if np.any(np.diff(self.ts) <= 0):
            raise ValueError("ts must be strictly increasing")
        if self.stderr is not None:
            object.__setattr__(self, "stderr", np.asarray(self.stderr, dtype=float))


class NonConvergenceError(ArithmeticError):
    """Numerical Laplace inversion failed its internal agreement check."""


# ---------------------------------------------------------------------------
# Laplace-domain machinery
# ---------------------------------------------------------------------------

def bessel_hitting_laplace(start: float, target: float, dim: int, s: float) -> float:
    """Transform E[e^{-s T}] of the time for the radial process started at
    ``start`` to hit the ball of radius ``target``.

    Equals 1 on the boundary and decays to 0 as the start recedes.  Starting
    points inside the target are rejected; the hitting time there is 0 and
    the transform trivially 1, which the caller handles directly.
    """
    check_dimension(dim)
    if not target > 0:
        raise ValueError("target radius must be > 0")
    if start < target:
        raise ValueError("start must satisfy start >= target")
    if not s > 0:
        raise ValueError("s must be > 0")
    b = dim / 2.0 - 1.0
    a = math.sqrt(2.0 * s)
    ratio = bessel_k_scaled(b, start * a) / bessel_k_scaled(b, target * a)
    return (start / target) ** (-b) * ratio * math.exp(-a * (start - target))


@dataclass(frozen=True)
class SausageTransform:
    """Evaluator of the Laplace transform of the unit-radius expected
    sausage volume, s |-> Vhat_d^1(s) for s > 0."""

    dim: int

    def __call__(self, s: float) -> float:
        if not s > 0:
            raise ValueError("s must be > 0")
        d = self.dim
        omega = unit_ball_volume(d)
        a = math.sqrt(2.0 * s)
        ratio = bessel_k_scaled(d / 2.0, a) / bessel_k_scaled(d / 2.0 - 1.0, a)
        return omega / s + d * omega / math.sqrt(2.0 * s**3) * ratio


def sausage_transform(dim: int) -> SausageTransform:
    check_dimension(dim)
    return SausageTransform(dim=dim)


def _check_odd_index(n: int, limit: int = 16) -> None:
    if not isinstance(n, int) or isinstance(n, bool) or n < 0 or n > limit:
        raise ValueError(f"odd-dimension index must satisfy 0 <= n <= {limit}, got {n!r}")


def vhat_odd(n: int, s: float) -> float:
    """Transform Vhat_{2n+1}^1(s) through the Bessel-polynomial ratio.

    Vhat = (omega/s) * [1 + (2n+1)/sqrt(2s) * y_n(1/sqrt(2s)) / y_{n-1}(1/sqrt(2s))].
    """
    _check_odd_index(n)
    if not s > 0:
        raise ValueError("s must be > 0")
    omega = unit_ball_volume(2 * n + 1)
    root2s = math.sqrt(2.0 * s)
    x = 1.0 / root2s
    ratio = bessel_poly(n)(x) / bessel_poly(n - 1)(x)
    return omega / s * (1.0 + (2 * n + 1) / root2s * ratio)


def vhat_odd_cf(n: int, s: float) -> float:
    """Same transform evaluated bottom-up through the continued fraction.

    The polynomial ratio H_n = y_n / y_{n-1} at 1/sqrt(2s) satisfies
    H_n = (2n-1)/sqrt(2s) + 1/H_{n-1} with H_0 = 1, which is exactly the
    finite continued fraction with partial terms (2k-1)/sqrt(2s).
    """
    _check_odd_index(n)
    if not s > 0:
        raise ValueError("s must be > 0")
    omega = unit_ball_volume(2 * n + 1)
    root2s = math.sqrt(2.0 * s)
    h = 1.0
    for k in range(1, n + 1):
        h = (2 * k - 1) / root2s + 1.0 / h
    return omega / s * (1.0 + (2 * n + 1) / root2s * h)


# ---------------------------------------------------------------------------
# Gaver-Stehfest inversion
# ---------------------------------------------------------------------------

def _stehfest_weights(n_terms: int) -> np.ndarray:
    """Salzer summation weights, computed in exact rational arithmetic."""
    half = n_terms // 2
    fac = math.factorial
    weights = []
    for k in range(1, n_terms + 1):
        acc = Fraction(0)
        for j in range((k + 1) // 2, min(k, half) + 1):
            acc += Fraction(
                j**half * fac(2 * j),
                fac(half - j) * fac(j) * fac(j - 1) * fac(k - j) * fac(2 * j - k),
            )
        weights.append((-1) ** (k + half) * float(acc))
    return np.array(weights)


_W16 = _stehfest_weights(16)
_W14 = _stehfest_weights(14)


def invert_laplace_with_error(
    transform: Callable[[float], float], t: float, rtol: float = 1e-6
) -> tuple:
    """Gaver-Stehfest estimate of the original function at time t.

    Returns ``(value, error_estimate)`` where the estimate is the relative
    disagreement between the 14- and 16-term sums.  Raises
    :class:`NonConvergenceError` when that disagreement exceeds ``rtol``,
    which happens for transforms outside the completely-monotone-like class
    this scheme can invert (oscillatory originals, for instance).
    """
    if not t > 0:
        raise ValueError("inversion requires t > 0")
    ln2_t = math.log(2.0) / t
    samples = [transform(k * ln2_t) for k in range(1, 17)]
    # fsum: the weights alternate with magnitudes ~1e8, so the cancellation
    # must be carried out with exactly rounded accumulation
    est16 = ln2_t * math.fsum(w * f for w, f in zip(_W16, samples))
    est14 = ln2_t * math.fsum(w * f for w, f in zip(_W14, samples[:14]))
    scale = max(abs(est16), abs(est14), 1e-300)
    err = abs(est16 - est14) / scale
    if err > rtol:
        raise NonConvergenceError(
            f"Gaver-Stehfest estimates disagree at t={t}: "
            f"{est14!r} (14 terms) vs {est16!r} (16 terms), relative {err:.3g}"
        )
    return est16, err


def invert_laplace(transform: Callable[[float], float], t: float, rtol: float = 1e-6) -> float:
    return invert_laplace_with_error(transform, t, rtol)[0]


# ---------------------------------------------------------------------------
# sausage volumes
# ---------------------------------------------------------------------------

def unit_sausage_volume(dim: int, tau: float) -> float:
    """Expected Wiener sausage volume at unit radius, V_d^1(tau).

    Closed forms for d = 1, 3, 5; Bessel-polynomial transforms inverted
    numerically for other odd d; the Bessel-ratio transform inverted
    numerically for even d.
    """
    check_dimension(dim)
    if tau < 0:
        raise ValueError("time must be >= 0")
    omega = unit_ball_volume(dim)
    if tau == 0.0:
        return omega
    if dim == 1:
        return 2.0 + math.sqrt(8.0 * tau / math.pi)
    if dim == 3:
        return omega * (1.0 + 3.0 * math.sqrt(2.0 / math.pi) * math.sqrt(tau) + 1.5 * tau)
    if dim == 5:
        return omega * (6.0 - 5.0 * erfcx(math.sqrt(tau / 2.0)) + 7.5 * tau)
    if dim % 2 == 1:
        n = (dim - 1) // 2
        return invert_laplace(lambda s: vhat_odd(n, s), tau)
    return invert_laplace(sausage_transform(dim), tau)


def sausage_volume(dim: int, radius: float, t: float) -> float:
    """Expected sausage volume V_d^R(t) = R^d V_d^1(t / R^2)."""
    if not radius > 0:
        raise ValueError("radius must be > 0")
    return radius**dim * unit_sausage_volume(dim, t / radius**2)


def _unit_sausage_derivative(dim: int, tau: float) -> float:
    """d/dtau V_d^1(tau) for the closed-form dimensions (tau > 0)."""
    omega = unit_ball_volume(dim)
    if dim == 1:
        return math.sqrt(2.0 / (math.pi * tau))
    if dim == 3:
        return omega * (1.5 * math.sqrt(2.0 / math.pi) / math.sqrt(tau) + 1.5)
    if dim == 5:
        # d/dtau erfcx(sqrt(tau/2)) = erfcx(sqrt(tau/2))/2 - 1/sqrt(2 pi tau)
        e = erfcx(math.sqrt(tau / 2.0))
        return omega * (7.5 - 2.5 * e + 5.0 / math.sqrt(2.0 * math.pi * tau))
    raise ValueError(f"no closed-form sausage derivative for dim={dim}")


# ---------------------------------------------------------------------------
# survival, hazard, asymptotics
# ---------------------------------------------------------------------------

def _sweep_rate(spec: ModelSpec) -> float:
    """Volume swept per unit time by one straight-line sensor: the cylinder
    cross-section vol(B_R in dimension d-1) times the mean speed."""
    law = spec.motion.speed_law
    mean = law.mean_speed
    if math.isinf(mean):
        return math.inf
    cross_section = 1.0 if spec.dim == 1 else unit_ball_volume(spec.dim - 1)
    return cross_section * spec.radius ** (spec.dim - 1) * mean


def survival(spec: ModelSpec, t: float, even_numeric: bool = False) -> float:
    """P(S > t).

    Inertial motion: exp(-lam vol(B_R)) * exp(-lam * sweep_rate * t), except
    that an infinite mean speed collapses the law to S = 0 almost surely and
    the survival is identically 0.  Brownian motion: exp(-lam V^R(t)) with
    the sausage volume in closed form (d = 1, 3, 5), through the odd-d
    transform machinery, or, only when ``even_numeric`` is set, by numerical
    Laplace inversion for even d >= 2.
    """
    if t < 0:
        raise ValueError("time must be >= 0")
    lam = spec.intensity
    if isinstance(spec.motion, Inertial):
        rate = _sweep_rate(spec)
        if math.isinf(rate):
            return 0.0
        return spec.atom_at_zero * math.exp(-lam * rate * t)
    if spec.dim % 2 == 0 and not even_numeric:
        raise ValueError(
            "no closed form exists in even dimensions; pass even_numeric=True "
            "to accept a numerically inverted value"
        )
    return math.exp(-lam * sausage_volume(spec.dim, spec.radius, t))


def survival_provenance(spec: ModelSpec) -> str:
    if isinstance(spec.motion, Inertial) or spec.dim in (1, 3, 5):
        return CLOSED_FORM
    return INVERTED


def survival_curve(
    spec: ModelSpec, ts: Sequence[float], even_numeric: bool = False
) -> SurvivalCurve:
    """Tabulated survival with provenance and, on the inverted branch, the
    inversion-agreement error propagated through the exponential."""
    ts = np.asarray(ts, dtype=float)
    values = np.empty_like(ts)
    errs = np.zeros_like(ts)
    provenance = survival_provenance(spec)
    lam, R, d = spec.intensity, spec.radius, spec.dim
    for i, t in enumerate(ts):
        if provenance == CLOSED_FORM or t == 0.0:
            values[i] = survival(spec, float(t), even_numeric=even_numeric)
        else:
            if d % 2 == 0 and not even_numeric:
                raise ValueError("even dimension requires even_numeric=True")
            if d % 2 == 1:
                n = (d - 1) // 2
                vol, rel = invert_laplace_with_error(lambda s: vhat_odd(n, s), t / R**2)
            else:
                vol, rel = invert_laplace_with_error(sausage_transform(d), t / R**2)
            values[i] = math.exp(-lam * R**d * vol)
            # |d exp(-lam V)| = exp(-lam V) * lam * |dV|
            errs[i] = values[i] * lam * R**d * abs(vol) * rel
    stderr = errs if provenance == INVERTED else None
    return SurvivalCurve(ts=ts, values=values, provenance=provenance, stderr=stderr)


def hazard_rate(spec: ModelSpec, t: float) -> float:
    """Instantaneous detection rate -d/dt log P(S > t) = lam * dV/dt.

    Constant for inertial motion; available in closed form for Brownian
    motion in d = 1, 3, 5.  The degenerate infinite-mean-speed case has no
    hazard (survival is identically zero) and is rejected.
    """
    if not t > 0:
        raise ValueError("hazard requires t > 0")
    lam = spec.intensity
    if isinstance(spec.motion, Inertial):
        rate = _sweep_rate(spec)
        if math.isinf(rate):
            raise ValueError("hazard undefined: infinite mean speed degenerates S to 0")
        return lam * rate
    if spec.dim not in (1, 3, 5):
        raise ValueError(
            "closed-form hazard exists only for d in {1, 3, 5}; "
            "use hazard_rate_numeric for other dimensions"
        )
    R = spec.radius
    return lam * R ** (spec.dim - 2) * _unit_sausage_derivative(spec.dim, t / R**2)


def hazard_rate_numeric(spec: ModelSpec, t: float) -> float:
    """Hazard for Brownian motion in any dimension, by inverting the
    transform of dV/dt, namely s Vhat(s) - vol(B)."""
    if not t > 0:
        raise ValueError("hazard requires t > 0")
    if not isinstance(spec.motion, Brownian):
        return hazard_rate(spec, t)
    d, R, lam = spec.dim, spec.radius, spec.intensity
    omega = unit_ball_volume(d)
    if d % 2 == 1:
        n = (d - 1) // 2
        base = lambda s: vhat_odd(n, s)
    else:
        base = sausage_transform(d)
    deriv = invert_laplace(lambda s: s * base(s) - omega, t / R**2)
    return lam * R ** (d - 2) * deriv


def survival_asymptotic(spec: ModelSpec, t: float) -> float:
    """Leading large-t asymptote of log P(S > t) for Brownian motion.

    d >= 3:  -lam * vol(B_d) * d(d-2)/2 * R^{d-2} * t
    d == 2:  -2 pi lam t / log t        (valid for t > 1)

    d = 1 is rejected: its exponent grows like sqrt(t), not t.
    """
    if not isinstance(spec.motion, Brownian):
        raise ValueError("asymptotic law applies to the Brownian model")
    d, lam, R = spec.dim, spec.intensity, spec.radius
    if d == 1:
        raise ValueError("no linear-in-t asymptote in dimension 1")
    if d == 2:
        if not t > 1:
            raise ValueError("dimension-2 asymptote requires t > 1")
        return -2.0 * math.pi * lam * t / math.log(t)
    return -lam * unit_ball_volume(d) * (d * (d - 2) / 2.0) * R ** (d - 2) * t


# ---------------------------------------------------------------------------
# expectations
# ---------------------------------------------------------------------------

def expected_detection_time(spec: ModelSpec) -> float:
    """E[S], exactly where a closed form exists.

    Inertial, finite mean speed:  exp(-lam vol(B_R)) / (lam * sweep_rate);
    infinite mean speed: 0 (S = 0 a.s.).  Brownian d = 1:
    (pi/4) exp(-2 lam R) / lam^2.  Everything else falls back to quadrature
    of the survival function.
    """
    lam, R = spec.intensity, spec.radius
    if isinstance(spec.motion, Inertial):
        rate = _sweep_rate(spec)
        if math.isinf(rate):
            return 0.0
        if rate == 0.0:
            return math.inf
        return spec.atom_at_zero / (lam * rate)
    if spec.dim == 1:
        return (math.pi / 4.0) * math.exp(-2.0 * lam * R) / lam**2
    return expected_detection_time_numeric(spec)[0]


def expected_detection_time_numeric(spec: ModelSpec) -> tuple:
    """E[S] by adaptive quadrature of the survival function.

    Returns ``(value, abs_error)`` where the error combines the quadrature
    estimate with a bound on the truncated tail.  Integration stops at a
    horizon T where survival has dropped below 1e-12; past the horizon the
    hazard is at or near its limiting rate, so the tail is at most
    survival(T)/hazard(T) up to a small safety factor.
    """
    if isinstance(spec.motion, Inertial):
        rate = _sweep_rate(spec)
        if math.isinf(rate):
            return 0.0, 0.0
        value = spec.atom_at_zero / (spec.intensity * rate)
        return value, 0.0
    even_numeric = spec.dim % 2 == 0

    def surv(t):
        return survival(spec, float(t), even_numeric=even_numeric)

    horizon = spec.radius**2
    while surv(horizon) > 1e-12:
        horizon *= 2.0
        if horizon > 1e12:
            break
    value, quad_err = integrate.quad(surv, 0.0, horizon, limit=200)
    h = hazard_rate_numeric(spec, horizon)
    tail = surv(horizon) / h * 2.0 if h > 0 else surv(horizon) * horizon
    return value, quad_err + tail


def fit_small_radius_law(
    dim: int,
    intensity: float,
    radii: Sequence[float],
    motion: Optional[MotionModel] = None,
) -> dict:
    """Least-squares fit of E[S] ~ c / R^p over a set of small radii.

    Returns the fitted decay exponent ``p``, its standard error from the
    residuals, and the prefactor ``c`` with a (crude, fit-based) standard
    error.  Used to probe the small-target behavior: Brownian sensors give
    p = d - 2 while straight-line sensors give p = d - 1, so Brownian search
    finds small targets faster in every dimension d >= 2.
    """
    motion = motion if motion is not None else Brownian()
    radii = np.asarray(sorted(radii), dtype=float)
    if radii.size < 3:
        raise ValueError("need at least 3 radii for a meaningful fit")
    values = np.array(
        [
            expected_detection_time(ModelSpec(dim=dim, intensity=intensity, radius=float(r), motion=motion))
            for r in radii
        ]
    )
    x = np.log(radii)
    y = np.log(values)
    design = np.column_stack([x, np.ones_like(x)])
    coef, residuals, *_ = np.linalg.lstsq(design, y, rcond=None)
    slope, intercept = coef
    dof = max(len(x) - 2, 1)
    resid_var = float(residuals[0]) / dof if len(residuals) else 0.0
    xvar = float(((x - x.mean()) ** 2).sum())
    slope_se = math.sqrt(resid_var / xvar) if xvar > 0 else math.inf
    return {
        "exponent": -float(slope),
        "exponent_stderr": slope_se,
        "prefactor": math.exp(float(intercept)),
        "prefactor_stderr": math.exp(float(intercept)) * math.sqrt(resid_var / len(x)),
        "n_points": int(len(x)),
    }
