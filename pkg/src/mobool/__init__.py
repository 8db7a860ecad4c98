"""Detection-time laws and Monte Carlo simulation for the mobile Boolean model.

Sensors dropped as a homogeneous Poisson process move independently
(straight lines with random speed, or Brownian motion) and the package
computes, and cross-validates by simulation, the law of the first time a
fixed ball is detected.
"""

from .analytic import (
    ASYMPTOTIC,
    CLOSED_FORM,
    EMPIRICAL,
    INVERTED,
    Brownian,
    ConstantSpeed,
    EmpiricalSpeed,
    ExponentialSpeed,
    Inertial,
    ModelSpec,
    NonConvergenceError,
    ParetoSpeed,
    SausageTransform,
    SurvivalCurve,
    bessel_hitting_laplace,
    expected_detection_time,
    expected_detection_time_numeric,
    hazard_rate,
    invert_laplace,
    sausage_transform,
    sausage_volume,
    survival,
    survival_asymptotic,
    survival_curve,
    unit_sausage_volume,
    vhat_odd,
    vhat_odd_cf,
)
from .geometry import (
    BallConstants,
    ball_constants,
    odd_double_factorial,
    sphere_surface,
    unit_ball_volume,
)
from .simulate import (
    CompareReport,
    Germ,
    SimConfig,
    SimOutcome,
    compare,
    detect_brownian,
    detect_inertial,
    empirical_survival,
    sample_germs,
    truncation_radius,
)
from .specfun import (
    BesselPolynomial,
    UnderflowError,
    bessel_k,
    bessel_k_half,
    bessel_k_scaled,
    bessel_poly,
    bessel_poly_recursive,
    erfc,
    erfcx,
)

__version__ = "0.1.0"
