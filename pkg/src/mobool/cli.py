"""Command-line interface.

One binary, one subcommand per run.  Units everywhere: the intensity
``--lambda`` is sensors per unit volume, ``--radius`` is the combined
target-plus-sensing radius in length units, times are in time units with
the Brownian motion accruing variance t per coordinate by time t.

Exit codes: 0 success, 2 domain or flag error, 3 numerical
non-convergence, 1 internal failure.  All floats are printed with 17
significant digits so emitted CSV round-trips exactly.

Numeric flags may also be supplied through an optional ``--config FILE``
of ``key = value`` lines (keys are the long flag names without dashes);
explicit flags override the file.
"""

import argparse
import math
import sys
import traceback

import numpy as np

from . import analytic, simulate
from .geometry import check_dimension
from .specfun import bessel_poly

_UNITS_EPILOG = (
    "Units: --lambda is points per unit volume, --radius is a length, "
    "times are in time units (Brownian variance t per coordinate)."
)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _emit(lines, output):
    text = "\n".join(lines) + "\n"
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(text)


def _load_config(path):
    values = {}
    with open(path, "r", encoding="utf-8") as handle:
        for raw in handle:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line is not key=value: {raw.rstrip()}")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value
    return values


_KEY_TO_DEST = {"lambda": "lam"}


def _apply_config(parser, argv):
    """Peek --config, install its entries as parser defaults (flags win)."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return
    entries = _load_config(known.config)
    defaults = {}
    for action in parser._actions:
        for opt in action.option_strings:
            key = opt.lstrip("-")
            if key in entries:
                raw = entries[key]
                if action.type is not None:
                    raw = action.type(raw)
                elif isinstance(action, argparse._StoreTrueAction):
                    raw = raw.lower() in ("1", "true", "yes")
                defaults[action.dest] = raw
    for key in entries:
        dest = _KEY_TO_DEST.get(key, key.replace("-", "_"))
        if dest not in {a.dest for a in parser._actions} and key not in (
            "config",
        ):
            raise ValueError(f"unknown config key: {key}")
    parser.set_defaults(**defaults)


def _require(args, names):
    for name in names:
        if getattr(args, name, None) is None:
            flag = "--lambda" if name == "lam" else "--" + name.replace("_", "-")
            raise ValueError(f"missing required flag {flag}")


def _speed_law(text):
    kind, _, rest = text.partition(":")
    try:
        if kind == "const":
            return analytic.ConstantSpeed(float(rest))
        if kind == "exp":
            return analytic.ExponentialSpeed(float(rest))
        if kind == "pareto":
            shape, scale = (float(v) for v in rest.split(","))
            return analytic.ParetoSpeed(shape=shape, scale=scale)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad --speed-law {text!r}: {exc}") from None
    raise ValueError(
        f"unknown speed law {text!r}; expected const:c, exp:m, or pareto:alpha,x_m"
    )


def _model_spec(args, speed_law=None):
    check_dimension(args.dim)
    if args.model == "brownian":
        motion = analytic.Brownian()
    elif args.model == "inertial":
        if speed_law is None:
            raise ValueError("inertial model needs --mean-speed or --speed-law")
        motion = analytic.Inertial(speed_law=speed_law)
    else:
        raise ValueError(f"unknown model {args.model!r}")
    return analytic.ModelSpec(
        dim=args.dim, intensity=args.lam, radius=args.radius, motion=motion
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_besselpoly(args):
    poly = bessel_poly(args.n)
    row = ",".join([str(args.n)] + [str(c) for c in poly.coeffs])
    _emit([row], args.output)
    # human-readable closed form on stderr, keeping stdout to the one CSV row
    n = args.n
    terms = []
    for k, c in enumerate(poly.coeffs):  # c_0 x^n + c_1 x^(n-1) + ... + c_n
        power = n - k
        if power == 0:
            terms.append(f"{c}")
        elif power == 1:
            terms.append(f"{c}x" if c != 1 else "x")
        else:
            terms.append(f"{c}x^{power}" if c != 1 else f"x^{power}")
    body = " + ".join(terms) if terms else "1"
    sys.stderr.write(
        f"K_{{{n}+1/2}}(x) = sqrt(pi/2) * exp(-x) / x^({2 * n + 1}/2) * ({body})\n"
    )
    return 0


def _grid(args):
    if args.points < 2:
        raise ValueError("--points must be >= 2")
    if not args.tmax > args.tmin:
        raise ValueError("--tmax must exceed --tmin")
    return np.linspace(args.tmin, args.tmax, args.points)


def _cmd_analytic(args):
    _require(args, ["dim", "lam", "radius", "tmin", "tmax", "points"])
    speed = None
    if args.model == "inertial":
        if args.mean_speed is None:
            raise ValueError("inertial model needs --mean-speed")
        speed = analytic.ConstantSpeed(args.mean_speed)
    spec = _model_spec(args, speed)
    ts = _grid(args)
    curve = analytic.survival_curve(spec, ts, even_numeric=args.even_numeric)
    degenerate = isinstance(spec.motion, analytic.Inertial) and math.isinf(
        spec.motion.speed_law.mean_speed
    )
    lines = ["t,survival,hazard,provenance"]
    for t, value in zip(curve.ts, curve.values):
        if degenerate:
            hazard = math.nan
        elif isinstance(spec.motion, analytic.Inertial):
            hazard = analytic.hazard_rate(spec, max(float(t), 1.0))  # constant in t
        elif t == 0.0:
            hazard = math.inf
        elif spec.dim in (1, 3, 5):
            hazard = analytic.hazard_rate(spec, float(t))
        else:
            hazard = analytic.hazard_rate_numeric(spec, float(t))
        lines.append(f"{_fmt(float(t))},{_fmt(float(value))},{_fmt(hazard)},{curve.provenance}")
    _emit(lines, args.output)
    return 0


def _cmd_asymptote(args):
    _require(args, ["dim", "lam", "radius", "tmin", "tmax", "points"])
    spec = analytic.ModelSpec(
        dim=args.dim, intensity=args.lam, radius=args.radius, motion=analytic.Brownian()
    )
    ts = _grid(args)
    lines = ["t,log_survival_asymptotic"]
    for t in ts:
        lines.append(f"{_fmt(float(t))},{_fmt(analytic.survival_asymptotic(spec, float(t)))}")
    _emit(lines, args.output)
    return 0


def _cmd_invert(args):
    _require(args, ["dim", "t"])
    check_dimension(args.dim)
    ts = [float(v) for v in args.t.split(",") if v.strip()]
    if not ts or any(t <= 0 for t in ts):
        raise ValueError("--t needs a comma-separated list of times > 0")
    transform = analytic.sausage_transform(args.dim)
    closed = args.dim in (1, 3, 5)
    lines = ["t,V1_d_numeric,V1_d_closed,rel_err" if closed else "t,V1_d_numeric"]
    for t in ts:
        numeric = analytic.invert_laplace(transform, t)
        if closed:
            exact = analytic.unit_sausage_volume(args.dim, t)
            rel = abs(numeric - exact) / abs(exact)
            lines.append(f"{_fmt(t)},{_fmt(numeric)},{_fmt(exact)},{_fmt(rel)}")
        else:
            lines.append(f"{_fmt(t)},{_fmt(numeric)}")
    _emit(lines, args.output)
    return 0


def _cmd_simulate(args):
    _require(args, ["dim", "lam", "radius", "tmax", "dt", "trials", "seed"])
    speed = _speed_law(args.speed_law) if args.speed_law else None
    if args.model == "brownian" and speed is not None:
        raise ValueError("--speed-law is only meaningful with --model inertial")
    spec = _model_spec(args, speed)
    config = simulate.SimConfig(
        spec=spec,
        t_max=args.tmax,
        dt=args.dt,
        n_trials=args.trials,
        seed=args.seed,
        epsilon=args.eps,
    )
    grid = np.linspace(0.0, args.tmax, args.points)
    outcome = simulate.empirical_survival(config, grid=grid)
    for note in outcome.warnings:
        sys.stderr.write(f"warning: {note}\n")
    n_censored = int(outcome.censored.sum())
    lines = ["t,survival,stderr,n_censored"]
    for t, value, err in zip(outcome.curve.ts, outcome.curve.values, outcome.curve.stderr):
        lines.append(f"{_fmt(float(t))},{_fmt(float(value))},{_fmt(float(err))},{n_censored}")
    _emit(lines, args.output)
    return 0


def _read_curve(path):
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().strip().split(",")
        rows = [line.strip().split(",") for line in handle if line.strip()]
    cols = {name: i for i, name in enumerate(header)}
    if "t" not in cols or "survival" not in cols:
        raise ValueError(f"{path}: expected columns t and survival, got {header}")
    ts = np.array([float(r[cols["t"]]) for r in rows])
    values = np.array([float(r[cols["survival"]]) for r in rows])
    stderr = None
    if "stderr" in cols:
        stderr = np.array([float(r[cols["stderr"]]) for r in rows])
    provenance = analytic.EMPIRICAL if "stderr" in cols else analytic.CLOSED_FORM
    return analytic.SurvivalCurve(ts=ts, values=values, provenance=provenance, stderr=stderr)


def _cmd_compare(args):
    empirical = _read_curve(args.empirical)
    reference = _read_curve(args.analytic)
    report = simulate.compare(empirical, reference, z_threshold=args.z_threshold)
    _emit([report.to_json()], args.output)
    return 0


def _cmd_expectation(args):
    _require(args, ["dim", "lam", "radius"])
    speed = None
    if args.model == "inertial":
        if args.mean_speed is None:
            raise ValueError("inertial model needs --mean-speed")
        speed = analytic.ConstantSpeed(args.mean_speed)
    spec = _model_spec(args, speed)
    if isinstance(spec.motion, analytic.Inertial) or spec.dim == 1:
        value = analytic.expected_detection_time(spec)
        err, method = 0.0, "exact"
    else:
        value, err = analytic.expected_detection_time_numeric(spec)
        method = "quadrature"
    _emit(["value,abs_error,method", f"{_fmt(value)},{_fmt(err)},{method}"], args.output)
    return 0


def _cmd_report(args):
    from . import report as report_mod

    _require(args, ["dim", "lam", "radius", "tmax", "dt", "trials", "seed", "outdir"])
    speed = _speed_law(args.speed_law) if args.speed_law else None
    if args.model == "brownian" and speed is not None:
        raise ValueError("--speed-law is only meaningful with --model inertial")
    spec = _model_spec(args, speed)
    config = simulate.SimConfig(
        spec=spec,
        t_max=args.tmax,
        dt=args.dt,
        n_trials=args.trials,
        seed=args.seed,
        epsilon=args.eps,
    )
    paths = report_mod.run_report(
        config,
        outdir=args.outdir,
        points=args.points,
        even_numeric=args.even_numeric,
    )
    for path in paths:
        sys.stdout.write(f"{path}\n")
    return 0


# ---------------------------------------------------------------------------
# parser assembly and dispatch
# ---------------------------------------------------------------------------

def _add_common_model_flags(parser, mean_speed=False):
    parser.add_argument("--model", choices=["brownian", "inertial"], default="brownian",
                        help="sensor motion model")
    parser.add_argument("--dim", type=int, help="ambient dimension d (1..64)")
    parser.add_argument("--lambda", dest="lam", type=float,
                        help="Poisson intensity (points per unit volume)")
    parser.add_argument("--radius", type=float,
                        help="combined radius R = target + sensing radius (length)")
    if mean_speed:
        parser.add_argument("--mean-speed", type=float,
                            help="mean sensor speed E|v| (inertial model only)")


def _add_output_and_config(parser):
    parser.add_argument("--output", default="-", help="output path, '-' for stdout")
    parser.add_argument("--config", help="key=value file of flag defaults (flags win)")


def build_parser():
    parser = argparse.ArgumentParser(prog="mobool", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("besselpoly", epilog=_UNITS_EPILOG,
                       help="integer coefficients of one Bessel polynomial "
                            "(one CSV row n,c_0,...,c_n; closed form on stderr)")
    p.add_argument("--n", type=int, required=True, help="polynomial degree (0..33)")
    _add_output_and_config(p)
    p.set_defaults(func=_cmd_besselpoly)

    p = sub.add_parser("analytic", epilog=_UNITS_EPILOG,
                       help="survival and hazard on a time grid "
                            "(CSV t,survival,hazard,provenance)")
    _add_common_model_flags(p, mean_speed=True)
    p.add_argument("--tmin", type=float, help="grid start time")
    p.add_argument("--tmax", type=float, help="grid end time")
    p.add_argument("--points", type=int, help="grid size (>= 2)")
    p.add_argument("--even-numeric", action="store_true",
                   help="accept numerically inverted values in even dimensions")
    _add_output_and_config(p)
    p.set_defaults(func=_cmd_analytic)

    p = sub.add_parser("asymptote", epilog=_UNITS_EPILOG,
                       help="large-time log-survival asymptote "
                            "(CSV t,log_survival_asymptotic)")
    _add_common_model_flags(p)
    p.add_argument("--tmin", type=float)
    p.add_argument("--tmax", type=float)
    p.add_argument("--points", type=int)
    _add_output_and_config(p)
    p.set_defaults(func=_cmd_asymptote)

    p = sub.add_parser("invert", epilog=_UNITS_EPILOG,
                       help="numerically invert the unit-radius sausage-volume "
                            "transform (CSV t,V1_d_numeric[,V1_d_closed,rel_err])")
    p.add_argument("--dim", type=int)
    p.add_argument("--t", help="comma-separated list of times > 0")
    _add_output_and_config(p)
    p.set_defaults(func=_cmd_invert)

    p = sub.add_parser("simulate", epilog=_UNITS_EPILOG,
                       help="Monte Carlo empirical survival "
                            "(CSV t,survival,stderr,n_censored; n_censored is "
                            "the run-level count of trials censored at tmax)")
    _add_common_model_flags(p)
    p.add_argument("--speed-law", help="const:c, exp:m, or pareto:alpha,x_m")
    p.add_argument("--tmax", type=float, help="censoring horizon")
    p.add_argument("--dt", type=float, help="Brownian step size (<= tmax/100)")
    p.add_argument("--trials", type=int, help="number of independent trials")
    p.add_argument("--eps", type=float, default=1e-3,
                   help="window-miss probability budget (default 1e-3)")
    p.add_argument("--seed", type=int, help="required reproducibility seed")
    p.add_argument("--points", type=int, default=20,
                   help="grid size on [0, tmax] (default 20)")
    _add_output_and_config(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("compare", epilog=_UNITS_EPILOG,
                       help="z-score an empirical curve against an analytic one "
                            "(JSON {max_abs_diff, max_z, frac_gt3, pass})")
    p.add_argument("--empirical", required=True, help="CSV from the simulate subcommand")
    p.add_argument("--analytic", required=True, help="CSV from the analytic subcommand")
    p.add_argument("--z-threshold", type=float, default=3.0)
    _add_output_and_config(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("expectation", epilog=_UNITS_EPILOG,
                       help="expected detection time (CSV value,abs_error,method)")
    _add_common_model_flags(p, mean_speed=True)
    _add_output_and_config(p)
    p.set_defaults(func=_cmd_expectation)

    p = sub.add_parser("report", epilog=_UNITS_EPILOG,
                       help="simulate, evaluate the analytic law, compare, and "
                            "render figures into --outdir")
    _add_common_model_flags(p)
    p.add_argument("--speed-law", help="const:c, exp:m, or pareto:alpha,x_m")
    p.add_argument("--tmax", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--seed", type=int)
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--even-numeric", action="store_true")
    p.add_argument("--outdir", help="directory for CSVs, JSON, and figures")
    p.add_argument("--config", help="key=value file of flag defaults (flags win)")
    p.set_defaults(func=_cmd_report)

    return parser


def dispatch(argv) -> int:
    """Parse argv, run one subcommand, and return the exit code."""
    parser = build_parser()
    try:
        if argv and argv[0] in {
            "besselpoly", "analytic", "asymptote", "invert",
            "simulate", "compare", "expectation", "report",
        }:
            sub_parser = next(
                a for a in parser._subparsers._group_actions
            ).choices[argv[0]]
            _apply_config(sub_parser, argv[1:])
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already reported the problem
        return int(exc.code or 0)
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    try:
        return args.func(args)
    except analytic.NonConvergenceError as exc:
        sys.stderr.write(f"non-convergence: {exc}\n")
        return 3
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except Exception:  # pragma: no cover - internal failure path
        traceback.print_exc()
        return 1


def main():
    raise SystemExit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
