"""Cross-validation report: simulation vs analytic law, CSVs plus figures.

Runs one Monte Carlo configuration, evaluates the analytic survival on the
same grid, z-scores the two, and writes everything into a directory:

    empirical.csv   t,survival,stderr,n_censored
    analytic.csv    t,survival,hazard,provenance
    compare.json    {max_abs_diff, max_z, frac_gt3, pass}
    survival.png    both curves with a 3-standard-error band
    zscores.png     per-point z-scores with the +-3 reference lines
"""

import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import analytic, simulate


def _write(path, lines):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def run_report(config, outdir, points=20, even_numeric=False):
    """Execute the comparison and return the list of files written."""
    os.makedirs(outdir, exist_ok=True)
    spec = config.spec
    grid = np.linspace(0.0, config.t_max, points)

    outcome = simulate.empirical_survival(config, grid=grid)
    reference = analytic.survival_curve(spec, grid, even_numeric=even_numeric)
    report = simulate.compare(outcome.curve, reference, n_trials=config.n_trials)

    fmt = lambda x: f"{x:.17g}"
    n_censored = int(outcome.censored.sum())
    emp_lines = ["t,survival,stderr,n_censored"]
    for t, v, e in zip(grid, outcome.curve.values, outcome.curve.stderr):
        emp_lines.append(f"{fmt(t)},{fmt(v)},{fmt(e)},{n_censored}")
    ana_lines = ["t,survival,hazard,provenance"]
    for t, v in zip(grid, reference.values):
        if t == 0.0 and isinstance(spec.motion, analytic.Brownian):
            hazard = math.inf
        elif isinstance(spec.motion, analytic.Inertial) or spec.dim in (1, 3, 5):
            hazard = analytic.hazard_rate(spec, float(t)) if t > 0 else analytic.hazard_rate(spec, 1e-9)
        else:
            hazard = analytic.hazard_rate_numeric(spec, float(t))
        ana_lines.append(f"{fmt(t)},{fmt(v)},{fmt(hazard)},{reference.provenance}")

    paths = []

    def save(name, lines=None):
        path = os.path.join(outdir, name)
        if lines is not None:
            _write(path, lines)
        paths.append(path)
        return path

    save("empirical.csv", emp_lines)
    save("analytic.csv", ana_lines)
    save("compare.json", [report.to_json()])

    fig, ax = plt.subplots(figsize=(7, 4.5))
    band = 3.0 * outcome.curve.stderr
    ax.fill_between(grid, outcome.curve.values - band, outcome.curve.values + band,
                    alpha=0.25, label="empirical +-3 SE")
    ax.plot(grid, outcome.curve.values, "o-", ms=3, lw=1, label="empirical")
    ax.plot(grid, reference.values, "k--", lw=1.5,
            label=f"analytic ({reference.provenance})")
    positive = reference.values[reference.values > 0]
    if positive.size and positive.min() < 1e-3:
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("P(S > t)")
    ax.set_title(f"Detection-time survival, d={spec.dim}, "
                 f"lambda={spec.intensity:g}, R={spec.radius:g}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(save("survival.png"), dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.axhline(0.0, color="k", lw=0.8)
    for level in (-3.0, 3.0):
        ax.axhline(level, color="r", lw=0.8, ls=":")
    ax.plot(grid, report.z_scores, "s-", ms=3, lw=1)
    ax.set_xlabel("t")
    ax.set_ylabel("z-score")
    ax.set_title(f"max |z| = {report.max_z:.2f}, pass = {report.passed}")
    fig.tight_layout()
    fig.savefig(save("zscores.png"), dpi=150)
    plt.close(fig)

    return paths
