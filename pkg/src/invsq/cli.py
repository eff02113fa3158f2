"""Command line front end: ``invsq <subcommand> ...``.

Every run writes its result (CSV or JSON) to ``--out`` (stdout if absent)
and a manifest next to it (``<out>.manifest.json``; stderr for stdout runs)
holding the resolved arguments, the potential document, package versions
and tolerances.  Exit status: 0 success, 1 domain error, 2 usage error or
malformed potential file.  ``INVSQ_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import platform
import sys
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import angular, ladder as ladder_mod, oscillation
from .approxefn import DEFAULT_DELTA, build_phi, localize_spectrum, residual_norm, solve_approx_lambda
from .config import PotentialSpec, load_spec
from .errors import InvsqError, SpecError
from .examples import (COMPLIANT_C, HEMISPHERE_E_GRID, build_counterexample_T, build_periodic_g,
                       hemisphere_experiment, sharpness_experiment, window_zero_count)
from .exterior import evaluate_exterior, ode_residual
from .ladder import InteriorModel, compute_ladder, ladder_potential, localization
from .oscillation import count_report, predicted_count, slope_fit
from .plotdata import emit_plot_data
from .potential import RadialPerturbation

logger = logging.getLogger("invsq")


class UsageError(Exception):
    pass


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v) + 0.0)     # shortest round-trip form, no negative zero


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _json_text(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _e_grid(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad E grid {text!r}") from None
    if not vals or any(not (0 < v < 1) for v in vals):
        raise argparse.ArgumentTypeError("E values must lie in (0, 1)")
    return vals


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def _versions():
    try:
        own = metadata.version("invsq")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"invsq": own, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _tolerances(args):
    return {"ode_rtol": oscillation.ODE_RTOL, "ode_atol": oscillation.ODE_ATOL,
            "eig_residual": getattr(args, "tol_eig", None) or angular.RESIDUAL_TOL,
            "ladder_ode_rtol": ladder_mod.ODE_RTOL}


def _spec(args) -> PotentialSpec | None:
    path = getattr(args, "potential", None)
    if path is None:
        return None
    if not Path(path).is_file():
        raise UsageError(f"potential file not found: {path}")
    return load_spec(path)


def _ladder_setup(spec):
    if spec is None:
        return InteriorModel(), ladder_potential()
    if spec.potential.kind != "spectral":
        raise SpecError("the ladder needs a 'spectral' angular potential", field="angular.kind")
    return spec.interior, spec.potential


# subcommands ----------------------------------------------------------------

def cmd_angular(args, spec):
    kw = {"residual_tol": args.tol_eig} if args.tol_eig else {}
    sp = angular.angular_spectrum(spec.potential, args.basis, **kw)
    modes = angular.classify(sp)
    rows = [(m.index, m.eigenvalue, m.mu, m.multiplicity, m.critical, m.tau, m.alpha.real, m.alpha.imag)
            for m in modes]
    return _csv_text(("index", "eigenvalue", "mu", "multiplicity", "critical", "tau", "alpha_re", "alpha_im"),
                     rows), {}


def cmd_count(args, spec):
    radial = spec.radial
    if args.sign is not None:
        radial = radial.with_sign(-1 if args.sign == "minus" else 1)
    kw = {"residual_tol": args.tol_eig} if args.tol_eig else {}
    sp = angular.angular_spectrum(spec.potential, args.basis, **kw)
    modes = angular.critical_modes(sp)
    grid = args.E_grid or list(oscillation.DEFAULT_E_GRID)
    rep = count_report(modes, grid, radial, sp.dimension, threads=args.threads)
    rows = []
    for j, E in enumerate(rep.E_grid):
        for k, md in enumerate(modes):
            rows.append((E, md.index, int(rep.per_mode_counts[k, j]) * md.multiplicity,
                         predicted_count([md], E, sp.dimension), rep.totals[j]))
        if not modes:
            # keep one row per E so the totals column is never empty
            rows.append((E, None, 0, 0.0, rep.totals[j]))
    if args.plot_dir:
        emit_plot_data({"count": rep}, args.plot_dir)
    return _csv_text(("E", "mode_index", "count", "predicted", "total"), rows), {}


def cmd_slope(args, spec):
    path = Path(args.input)
    if not path.is_file():
        raise UsageError(f"input file not found: {path}")
    totals, predicted = {}, {}
    with path.open() as fh:
        reader = csv.DictReader(fh)
        need = {"E", "predicted", "total"}
        if not need <= set(reader.fieldnames or ()):
            raise UsageError(f"{path} lacks columns {sorted(need - set(reader.fieldnames or ()))}")
        for row in reader:
            E = float(row["E"])
            totals[E] = int(row["total"])
            predicted[E] = predicted.get(E, 0.0) + float(row["predicted"])
    Es = sorted(totals, reverse=True)
    slope, intercept, resid = slope_fit((Es, [totals[E] for E in Es]))
    pslope = predicted[Es[0]] / math.log(1.0 / Es[0]) if predicted else 0.0
    return _json_text({"slope": slope, "intercept": intercept, "predicted_slope": pslope,
                       "max_residual": resid, "n_points": len(Es)}), {}


def cmd_exterior(args, spec):
    sol = evaluate_exterior(args.mu, args.lam, args.r_lo, args.r_hi, args.n)
    res = ode_residual(sol)
    scale = math.exp(sol.log_scale)
    rows = zip(sol.r, sol.X * scale, sol.Xprime * scale, res)
    return _csv_text(("r", "X", "Xprime", "ode_residual"), rows), {}


def cmd_ladder(args, spec):
    model, pot = _ladder_setup(spec)
    lad = compute_ladder(model, pot, n_max=args.n_max, threads=args.threads)
    rows = []
    for k, n in enumerate(lad.n):
        ratio = lad.ratios[k] if k < len(lad.ratios) else None
        rows.append((n, lad.lambda_n[k], lad.xi_n[k], ratio, lad.a_estimates[k]))
    if args.plot_dir:
        emit_plot_data({"ladder": lad}, args.plot_dir)
    return _csv_text(("n", "lambda_n", "xi_n", "ratio", "a_estimate"), rows), {"onset": lad.onset}


def cmd_localize(args, spec):
    model, pot = _ladder_setup(spec)
    lad = compute_ladder(model, pot, n_max=max(args.n, args.n_max), threads=args.threads)
    rep = localization(model, lad, args.n, args.epsilon, n_min=min(10, args.n))
    return _json_text({"n": rep.n, "lambda": rep.lam, "mass_fraction": rep.mass_fraction,
                       "annulus": list(rep.annulus), "C_minus": rep.C_minus, "C_plus": rep.C_plus,
                       "interior_mass": rep.interior_mass, "epsilon": args.epsilon}), {}


def cmd_phi_residual(args, spec):
    model, pot = _ladder_setup(spec)
    ns = args.n_list
    lad = compute_ladder(model, pot, n_max=max(max(ns), 10), threads=args.threads)
    rows, series = [], []
    for n in ns:
        lam = solve_approx_lambda(model, n, args.delta, lad)
        phi = build_phi(model, lam, args.mode_cut, args.delta, potential=pot)
        num, ratio = residual_norm(phi)
        lo, hi = localize_spectrum(phi, ratio)
        rows.append((n, lam, lad.xi_n[n - 1], lad.lambda_n[n - 1], phi.rho, num, ratio, lo, hi))
        series.append((lam, ratio))
    if args.plot_dir:
        emit_plot_data({"residual": series}, args.plot_dir)
    return _csv_text(("n", "lambda_approx", "xi_n", "lambda_exact", "rho", "residual", "ratio",
                      "interval_lo", "interval_hi"), rows), {}


def cmd_counterexample(args, spec):
    grid = sorted(args.E_grid or [1e-3, 1e-5, 1e-7], reverse=True)
    g = build_periodic_g()
    T = build_counterexample_T(g)
    counts = sharpness_experiment(T, grid)
    compliant = sharpness_experiment(RadialPerturbation.log_power(COMPLIANT_C, 2.5), grid)
    rows = [(E, c, window_zero_count(g, E), cc) for E, c, cc in zip(grid, counts, compliant)]
    return _csv_text(("E", "count", "window_count", "compliant_count"), rows), {"C": T.C}


def cmd_hemisphere(args, spec):
    grid = sorted(args.E_grid or list(HEMISPHERE_E_GRID), reverse=True)
    rep = hemisphere_experiment(args.epsilon, grid, args.basis)
    rows = [(E, ce, co, rep.lambda_min_ev, rep.lambda_min_odd)
            for E, ce, co in zip(rep.E_grid, rep.counts_ev, rep.counts_odd)]
    return _csv_text(("E", "count_even", "count_odd", "lambda_min_even", "lambda_min_odd"), rows), {}


COMMANDS = {
    "angular": cmd_angular, "count": cmd_count, "slope": cmd_slope, "exterior": cmd_exterior,
    "ladder": cmd_ladder, "localize": cmd_localize, "phi-residual": cmd_phi_residual,
    "counterexample": cmd_counterexample, "hemisphere": cmd_hemisphere,
}
NEEDS_POTENTIAL = {"angular", "count"}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--tol-ode", type=float, help=f"ODE relative tolerance (default {oscillation.ODE_RTOL:g})")
    common.add_argument("--tol-eig", type=float,
                        help=f"angular eigenpair residual tolerance (default {angular.RESIDUAL_TOL:g})")
    common.add_argument("--basis", type=int, default=angular.DEFAULT_BASIS, help="angular basis size L")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--plot-dir", help="also write (x, y) plot series here")

    p = argparse.ArgumentParser(prog="invsq", description="Bound states of inverse-square potentials.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("angular", parents=[common], help="angular spectrum and mode classification")
    a.add_argument("--potential", required=True)

    c = sub.add_parser("count", parents=[common], help="bound-state counts over an E grid")
    c.add_argument("--potential", required=True)
    c.add_argument("--E-grid", dest="E_grid", type=_e_grid)
    c.add_argument("--sign", choices=("plus", "minus"))

    s = sub.add_parser("slope", parents=[common], help="fit a count CSV against ln(1/E)")
    s.add_argument("--in", dest="input", required=True)

    e = sub.add_parser("exterior", parents=[common], help="decaying exterior solution on a grid")
    e.add_argument("--mu", type=float, required=True)
    e.add_argument("--lam", type=float, required=True)
    e.add_argument("--r-lo", type=float, default=1.0)
    e.add_argument("--r-hi", type=float)
    e.add_argument("--n", type=int, default=200)

    for name, helptext in (("ladder", "eigenvalue ladder of the separable model"),
                           ("localize", "annulus localisation of an eigenfunction"),
                           ("phi-residual", "approximate eigenfunction residuals")):
        q = sub.add_parser(name, parents=[common], help=helptext)
        q.add_argument("--potential", help="spectral potential document (default: the sigma = 1/2 model)")
        if name == "ladder":
            q.add_argument("--n-max", type=int, default=25)
        elif name == "localize":
            q.add_argument("--n", type=int, required=True)
            q.add_argument("--epsilon", type=float, default=0.1)
            q.add_argument("--n-max", type=int, default=25)
        else:
            q.add_argument("--n-list", type=_int_list, default=[8, 10, 12, 14, 17, 20])
            q.add_argument("--delta", type=float, default=DEFAULT_DELTA)
            q.add_argument("--mode-cut", type=int, default=1)

    x = sub.add_parser("counterexample", parents=[common], help="periodic-g sharpness experiment")
    x.add_argument("--E-grid", dest="E_grid", type=_e_grid)

    h = sub.add_parser("hemisphere", parents=[common], help="even/odd hemisphere pair")
    h.add_argument("--epsilon", type=float, default=0.01)
    h.add_argument("--E-grid", dest="E_grid", type=_e_grid)
    return p


def _setup_logging():
    level = os.environ.get("INVSQ_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _emit(text, manifest, out):
    mtext = _json_text(manifest)
    if out:
        Path(out).write_text(text)
        Path(str(out) + ".manifest.json").write_text(mtext)
    else:
        sys.stdout.write(text)
        sys.stderr.write(mtext)


def run(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    saved = (oscillation.ODE_RTOL,)
    try:
        if args.tol_ode:
            if not 0 < args.tol_ode < 1:
                raise UsageError("--tol-ode must lie in (0, 1)")
            oscillation.ODE_RTOL = args.tol_ode
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        spec = _spec(args)
        text, extra = COMMANDS[args.command](args, spec)
        resolved = {k: v for k, v in sorted(vars(args).items()) if k not in ("out",)}
        manifest = {"command": args.command, "arguments": resolved,
                    "potential": spec.document if spec else None,
                    "versions": _versions(), "tolerances": _tolerances(args), "summary": extra}
        _emit(text, manifest, args.out)
        return 0
    except (UsageError, SpecError) as exc:
        print(f"invsq {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (InvsqError, ValueError) as exc:
        print(f"invsq {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    finally:
        (oscillation.ODE_RTOL,) = saved


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
