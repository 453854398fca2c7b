"""Command line front end: ``kinetic-imex <subcommand> ...``.

Every subcommand writes CSV with a header row; ``--figures`` (or the
``report`` subcommand) renders PNG figures next to the CSV files.  Failures
exit nonzero after printing one JSON line ``{"error": ..., "message": ...}``
to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import load_config
from .integrator import DIAG_COLUMNS, ProblemSpec, run
from .kinetic import maxwellian_from_primitive
from .limits import section_initial_state, well_prepared_init
from .output import save_field, write_csv, write_moments
from .plotting import render_csv
from .schemes import builtin_schemes, get_scheme, misprint_report, order_residuals
from .stability import boundary_table, monotonicity_region, table_comparison

log = logging.getLogger("kinetic_imex")


def _out(path, header, rows, figures=False):
    if path in (None, "-"):
        w = sys.stdout
        w.write(",".join(header) + "\n")
        from .output import _fmt
        for r in rows:
            w.write(",".join(_fmt(v) for v in r) + "\n")
        return None
    p = write_csv(path, header, rows)
    print(f"wrote {p}", file=sys.stderr)
    if figures:
        print(f"wrote {render_csv(p)}", file=sys.stderr)
    return p


def cmd_order_check(args):
    schemes = [get_scheme(s) for s in args.scheme] if args.scheme else builtin_schemes()
    rows = []
    for sch in schemes:
        p = sch.declared_order
        r_p = float(np.max(np.abs(order_residuals(sch, p))))
        r_next = float(np.max(np.abs(order_residuals(sch, p + 1))))
        rows.append((sch.name, p, sch.s, r_p, r_next, r_p < args.tol))
    _out(args.out, ["scheme", "declared_order", "steps", "residual_p", "residual_p_plus_1", "passes"], rows)
    if args.misprints:
        mp = [(d["scheme"], d["field"], " ".join(map(str, d["misprinted"])) if isinstance(d["misprinted"], tuple)
               else str(d["misprinted"]), " ".join(map(str, d["corrected"])) if isinstance(d["corrected"], tuple)
               else str(d["corrected"]), d["misprint_max_residual"]) for d in misprint_report()]
        target = None if args.out in (None, "-") else Path(args.out).with_name(Path(args.out).stem + "_misprints.csv")
        _out(target, ["scheme", "field", "misprinted", "corrected", "misprint_max_residual"], mp)
    return 0 if all(r[-1] for r in rows) else 1


def cmd_stability_region(args):
    schemes = args.scheme or [s.name for s in builtin_schemes()]
    z = np.geomspace(args.z_min, args.z_max, args.n_z)
    rows = boundary_table(schemes, args.xi, z, args.a_max, args.modes)
    _out(args.out, ["scheme", "xi", "z", "a_boundary"], rows, args.figures)
    return 0


def cmd_monotonicity_table(args):
    comp = table_comparison()
    rows = [(c["scheme"], c["match"], c["flag"], c["max_dev_z_lo"], c["max_dev_z_hi"], c["max_dev_xi"],
             c["derived_xi_lo"], c["derived_xi_hi"], c["derived_z_hi"]) for c in comp]
    _out(args.out, ["scheme", "match", "flag", "max_dev_z_lo", "max_dev_z_hi", "max_dev_xi",
                    "derived_xi_lo", "derived_xi_hi", "derived_z_hi"], rows)
    if args.xi is not None:
        reg_rows = []
        for sch in builtin_schemes():
            for xi in args.xi:
                r = monotonicity_region(sch, xi)
                reg_rows.append((sch.name, xi, r.feasible, float(r.z_lo), float(r.z_hi)))
        target = None if args.out in (None, "-") else Path(args.out).with_name(Path(args.out).stem + "_regions.csv")
        _out(target, ["scheme", "xi", "feasible", "z_lo", "z_hi"], reg_rows)
    return 0


def _initial(cfg, problem):
    vg, xg = problem.vgrid, problem.xgrid
    if cfg.init == "bimaxwellian":
        return np.broadcast_to(ex.bimaxwellian(vg), problem.shape).copy()
    U0 = section_initial_state(xg, vg.dv)
    if cfg.init == "maxwellian":
        return maxwellian_from_primitive(U0.mom.rho, U0.mom.u, U0.mom.T, vg)
    return well_prepared_init(U0, problem.eps, "navier-stokes", vg, problem.policy,
                              problem.transport_config)


def cmd_run(args):
    cfg = load_config(args.config, args.set)
    kernel = None
    if cfg.model == "boltzmann":
        from .boltzmann import build_spectral_kernel
        kernel = build_spectral_kernel(cfg.vgrid, cfg.B0, cache_dir=args.kernel_cache)
    from .bgk import CollisionFrequencyPolicy
    problem = ProblemSpec(cfg.epsilon, cfg.vgrid, cfg.xgrid, cfg.model, CollisionFrequencyPolicy.parse(cfg.mu),
                          cfg.transport, kernel)
    f0 = _initial(cfg, problem)
    every = cfg.checkpoint_every or cfg.n_steps or 1
    tr = run(cfg.scheme, problem, f0, cfg.dt, cfg.n_steps, bootstrap_method=cfg.bootstrap,
             checkpoint_every=every)
    out = cfg.out_path
    figures = cfg.figures or args.figures
    _out(out / f"{cfg.prefix}_diagnostics.csv", list(DIAG_COLUMNS),
         [[int(r[0]), *r[1:]] for r in tr.diagnostics.tolist()], figures)
    final = cfg.n_steps
    ckpts = dict(tr.checkpoints)
    ckpts.setdefault(final, tr.f)
    for step, f in sorted(ckpts.items()):
        p = write_moments(out / f"{cfg.prefix}_moments_{step:06d}.csv", f, problem.vgrid, problem.xgrid)
        if figures:
            render_csv(p)
        if cfg.fields:
            save_field(out / f"{cfg.prefix}_field_{step:06d}.bin", f, problem.vgrid, step, step * cfg.dt)
    drift = tr.drift()
    print(json.dumps({"scheme": cfg.scheme, "steps": cfg.n_steps, "drift": drift}), file=sys.stderr)
    return 0


def cmd_convergence(args):
    overrides = {}
    for text in args.set or []:
        key, _, val = text.partition("=")
        overrides[key.strip()] = _coerce(ex.ExperimentPreset, key.strip(), val.strip())
    preset = ex.get_preset(args.preset, **overrides)
    rows = ex.convergence_study(preset, args.scheme, args.eps, workers=args.workers,
                                cache_dir=args.kernel_cache)
    _out(args.out, ["scheme", "epsilon", "dt", "error", "flag"],
         [(r.scheme, r.epsilon, r.dt, r.error, r.flag) for r in rows], args.figures)
    fits = []
    for fit in _fits(rows):
        fits.append((fit.scheme, fit.epsilon, get_scheme(fit.scheme).declared_order, fit.slope, fit.residual,
                     fit.n_points, " ".join(f"{d:.6g}" for d in fit.excluded)))
    if fits:
        target = None if args.out in (None, "-") else Path(args.out).with_name(Path(args.out).stem + "_orders.csv")
        _out(target, ["scheme", "epsilon", "nominal", "slope", "residual", "n_points", "excluded_dt"], fits)
    return 0


def _fits(rows):
    out = []
    for key in dict.fromkeys((r.scheme, r.epsilon) for r in rows):
        sub = [r for r in rows if (r.scheme, r.epsilon) == key]
        try:
            out.extend(ex.fit_order(sub))
        except ex.ExperimentError as exc:
            log.info("no fit for %s eps=%g: %s", key[0], key[1], exc)
    return out


def _coerce(cls, key, val):
    import dataclasses
    fields = {f.name: f for f in dataclasses.fields(cls)}
    if key not in fields or key == "name":
        raise ex.ExperimentError(f"unknown preset field {key!r}")
    default = getattr(ex.PRESETS["bgk-nonhomogeneous"], key)
    if isinstance(default, tuple):
        items = [v for v in val.replace(",", " ").split() if v]
        if key == "schemes":
            return tuple(items)
        return tuple(int(v) if key == "ladder" else float(v) for v in items)
    if key == "dt_max":
        return None if val.lower() == "none" else float(val)
    if isinstance(default, bool):
        return val.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(val)
    if isinstance(default, float):
        return float(val)
    return val


def cmd_report(args):
    for p in args.csv:
        print(f"wrote {render_csv(p)}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kinetic-imex", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("order-check", help="order-condition residuals of the built-in schemes")
    p.add_argument("--scheme", action="append")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--misprints", action="store_true", help="also list the corrected misprints")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_order_check)

    p = sub.add_parser("stability-region", help="penalized stability boundaries a*(z)")
    p.add_argument("--scheme", action="append")
    p.add_argument("--xi", type=float, nargs="+", default=list(ex.STABILITY_XI))
    p.add_argument("--z-min", type=float, default=1e-2)
    p.add_argument("--z-max", type=float, default=1e2)
    p.add_argument("--n-z", type=int, default=41)
    p.add_argument("--a-max", type=float, default=4.0)
    p.add_argument("--modes", type=int, default=64)
    p.add_argument("--out", default="-")
    p.add_argument("--figures", action="store_true")
    p.set_defaults(func=cmd_stability_region)

    p = sub.add_parser("monotonicity-table", help="nonnegativity intervals against the printed table")
    p.add_argument("--xi", type=float, nargs="+")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_monotonicity_table)

    p = sub.add_parser("run", help="one simulation from a config file")
    p.add_argument("--config")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    p.add_argument("--figures", action="store_true")
    p.add_argument("--kernel-cache")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("convergence", help="temporal convergence study of a preset")
    p.add_argument("--preset", required=True, choices=sorted(ex.PRESETS))
    p.add_argument("--scheme", action="append")
    p.add_argument("--eps", type=float, action="append")
    p.add_argument("--set", action="append", default=[], metavar="FIELD=VALUE")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--kernel-cache")
    p.add_argument("--out", default="-")
    p.add_argument("--figures", action="store_true")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("report", help="render figures for CSV files written by this tool")
    p.add_argument("csv", nargs="+")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # reported as one machine-readable line
        if args.verbose:
            raise
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
