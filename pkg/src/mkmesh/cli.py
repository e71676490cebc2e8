"""Command-line entry point ``mkmesh``."""
from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import formats
from .harness import RAY_SLOPES, ExperimentPlan, run_convergence, run_plan, run_stability_report
from .nodeset import DomainSpec, generate_nodes, load_nodes, save_nodes
from .respower import half_disc_rule, optimize_weights, ray_curve
from .schemes import METHODS, SchemeSpec, build_bundle
from .solver.pde import run_advection_diffusion, run_burgers, run_poisson_disc, run_poisson_periodic

log = logging.getLogger("mkmesh")


def _spacing(text: str) -> float:
    try:
        value = float(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad spacing {text!r}") from exc
    if value <= 0:
        raise argparse.ArgumentTypeError("spacing must be positive")
    return value


def _spacings(text: str) -> tuple:
    return tuple(_spacing(t) for t in text.split(",") if t.strip())


def _domain(args) -> DomainSpec:
    if args.domain == "disc":
        return DomainSpec.disc(args.radius)
    return DomainSpec.periodic(args.width, args.height)


def _nodes(args):
    if getattr(args, "nodes", None):
        return load_nodes(args.nodes)
    return generate_nodes(_domain(args), args.spacing, args.seed)


def _add_node_args(p, spacing_required=False):
    p.add_argument("--nodes", help="node file written by gen-nodes (overrides the generation options)")
    p.add_argument("--domain", choices=("periodic", "disc"), default="periodic")
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--height", type=float, default=None)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--spacing", type=_spacing, required=spacing_required, default=None if spacing_required else 0.05,
                   help="mean nodal spacing s, e.g. 0.05 or 1/20")
    p.add_argument("--seed", type=int, default=1)


def _add_scheme_args(p, default_method="labfm"):
    p.add_argument("--method", choices=METHODS, default=default_method)
    p.add_argument("--m", type=int, default=None, help="consistency order (default: 0 SPH, 2 RBF-FD, 4 LABFM)")
    p.add_argument("--h-over-s", type=float, default=1.3, help="SPH smoothing length over spacing")
    p.add_argument("--km", type=float, default=None, help="optimisation radius as a fraction of k_Ny")


def _scheme(args) -> SchemeSpec:
    m = args.m if args.m is not None else {"sph": 0, "rbf-fd": 2, "labfm": 4}[args.method]
    return SchemeSpec(args.method, m, h_over_s=args.h_over_s, km_fraction=args.km)


def cmd_gen_nodes(args):
    nodes = generate_nodes(_domain(args), args.spacing, args.seed)
    save_nodes(nodes, args.out)
    print(f"{len(nodes)} nodes -> {args.out}")


def cmd_respower(args):
    nodes = _nodes(args)
    out = Path(args.out)
    if args.weights:
        sets = {"input": formats.read_weights(args.weights, nodes)}
    else:
        bundle = build_bundle(nodes, _scheme(args), ops=(args.op,), fuse=not args.no_fuse)
        sets = {"sk1": bundle.get(args.op, "sk1"), "sk2": bundle.get(args.op, "sk2")}
        if not args.no_fuse:
            sets["mk"] = bundle.get(args.op, "mk")
    for name, ws in sets.items():
        curves = [ray_curve(nodes, ws, l, args.samples) for l in RAY_SLOPES]
        formats.write_ray_curves(out / f"raycurve_{ws.operator}_{name}.csv", curves)
        if args.dump_weights:
            formats.write_weights(out / f"weights_{ws.operator}_{name}.csv", ws)
    print(f"ray curves for {', '.join(sets)} -> {out}")


def cmd_optimize(args):
    nodes = _nodes(args)
    scheme = _scheme(args)
    bundle = build_bundle(nodes, scheme, ops=(args.op,), fuse=False)
    k_m = scheme.k_m(nodes)
    comb = optimize_weights(bundle.get(args.op, "sk1"), bundle.get(args.op, "sk2"), k_m, half_disc_rule(k_m))
    formats.write_combination(args.out, comb, bundle.stencils.centers)
    n_deg = int(np.count_nonzero(comb.degenerate))
    print(f"c_hat median {np.median(comb.c_hat):.4g}, {n_deg} degenerate nodes -> {args.out}")


def _write_report(report, out: Path, stem: str):
    formats.write_error_series(out / f"errors_{stem}.csv", report)
    for name, values in report.fields.items():
        formats.write_field(out / f"field_{stem}_{name}.csv", report.nodes.x, report.nodes.y, values)
    last = list(report.rows())[-1]
    print(f"{stem}: t={last[0]:.4g} l2_sk={last[1]:.4e} l2_mk={last[2]:.4e} R={last[3]:.4f}")
    if report.info.get("diverged"):
        print(f"diverged: {report.info['diverged']}")


def cmd_solve_poisson(args):
    if args.domain == "disc":
        report = run_poisson_disc(args.spacing, args.m, args.seed, solver=args.solver)
    else:
        report = run_poisson_periodic(args.spacing, args.m, args.seed, solver=args.solver)
    _write_report(report, Path(args.out), f"poisson-{args.domain}")


def cmd_solve_ad(args):
    report = run_advection_diffusion(args.case, args.spacing, args.Re, args.m, args.t_end, args.report_dt,
                                     args.seed, args.modes, filtered=args.filtered)
    _write_report(report, Path(args.out), f"advection-diffusion-{args.case}")


def cmd_solve_burgers(args):
    report = run_burgers(args.spacing, args.Re, args.m, args.t_end, args.report_dt, args.seed, args.filtered)
    _write_report(report, Path(args.out), "burgers")


def cmd_eigen(args):
    scheme = _scheme(args)
    plan = ExperimentPlan("stability", scheme.method, (scheme.m,), (args.spacing,), (args.seed,),
                          k_m="default" if args.km is None else str(args.km), output=args.out,
                          h_over_s=args.h_over_s)
    for r in run_stability_report(plan, operators=tuple(args.ops.split(","))):
        print(f"{r.label} {r.operator:9s} {r.variant:3s} max Re = {r.max_real: .3e}  radius = {r.radius:.3e}")


def cmd_convergence(args):
    scheme = _scheme(args)
    plan = ExperimentPlan("convergence", scheme.method, (scheme.m,), args.spacings, tuple(args.seeds),
                          k_m=args.k_m, output=args.out, h_over_s=args.h_over_s,
                          operators=tuple(args.ops.split(",")))
    result = run_convergence(plan)
    for op in plan.operators:
        ratios = ", ".join(f"s={s:.4g}: R={r:.3f}" for s, r in result.ratios(scheme.method, scheme.m, op))
        slope, resid = result.slopes[(scheme.method, scheme.m, op, "mk")]
        print(f"{op}: {ratios}; fused slope {slope:.2f} (residual {resid:.2g})")


def cmd_run(args):
    plan = ExperimentPlan.from_file(args.plan)
    run_plan(plan, args.out)
    print(f"manifest -> {Path(args.out or plan.output) / 'manifest.json'}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mkmesh", description="Multi-kernel meshless operators")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-nodes", help="generate a node set")
    _add_node_args(p, spacing_required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_nodes)

    p = sub.add_parser("respower", help="ray curves of effective wavenumbers")
    _add_node_args(p)
    _add_scheme_args(p)
    p.add_argument("--op", default="ddx")
    p.add_argument("--weights", help="weight dump CSV to analyse instead of building weights")
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--no-fuse", action="store_true")
    p.add_argument("--dump-weights", action="store_true")
    p.add_argument("--out", default="respower")
    p.set_defaults(func=cmd_respower)

    p = sub.add_parser("optimize", help="per-node fusion coefficients")
    _add_node_args(p)
    _add_scheme_args(p)
    p.add_argument("--op", default="ddx")
    p.add_argument("--out", default="combination.csv")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("solve-poisson", help="periodic or disc Poisson problem")
    p.add_argument("--domain", choices=("periodic", "disc"), default="periodic")
    p.add_argument("--spacing", type=_spacing, default=1 / 20)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--solver", choices=("bicgstab", "dense"), default="bicgstab")
    p.add_argument("--out", default="poisson")
    p.set_defaults(func=cmd_solve_poisson)

    p = sub.add_parser("solve-ad", help="advection-diffusion benchmark")
    p.add_argument("--case", type=int, choices=(1, 2), default=1)
    p.add_argument("--spacing", type=_spacing, default=1 / 20)
    p.add_argument("--Re", type=float, default=50.0)
    p.add_argument("--m", type=int, default=6)
    p.add_argument("--t-end", type=float, default=0.5)
    p.add_argument("--report-dt", type=float, default=0.01)
    p.add_argument("--modes", type=int, default=3)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--filtered", action="store_true")
    p.add_argument("--out", default="ad")
    p.set_defaults(func=cmd_solve_ad)

    p = sub.add_parser("solve-burgers", help="viscous Burgers benchmark")
    p.add_argument("--spacing", type=_spacing, default=1 / 20)
    p.add_argument("--Re", type=float, default=10.0)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--t-end", type=float, default=0.25)
    p.add_argument("--report-dt", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--filtered", action="store_true")
    p.add_argument("--out", default="burgers")
    p.set_defaults(func=cmd_solve_burgers)

    p = sub.add_parser("eigen", help="spectra of global operators")
    p.add_argument("--spacing", type=_spacing, default=1 / 21)
    p.add_argument("--seed", type=int, default=7)
    _add_scheme_args(p)
    p.add_argument("--ops", default="ddx,ddy,laplacian")
    p.add_argument("--out", default="eigen")
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("convergence", help="test-function convergence sweep")
    p.add_argument("--spacings", type=_spacings, default=(1 / 10, 1 / 20, 1 / 40))
    p.add_argument("--seeds", type=int, nargs="+", default=[1])
    _add_scheme_args(p)
    p.add_argument("--k-m", default="convergence", help="default | convergence | fraction of k_Ny")
    p.add_argument("--ops", default="ddx,laplacian")
    p.add_argument("--out", default="convergence")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("run", help="execute an experiment plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--out", default=None, help="override the plan's output directory")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "height", 0) is None:
        args.height = args.width
    try:
        args.func(args)
    except (ValueError, FileNotFoundError, ArithmeticError) as exc:
        print(f"mkmesh: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
