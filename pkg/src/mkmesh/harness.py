"""Declarative experiment plans: convergence sweeps, resolving-power reports,
stability spectra and PDE benchmark suites.

A plan is an INI file with a ``[plan]`` section and, for PDE suites, an
optional ``[pde]`` section::

    [plan]
    kind = convergence
    method = labfm
    orders = 4, 6, 8
    spacings = 1/10, 1/20, 1/40
    seeds = 1
    k_m = convergence
    output = out/labfm

Every run writes CSV files into ``output`` together with ``manifest.json``,
which lists each artifact with the hash of the configuration that produced
it.  Output files contain no timestamps, so an identical plan reproduces
them byte for byte.
"""
from __future__ import annotations

import configparser
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import formats
from .nodeset import DomainSpec, generate_nodes
from .respower import improvement_metric, ray_curve
from .schemes import KERNEL_PAIRS, METHODS, SchemeSpec, build_bundle, convergence_km
from .solver.operators import assemble, spectrum
from .solver.oracles import l2_norm, ratio_R, test_function
from .solver.pde import run_advection_diffusion, run_burgers, run_poisson_disc, run_poisson_periodic

__all__ = [
    "ExperimentPlan",
    "SweepRecord",
    "SweepResult",
    "fit_slope",
    "run_convergence",
    "run_respower_report",
    "run_stability_report",
    "run_pde_suite",
    "run_plan",
    "RAY_SLOPES",
    "PDE_SYSTEMS",
]

log = logging.getLogger(__name__)

KINDS = ("convergence", "respower", "stability", "pde")
RAY_SLOPES = (0.0, 1.0, 2.0)
PDE_SYSTEMS = ("poisson-periodic", "poisson-disc", "advection-diffusion-1", "advection-diffusion-2", "burgers")


def _floats(text: str) -> tuple:
    return tuple(float(Fraction(t.strip())) for t in text.split(",") if t.strip())


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _words(text: str) -> tuple:
    return tuple(t.strip() for t in text.split(",") if t.strip())


@dataclass
class ExperimentPlan:
    """One experiment over a method, its orders, resolutions and seeds.

    ``k_m`` is ``"default"`` (method fraction of Nyquist), ``"convergence"``
    (largest wavenumber of the convergence test function, clipped to
    Nyquist) or a number interpreted as a fraction of the Nyquist wavenumber.
    """

    kind: str
    method: str = "labfm"
    orders: tuple = ()
    spacings: tuple = ()
    seeds: tuple = (1,)
    k_m: str = "default"
    output: str = "out"
    kernels: tuple = ()
    h_over_s: float = 1.3
    operators: tuple = ("ddx", "laplacian")
    # PDE suite
    systems: tuple = PDE_SYSTEMS
    reynolds: tuple = (50.0, 200.0)
    burgers_re: float = 10.0
    t_end: float = 0.5
    burgers_t_end: float = 0.25
    report_dt: float = 0.01
    modes: int = 3
    filtered: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not self.orders:
            self.orders = (0,) if self.method == "sph" else ((2,) if self.method == "rbf-fd" else (4,))
        if not self.spacings:
            raise ValueError("a plan needs at least one resolution")
        if any(not s > 0 for s in self.spacings):
            raise ValueError("spacings must be positive")
        if not self.seeds:
            raise ValueError("a plan needs at least one seed")
        if self.kernels and tuple(self.kernels) != KERNEL_PAIRS[self.method]:
            raise ValueError(f"kernel pair {self.kernels} is not available for {self.method}; "
                             f"use {KERNEL_PAIRS[self.method]}")
        self.kernels = KERNEL_PAIRS[self.method]
        for name in self.systems:
            if name not in PDE_SYSTEMS:
                raise ValueError(f"unknown PDE system {name!r}")
        if self.k_m not in ("default", "convergence"):
            frac = float(self.k_m)
            if not 0 < frac <= 1:
                raise ValueError("k_m fraction must lie in (0, 1]")

    @classmethod
    def from_file(cls, path) -> "ExperimentPlan":
        cfg = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        if not cfg.read(path):
            raise FileNotFoundError(path)
        return cls.from_config(cfg)

    @classmethod
    def from_string(cls, text: str) -> "ExperimentPlan":
        cfg = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        cfg.read_string(text)
        return cls.from_config(cfg)

    @classmethod
    def from_config(cls, cfg: configparser.ConfigParser) -> "ExperimentPlan":
        if "plan" not in cfg:
            raise ValueError("plan file needs a [plan] section")
        p = cfg["plan"]
        kw = {"kind": p.get("kind"), "spacings": _floats(p.get("spacings", ""))}
        if "method" in p:
            kw["method"] = p["method"]
        if "orders" in p:
            kw["orders"] = _ints(p["orders"])
        if "seeds" in p:
            kw["seeds"] = _ints(p["seeds"])
        for key in ("k_m", "output"):
            if key in p:
                kw[key] = p[key]
        if "kernels" in p:
            kw["kernels"] = _words(p["kernels"])
        if "operators" in p:
            kw["operators"] = _words(p["operators"])
        if "h_over_s" in p:
            kw["h_over_s"] = p.getfloat("h_over_s")
        if "pde" in cfg:
            d = cfg["pde"]
            if "systems" in d:
                kw["systems"] = _words(d["systems"])
            if "re" in d:
                kw["reynolds"] = _floats(d["re"])
            for key in ("burgers_re", "t_end", "burgers_t_end", "report_dt"):
                if key in d:
                    kw[key] = d.getfloat(key)
            if "modes" in d:
                kw["modes"] = d.getint("modes")
            if "filtered" in d:
                kw["filtered"] = d.getboolean("filtered")
        return cls(**kw)

    def to_dict(self) -> dict:
        return asdict(self)

    def scheme(self, m: int) -> SchemeSpec:
        return SchemeSpec(self.method, m, h_over_s=self.h_over_s)

    def optimisation_km(self, nodes, scheme: SchemeSpec) -> float:
        if self.k_m == "default":
            return scheme.k_m(nodes)
        if self.k_m == "convergence":
            return convergence_km(nodes)
        return float(self.k_m) * nodes.k_nyquist


class _Writer:
    """Collects artifacts and writes the manifest."""

    def __init__(self, plan: ExperimentPlan, out=None):
        self.plan = plan
        self.root = Path(out if out is not None else plan.output)
        self.entries = []

    def add(self, name: str, config: dict, write):
        path = self.root / name
        write(path)
        self.entries.append({"path": name, "config_hash": formats.config_hash(config), "config": config})
        return path

    def finish(self) -> Path:
        plan = self.plan.to_dict()
        manifest = {"plan": plan, "plan_hash": formats.config_hash(plan), "artifacts": self.entries}
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=formats._fmt) + "\n")
        return path


# --------------------------------------------------------------------------
# convergence


@dataclass
class SweepRecord:
    method: str
    m: int
    s: float
    seed: int
    operator: str
    l2_sk1: float = math.nan
    l2_sk2: float = math.nan
    l2_mk: float = math.nan
    error: str = ""

    @property
    def R(self) -> float:
        """Fused error over the kernel-1 baseline."""
        return float(ratio_R(self.l2_mk, self.l2_sk1))


@dataclass
class SweepResult:
    records: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)

    def select(self, method=None, m=None, operator=None):
        return [r for r in self.records if (method is None or r.method == method)
                and (m is None or r.m == m) and (operator is None or r.operator == operator)]

    def ratios(self, method, m, operator="ddx"):
        """(s, R) pairs ordered from coarse to fine, averaged over seeds."""
        recs = [r for r in self.select(method, m, operator) if not r.error]
        out = []
        for s in sorted({r.s for r in recs}, reverse=True):
            vals = [r.R for r in recs if r.s == s]
            out.append((s, float(np.mean(vals))))
        return out


def fit_slope(s, err):
    """Least-squares slope of log(err) against log(s) and the RMS residual.

    Non-finite or non-positive errors are dropped; fewer than three usable
    points give ``(nan, nan)``.
    """
    s = np.asarray(s, dtype=float)
    err = np.asarray(err, dtype=float)
    ok = np.isfinite(err) & (err > 0)
    if ok.sum() < 3:
        return math.nan, math.nan
    x, y = np.log(s[ok]), np.log(err[ok])
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    return float(coef[0]), float(np.sqrt(np.mean(resid ** 2)))


def _fit_all(records):
    slopes = {}
    keys = sorted({(r.method, r.m, r.operator) for r in records})
    for method, m, op in keys:
        recs = [r for r in records if (r.method, r.m, r.operator) == (method, m, op) and not r.error]
        spacings = sorted({r.s for r in recs})
        for variant in ("sk1", "sk2", "mk"):
            # geometric mean over seeds at each resolution
            errs = [math.exp(np.mean([math.log(getattr(r, f"l2_{variant}")) for r in recs if r.s == s]))
                    for s in spacings]
            slopes[(method, m, op, variant)] = fit_slope(spacings, errs)
    return slopes


def convergence_cell(method, m, s, seed, operators=("ddx", "laplacian"), k_m="convergence", h_over_s=1.3):
    """Errors of kernel-1, kernel-2 and fused operators on the test function."""
    plan = ExperimentPlan("convergence", method, (m,), (s,), (seed,), k_m, h_over_s=h_over_s, operators=operators)
    return _convergence_cell(plan, m, s, seed)


def _convergence_cell(plan: ExperimentPlan, m, s, seed):
    nodes = generate_nodes(DomainSpec.periodic(), s, seed)
    scheme = plan.scheme(m)
    bundle = build_bundle(nodes, scheme, ops=plan.operators, fuse=False)
    bundle.fuse(plan.optimisation_km(nodes, scheme))
    phi, (gx, gy), lap = test_function(nodes.x, nodes.y)
    exact = {"ddx": gx, "ddy": gy, "laplacian": lap}
    out = []
    for op in bundle.sk1:
        errs = {v: l2_norm(bundle.get(op, v).apply(phi), exact[op]) for v in ("sk1", "sk2", "mk")}
        out.append(SweepRecord(plan.method, m, s, seed, op, errs["sk1"], errs["sk2"], errs["mk"]))
    return out


def run_convergence(plan: ExperimentPlan, out=None) -> SweepResult:
    """Sweep (order, resolution, seed); failed cells are recorded, not raised."""
    writer = _Writer(plan, out)
    records = []
    for m in plan.orders:
        for s in plan.spacings:
            for seed in plan.seeds:
                try:
                    records.extend(_convergence_cell(plan, m, s, seed))
                except Exception as exc:  # noqa: BLE001 - a failed cell is data
                    log.warning("cell %s m=%s s=%s seed=%s failed: %s", plan.method, m, s, seed, exc)
                    for op in plan.operators:
                        records.append(SweepRecord(plan.method, m, s, seed, op, error=f"{type(exc).__name__}: {exc}"))
    result = SweepResult(records, _fit_all(records))
    rows = [(r.method, r.m, r.s, r.seed, r.operator, r.l2_sk1, r.l2_sk2, r.l2_mk, r.R, r.error) for r in records]
    writer.add("convergence.csv", plan.to_dict(), lambda p: formats.write_rows(
        p, ["method", "m", "s", "seed", "operator", "l2_sk1", "l2_sk2", "l2_mk", "R", "error"], rows))
    srows = [(k[0], k[1], k[2], k[3], v[0], v[1]) for k, v in sorted(result.slopes.items())]
    writer.add("slopes.csv", plan.to_dict(), lambda p: formats.write_rows(
        p, ["method", "m", "operator", "variant", "slope", "fit_residual"], srows))
    writer.finish()
    return result


# --------------------------------------------------------------------------
# resolving power


def run_respower_report(plan: ExperimentPlan, out=None) -> dict:
    """Ray curves (k_y = l k_x, l = 0, 1, 2) and improvement tables per order and operator.

    Returns ``{(label, operator): {slope: epsilon array}}`` with the
    percentage improvements of the fused operator over kernel 1.
    """
    writer = _Writer(plan, out)
    s, seed = plan.spacings[0], plan.seeds[0]
    nodes = generate_nodes(DomainSpec.periodic(), s, seed)
    summary = {}
    for m in plan.orders:
        scheme = plan.scheme(m)
        bundle = build_bundle(nodes, scheme, ops=plan.operators, fuse=False)
        k_m = plan.optimisation_km(nodes, scheme)
        bundle.fuse(k_m)
        for op in bundle.sk1:
            cfg = {"method": plan.method, "m": m, "s": s, "seed": seed, "operator": op, "k_m": k_m,
                   "h_over_s": plan.h_over_s}
            curves = {v: [ray_curve(nodes, bundle.get(op, v), l) for l in RAY_SLOPES] for v in ("sk1", "mk")}
            for v, cs in curves.items():
                writer.add(f"raycurve_{scheme.label}_{op}_{v}.csv", cfg | {"variant": v},
                           lambda p, cs=cs: formats.write_ray_curves(p, cs))
            eps = {l: improvement_metric(a, b) for l, a, b in zip(RAY_SLOPES, curves["sk1"], curves["mk"])}
            summary[(scheme.label, op)] = eps
            k_hat = curves["sk1"][0].k_hat
            rows = [(k,) + tuple(eps[l][i] for l in RAY_SLOPES) for i, k in enumerate(k_hat)]
            writer.add(f"epsilon_{scheme.label}_{op}.csv", cfg, lambda p, rows=rows: formats.write_rows(
                p, ["k_hat"] + [f"eps_l{int(l)}" for l in RAY_SLOPES], rows))
            comb = bundle.fusion[op]
            writer.add(f"combination_{scheme.label}_{op}.csv", cfg,
                       lambda p, comb=comb: formats.write_combination(p, comb, bundle.stencils.centers))
    writer.finish()
    return summary


# --------------------------------------------------------------------------
# stability


@dataclass
class SpectrumSummary:
    label: str
    operator: str
    variant: str
    max_real: float
    radius: float

    @property
    def relative(self) -> float:
        return self.max_real / self.radius if self.radius > 0 else math.nan


def run_stability_report(plan: ExperimentPlan, out=None, operators=("ddx", "ddy", "laplacian")) -> list:
    """Full spectra of the global kernel-1 and fused operators on one node set."""
    writer = _Writer(plan, out)
    s, seed = plan.spacings[0], plan.seeds[0]
    nodes = generate_nodes(DomainSpec.periodic(), s, seed)
    summary = []
    for m in plan.orders:
        scheme = plan.scheme(m)
        bundle = build_bundle(nodes, scheme, ops=operators, fuse=False)
        bundle.fuse(plan.optimisation_km(nodes, scheme))
        for op in bundle.sk1:
            for v in ("sk1", "mk"):
                ev = spectrum(assemble(bundle.get(op, v)))
                cfg = {"method": plan.method, "m": m, "s": s, "seed": seed, "operator": op, "variant": v,
                       "k_m": plan.k_m, "h_over_s": plan.h_over_s}
                writer.add(f"spectrum_{scheme.label}_{op}_{v}.csv", cfg, lambda p, ev=ev: formats.write_spectrum(p, ev))
                summary.append(SpectrumSummary(scheme.label, op, v, float(ev.real.max()), float(np.abs(ev).max())))
    rows = [(r.label, r.operator, r.variant, r.max_real, r.radius, r.relative) for r in summary]
    writer.add("stability_summary.csv", plan.to_dict(), lambda p: formats.write_rows(
        p, ["scheme", "operator", "variant", "max_re", "spectral_radius", "relative"], rows))
    writer.finish()
    return summary


# --------------------------------------------------------------------------
# PDE suite


def _pde_runs(plan: ExperimentPlan, m, s, seed):
    for system in plan.systems:
        if system == "poisson-periodic":
            yield system, {}, lambda: run_poisson_periodic(s, m, seed, plan.method)
        elif system == "poisson-disc":
            yield system, {}, lambda: run_poisson_disc(s, m, seed)
        elif system.startswith("advection-diffusion"):
            case = int(system[-1])
            for re_ in plan.reynolds:
                yield system, {"Re": re_}, (lambda case=case, re_=re_: run_advection_diffusion(
                    case, s, re_, m, plan.t_end, plan.report_dt, seed, plan.modes, filtered=plan.filtered,
                    method=plan.method))
        else:
            yield system, {"Re": plan.burgers_re}, lambda: run_burgers(
                s, plan.burgers_re, m, plan.burgers_t_end, plan.report_dt, seed, plan.filtered, plan.method)


def run_pde_suite(plan: ExperimentPlan, out=None) -> list:
    """Every (system, order, resolution, seed) cell; returns (config, ErrorReport or error text)."""
    writer = _Writer(plan, out)
    results = []
    for m in plan.orders:
        for s in plan.spacings:
            for seed in plan.seeds:
                for system, extra, run in _pde_runs(plan, m, s, seed):
                    cfg = {"system": system, "method": plan.method, "m": m, "s": s, "seed": seed,
                           "t_end": plan.t_end, "report_dt": plan.report_dt, "filtered": plan.filtered} | extra
                    stem = f"{system}_m{m}_s{s:.6g}_seed{seed}" + "".join(f"_{k}{v:g}" for k, v in extra.items())
                    try:
                        report = run()
                    except Exception as exc:  # noqa: BLE001 - a failed cell is data
                        log.warning("%s failed: %s", stem, exc)
                        results.append((cfg, f"{type(exc).__name__}: {exc}"))
                        continue
                    writer.add(f"errors_{stem}.csv", cfg, lambda p, r=report: formats.write_error_series(p, r))
                    for name, values in report.fields.items():
                        writer.add(f"field_{stem}_{name}.csv", cfg | {"field": name},
                                   lambda p, v=values, r=report: formats.write_field(p, r.nodes.x, r.nodes.y, v))
                    if report.info.get("diverged"):
                        log.warning("%s diverged: %s", stem, report.info["diverged"])
                    results.append((cfg, report))
    writer.finish()
    return results


def run_plan(plan: ExperimentPlan, out=None):
    """Dispatch on ``plan.kind``."""
    runner = {"convergence": run_convergence, "respower": run_respower_report,
              "stability": run_stability_report, "pde": run_pde_suite}[plan.kind]
    return runner(plan, out)
