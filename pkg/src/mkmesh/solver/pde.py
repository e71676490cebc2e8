"""Benchmark PDE runs comparing single-kernel and multi-kernel operators.

Each runner builds one node set, the kernel-1 (baseline) and fused
operators on a shared stencil, solves with both, and reports relative L2
errors against the analytic solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..nodeset import DomainSpec, NodeSet, generate_nodes
from ..respower import calibrate_filter, combine, default_filter_targets, effective_response
from ..schemes import OperatorBundle, SchemeSpec, build_bundle
from ..weights import labfm_stencils
from .operators import assemble
from .oracles import (
    ad_exact_case1,
    ad_exact_case2,
    burgers_exact,
    disc_poisson_problem,
    l2_norm,
    periodic_poisson_problem,
    ratio_R,
)
from .poisson import poisson_solve
from .timestepping import BurgersOperator, Filter, advection_diffusion_matrix, matrix_power, rk4_propagator, \
    rk4_step, timestep

__all__ = [
    "ErrorReport",
    "PDEConfig",
    "VARIANTS",
    "run_poisson_periodic",
    "run_poisson_disc",
    "run_advection_diffusion",
    "run_burgers",
    "disc_stencils",
]

VARIANTS = ("sk", "mk")
NEAR_BOUNDARY_GROWTH = 1.5


@dataclass
class PDEConfig:
    system: str
    s: float
    m: int = 6
    Re: float = 50.0
    a: tuple = (1.0, 0.0)
    t_end: float = 0.5
    report_dt: float = 0.01
    seed: int = 1
    modes: int = 3
    filtered: bool = False
    method: str = "labfm"

    def __post_init__(self):
        if self.system not in ("poisson-periodic", "poisson-disc", "advection-diffusion-1",
                               "advection-diffusion-2", "burgers"):
            raise ValueError(f"unknown system {self.system!r}")
        if not self.Re > 0:
            raise ValueError("Re must be positive")


@dataclass
class ErrorReport:
    """L2 errors of the baseline (sk) and fused (mk) solutions, with R = mk/sk."""

    times: np.ndarray
    l2_sk: np.ndarray
    l2_mk: np.ndarray
    info: dict = field(default_factory=dict)
    nodes: NodeSet = None
    fields: dict = field(default_factory=dict)

    @property
    def R(self) -> np.ndarray:
        return ratio_R(self.l2_mk, self.l2_sk)

    def rows(self):
        for t, a, b, r in zip(self.times, self.l2_sk, self.l2_mk, np.atleast_1d(self.R)):
            yield float(t), float(a), float(b), float(r)

    def first_crossing(self, level: float):
        """Interpolated time at which the sk error first reaches ``level`` (None if never)."""
        e = np.asarray(self.l2_sk)
        idx = np.nonzero(e >= level)[0]
        if len(idx) == 0:
            return None
        i = idx[0]
        if i == 0:
            return float(self.times[0])
        # log-linear interpolation between the bracketing samples
        t0, t1 = self.times[i - 1], self.times[i]
        e0, e1 = e[i - 1], e[i]
        if e0 <= 0:
            return float(t1)
        f = (math.log(level) - math.log(e0)) / (math.log(e1) - math.log(e0))
        return float(t0 + f * (t1 - t0))

    def at(self, t: float):
        """(sk, mk) errors log-interpolated at time ``t``."""
        times = np.asarray(self.times)
        out = []
        for e in (self.l2_sk, self.l2_mk):
            le = np.log(np.maximum(np.asarray(e), 1e-300))
            out.append(float(np.exp(np.interp(t, times, le))))
        return tuple(out)


def _variants(bundle: OperatorBundle, op: str):
    return {"sk": bundle.get(op, "sk1"), "mk": bundle.get(op, "mk")}


# --------------------------------------------------------------------------
# Poisson


def run_poisson_periodic(s: float, m: int = 4, seed: int = 1, method: str = "labfm", solver="bicgstab",
                         nodes: NodeSet = None) -> ErrorReport:
    """Periodic unit square, forcing -8 pi^2 sin(2 pi x) sin(2 pi y)."""
    nodes = nodes or generate_nodes(DomainSpec.periodic(), s, seed)
    bundle = build_bundle(nodes, SchemeSpec(method, m), ops=("laplacian",))
    f, exact = periodic_poisson_problem(nodes.x, nodes.y)
    errs, fields = {}, {}
    info = {"n": len(nodes)}
    for name, ws in _variants(bundle, "laplacian").items():
        res = poisson_solve(assemble(ws), f, bc="periodic", method=solver)
        errs[name] = l2_norm(res.phi, exact - exact.mean())
        fields[name] = res.phi
        info[f"iterations_{name}"] = res.iterations
        info[f"residual_{name}"] = res.residual
    fields["exact"] = exact - exact.mean()
    return ErrorReport(np.array([0.0]), np.array([errs["sk"]]), np.array([errs["mk"]]), info, nodes, fields)


def disc_stencils(nodes: NodeSet, m: int):
    """LABFM stencils for interior disc nodes; those whose stencil meets the circle grow 1.5x."""
    rows = np.nonzero(nodes.interior)[0]
    first = labfm_stencils(nodes, m, rows=rows)
    gap = nodes.domain.radius - np.hypot(nodes.x[rows], nodes.y[rows])
    start = np.full(len(nodes), 2.4 * nodes.s * math.sqrt(m / 4.0))
    near = gap < first.radius
    start[rows[near]] = first.radius[near] * NEAR_BOUNDARY_GROWTH
    return labfm_stencils(nodes, m, start=start, rows=rows)


def run_poisson_disc(s: float, m: int = 4, seed: int = 1, solver="bicgstab", nodes: NodeSet = None) -> ErrorReport:
    """Unit disc with phi = r^4 cos(pi r / 2) cos(theta) and phi = 0 on the circle."""
    nodes = nodes or generate_nodes(DomainSpec.disc(1.0), s, seed)
    st = disc_stencils(nodes, m)
    bundle = build_bundle(nodes, SchemeSpec("labfm", m), ops=("laplacian",), stencils=st)
    f, exact = disc_poisson_problem(nodes.x, nodes.y)
    errs, fields = {}, {}
    info = {"n": len(nodes), "boundary": int(nodes.boundary.sum())}
    for name, ws in _variants(bundle, "laplacian").items():
        op = assemble(ws, n=len(nodes), partial=True)
        res = poisson_solve(op, f, bc="dirichlet", boundary=nodes.boundary, values=exact, method=solver)
        errs[name] = l2_norm(res.phi, exact)
        fields[name] = res.phi
        info[f"iterations_{name}"] = res.iterations
    fields["exact"] = exact
    return ErrorReport(np.array([0.0]), np.array([errs["sk"]]), np.array([errs["mk"]]), info, nodes, fields)


# --------------------------------------------------------------------------
# time-dependent problems


FILTER_ORDER = 8


def _filters(nodes: NodeSet, method: str):
    """Order-8 filters on their own m = 8 stencils.

    The kernel-1 filter is calibrated at one target, the fused filter at two.
    """
    if method != "labfm":
        raise ValueError("filtering is only provided for LABFM runs")
    bundle = build_bundle(nodes, SchemeSpec("labfm", FILTER_ORDER), ops=(f"hyp{FILTER_ORDER}",), fuse=False)
    hyp1 = bundle.sk1[f"hyp{FILTER_ORDER}"]
    hyp2 = bundle.sk2[f"hyp{FILTER_ORDER}"]
    k1, k2, lam1, lam2 = default_filter_targets(nodes.k_nyquist)
    # damping of mode k is kappa * sum (1 - cos(k.x)) w
    kappa_sk = lam1 / effective_response(hyp1, k1).real[:, 0]
    cal = calibrate_filter(hyp1, hyp2, k1, k2, lam1, lam2)
    return {
        "sk": Filter(assemble(hyp1), kappa_sk),
        "mk": Filter(assemble(combine(hyp1, hyp2, cal.c_hat)), cal.kappa),
    }


def _ad_domain(case: int):
    if case == 1:
        return DomainSpec.periodic(1.0), ad_exact_case1
    if case == 2:
        return DomainSpec.periodic(math.sqrt(2.0)), ad_exact_case2
    raise ValueError("advection-diffusion case must be 1 or 2")


def run_advection_diffusion(case: int, s: float, Re: float, m: int = 6, t_end: float = 0.5,
                            report_dt: float = 0.01, seed: int = 1, modes: int = 3, a=(1.0, 0.0),
                            filtered: bool = False, method: str = "labfm") -> ErrorReport:
    """Linear advection-diffusion with RK4 at the prescribed time step.

    The system is linear, so the RK4 step is formed once as a dense matrix
    and raised to the number of steps between reports; this is the same
    recurrence as stepping one RK4 update at a time.
    """
    domain, exact = _ad_domain(case)
    nodes = generate_nodes(domain, s, seed)
    bundle = build_bundle(nodes, SchemeSpec(method, m), ops=("ddx", "ddy", "laplacian"))
    u0 = exact(nodes.x, nodes.y, 0.0, modes, Re, a)
    u_max = float(np.max(np.abs(u0)))
    dt = timestep(nodes.s, max(u_max, math.hypot(*a)), Re)
    per_report = max(1, int(round(report_dt / dt)))
    n_reports = int(math.ceil(t_end / (per_report * dt) - 1e-9))
    filters = _filters(nodes, method) if filtered else {}
    times = np.arange(n_reports + 1) * per_report * dt
    errors, fields, diverged = {}, {}, {}
    for name in VARIANTS:
        a_mat = advection_diffusion_matrix(*(assemble(bundle.get(o, "sk1" if name == "sk" else "mk"))
                                            for o in ("ddx", "ddy", "laplacian")), a, Re)
        fm = filters[name].matrix() if filtered else None
        with np.errstate(over="ignore", invalid="ignore"):
            # an unstable propagator overflows here; reported as divergence below
            q = matrix_power(rk4_propagator(a_mat, dt, fm), per_report)
        u = u0.copy()
        errs = [0.0]
        for k in range(1, n_reports + 1):
            with np.errstate(over="ignore", invalid="ignore"):
                u = q @ u
            if not np.all(np.isfinite(u)):
                diverged[name] = float(times[k])
                errs.extend([math.inf] * (n_reports + 1 - len(errs)))
                break
            errs.append(l2_norm(u, exact(nodes.x, nodes.y, times[k], modes, Re, a)))
        errors[name] = np.array(errs)
        fields[name] = u
    fields["exact"] = exact(nodes.x, nodes.y, times[-1], modes, Re, a)
    info = {"n": len(nodes), "dt": dt, "steps_per_report": per_report, "case": case, "Re": Re, "m": m,
            "filtered": filtered, "diverged": diverged}
    return ErrorReport(times, errors["sk"], errors["mk"], info, nodes, fields)


def run_burgers(s: float, Re: float = 10.0, m: int = 4, t_end: float = 0.25, report_dt: float = 0.01,
                seed: int = 1, filtered: bool = False, method: str = "labfm", n_terms: int = 40) -> ErrorReport:
    """2-D Burgers with u = sin(2 pi x), v = 0 initially, stepped with RK4."""
    nodes = generate_nodes(DomainSpec.periodic(1.0), s, seed)
    bundle = build_bundle(nodes, SchemeSpec(method, m), ops=("ddx", "ddy", "laplacian"))
    state0 = np.column_stack([np.sin(2 * math.pi * nodes.x), np.zeros(len(nodes))])
    dt = timestep(nodes.s, 1.0, Re)
    per_report = max(1, int(round(report_dt / dt)))
    n_reports = int(math.ceil(t_end / (per_report * dt) - 1e-9))
    times = np.arange(n_reports + 1) * per_report * dt
    filters = _filters(nodes, method) if filtered else {}
    errors, fields, diverged = {}, {}, {}
    for name in VARIANTS:
        variant = "sk1" if name == "sk" else "mk"
        rhs = BurgersOperator([assemble(bundle.get(o, variant)) for o in ("ddx", "ddy", "laplacian")], Re)
        filt = filters.get(name)
        state = state0.copy()
        errs = [0.0]
        for k in range(1, n_reports + 1):
            for _ in range(per_report):
                state = rk4_step(state, rhs, dt)
                if filt is not None:
                    state = filt(state)
            if not np.all(np.isfinite(state)):
                diverged[name] = float(times[k])
                errs.extend([math.inf] * (n_reports + 1 - len(errs)))
                break
            ref = burgers_exact(nodes.x, times[k], Re, n_terms)
            errs.append(l2_norm(state[:, 0], ref))
        errors[name] = np.array(errs)
        fields[name] = state[:, 0]
    fields["exact"] = burgers_exact(nodes.x, times[-1], Re, n_terms)
    info = {"n": len(nodes), "dt": dt, "steps_per_report": per_report, "Re": Re, "m": m,
            "filtered": filtered, "diverged": diverged}
    return ErrorReport(times, errors["sk"], errors["mk"], info, nodes, fields)
