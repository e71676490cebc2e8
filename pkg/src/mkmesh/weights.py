"""Derivative weights for SPH, RBF-FD and LABFM operators.

Every operator acts on differences, ``L(phi)_i = sum_j (phi_j - phi_i) w_ji``,
so constant fields map to exactly zero.  Weight arrays are padded to the
width of the :class:`~mkmesh.nodeset.StencilSet` they belong to, with zeros
in the padding slots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np

from .kernels import (
    GAUSSIAN_RBF,
    GAUSSIAN_SPH,
    HERMITE_ABF,
    RBF_FAMILIES,
    SPH_FAMILIES,
    WENDLAND_C2,
    KernelSpec,
    basis_exponents,
    basis_size,
    hermite_basis,
    kernel_gradient,
    kernel_radial_derivative,
    rbf_operator_value,
    rbf_value,
)
from .nodeset import NodeSet, StencilSet, build_stencils

__all__ = [
    "OperatorKind",
    "WeightSet",
    "FlatnessRule",
    "ConditioningError",
    "MAX_CONDITION",
    "sph_gradient_weights",
    "sph_laplacian_weights",
    "solve_flatness",
    "rbffd_weights",
    "rbffd_weight_family",
    "labfm_weights",
    "labfm_weight_family",
    "labfm_stencils",
    "labfm_condition",
    "fd_reference_weights",
]

MAX_CONDITION = 1e12
LABFM_SIZING_CONDITION = 1e10
LABFM_GROWTH = 1.1
LABFM_COUNT_MARGIN = 1.5
# smoothing length of the ABF generating kernel as a fraction of the stencil radius;
# the Gaussian is narrowed so it has decayed to ~1e-4 at the stencil edge
LABFM_H_FRACTION = {WENDLAND_C2: 0.5, GAUSSIAN_SPH: 1.0 / 3.0}


class ConditioningError(ArithmeticError):
    """A local weight system is singular or too ill-conditioned.

    ``nodes`` and ``condition`` carry the offending rows and their
    condition numbers.
    """

    def __init__(self, message, nodes=(), condition=()):
        super().__init__(message)
        self.nodes = np.asarray(nodes)
        self.condition = np.asarray(condition)


@dataclass(frozen=True)
class OperatorKind:
    """A derivative operator: ddx, ddy, laplacian or hyperviscosity of an even order."""

    name: str
    order: int = 0

    def __post_init__(self):
        if self.name not in ("ddx", "ddy", "laplacian", "hyperviscosity"):
            raise ValueError(f"unknown operator {self.name!r}")
        if self.name == "hyperviscosity" and (self.order < 4 or self.order % 2):
            raise ValueError("hyperviscosity order must be even and >= 4")

    @classmethod
    def parse(cls, op) -> "OperatorKind":
        if isinstance(op, OperatorKind):
            return op
        op = str(op).lower()
        if op.startswith("hyp"):
            return cls("hyperviscosity", int(op.lstrip("hyperviscosity") or 8))
        if op in ("lap", "laplace"):
            op = "laplacian"
        return cls(op)

    def __str__(self) -> str:
        return f"hyp{self.order}" if self.name == "hyperviscosity" else self.name

    @property
    def degree(self) -> int:
        """Differential order of the operator."""
        return {"ddx": 1, "ddy": 1, "laplacian": 2}.get(self.name, self.order)

    @property
    def is_gradient(self) -> bool:
        return self.name in ("ddx", "ddy")

    def targets(self) -> dict:
        """Coefficients of the partial derivatives D^(a,b) making up the operator."""
        if self.name == "ddx":
            return {(1, 0): 1.0}
        if self.name == "ddy":
            return {(0, 1): 1.0}
        if self.name == "laplacian":
            return {(2, 0): 1.0, (0, 2): 1.0}
        half = self.order // 2
        return {(2 * k, self.order - 2 * k): float(comb(half, k)) for k in range(half + 1)}


@dataclass(eq=False)
class WeightSet:
    """Per-node operator weights aligned with a stencil set."""

    method: str
    operator: OperatorKind
    m: int
    weights: np.ndarray
    stencils: StencilSet
    condition: np.ndarray = field(default=None)
    kernel: str = ""

    def __post_init__(self):
        self.operator = OperatorKind.parse(self.operator)
        if self.weights.shape != self.stencils.indices.shape:
            raise ValueError("weights must align with the stencil set")
        if self.condition is None:
            self.condition = np.ones(len(self.weights))

    def __len__(self) -> int:
        return len(self.weights)

    def apply(self, phi) -> np.ndarray:
        """Difference-form operator applied to nodal values."""
        phi = np.asarray(phi)
        diff = phi[self.stencils.indices] - phi[self.stencils.centers][:, None]
        if diff.ndim == 3:
            return np.einsum("nk,nkc->nc", self.weights, diff)
        return np.einsum("nk,nk->n", self.weights, diff)

    def rows(self, i: int) -> np.ndarray:
        return self.weights[i][self.stencils.mask[i]]


@dataclass(frozen=True)
class FlatnessRule:
    """Fix epsilon per node from the RBF value at the farthest (or nearest) node."""

    family: str
    target: float
    at: str = "farthest"

    def __post_init__(self):
        if self.family not in RBF_FAMILIES:
            raise ValueError("flatness rules apply to RBF families only")
        if not 0 < self.target < 1:
            raise ValueError("target RBF value must lie in (0, 1)")
        if self.at not in ("farthest", "nearest"):
            raise ValueError("rule must anchor on the farthest or nearest node")

    @classmethod
    def default(cls, family: str) -> "FlatnessRule":
        # IMQ never exceeds 1, so the edge value is set to 1/(5/4) instead
        return cls(family, 0.5 if family == GAUSSIAN_RBF else 0.8)


def solve_flatness(distances, rule: FlatnessRule):
    """Closed-form epsilon with psi(eps * r_anchor) equal to the rule's target.

    ``distances`` is either a 1-D array of one stencil's neighbour distances
    or an (N, K) array (padding must be zero or negative).
    """
    d = np.asarray(distances, dtype=float)
    if d.ndim == 1:
        d = d[None, :]
    if rule.at == "farthest":
        anchor = d.max(axis=1)
    else:
        anchor = np.where(d > 0, d, np.inf).min(axis=1)
    if np.any(~(anchor > 0)) or np.any(~np.isfinite(anchor)):
        raise ValueError("stencil anchor distance must be positive")
    if rule.family == GAUSSIAN_RBF:
        scaled = math.sqrt(-math.log(rule.target))
    else:
        scaled = math.sqrt(1.0 / rule.target ** 2 - 1.0)
    eps = scaled / anchor
    return eps if np.ndim(distances) > 1 else float(eps[0])


# --------------------------------------------------------------------------
# SPH


def _check_sph(spec: KernelSpec):
    if spec.family not in SPH_FAMILIES:
        raise ValueError(f"{spec.family!r} is not an SPH kernel")


def sph_gradient_weights(stencils: StencilSet, spec: KernelSpec, volume: float):
    """Antisymmetric SPH gradient: w_ji = V grad_i W(x_i - x_j).

    Returns the (ddx, ddy) pair of weight sets.
    """
    _check_sph(spec)
    if np.any(stencils.counts == 0):
        raise ValueError("empty stencil")
    g = -kernel_gradient(spec, stencils.offsets) * volume
    g = np.where(stencils.mask[..., None], g, 0.0)
    return (
        WeightSet("sph", OperatorKind("ddx"), 0, g[..., 0].copy(), stencils, kernel=spec.family),
        WeightSet("sph", OperatorKind("ddy"), 0, g[..., 1].copy(), stencils, kernel=spec.family),
    )


def sph_laplacian_weights(stencils: StencilSet, spec: KernelSpec, volume: float) -> WeightSet:
    """Morris Laplacian: w_ji = -2 V W'(r_ji) / r_ji (non-negative for decreasing kernels)."""
    _check_sph(spec)
    if np.any(stencils.counts == 0):
        raise ValueError("empty stencil")
    r = stencils.distances
    if np.any(stencils.mask & (r <= 0)):
        raise ValueError("coincident nodes in stencil")
    dw = kernel_radial_derivative(spec, r)
    w = np.where(stencils.mask, -2.0 * volume * dw / np.where(r > 0, r, 1.0), 0.0)
    return WeightSet("sph", OperatorKind("laplacian"), 0, w, stencils, kernel=spec.family)


# --------------------------------------------------------------------------
# shared linear algebra


def _svd_solve(mats, rhs, nodes):
    """Solve a batch of square systems via SVD, returning solutions and condition numbers."""
    u, sv, vt = np.linalg.svd(mats)
    smax = sv[:, 0]
    smin = sv[:, -1]
    with np.errstate(divide="ignore"):
        cond = np.where(smin > 0, smax / np.where(smin > 0, smin, 1.0), np.inf)
    bad = ~(cond <= MAX_CONDITION)
    if np.any(bad):
        raise ConditioningError(
            f"{int(bad.sum())} local systems exceed condition {MAX_CONDITION:.0e} "
            f"(worst {np.max(cond):.3e})",
            nodes=np.asarray(nodes)[bad],
            condition=cond[bad],
        )
    # rhs: (N, n, q)
    y = (np.swapaxes(u, 1, 2) @ rhs) / sv[:, :, None]
    return np.swapaxes(vt, 1, 2) @ y, cond


def _monomials(points, exps):
    """x^a y^b for every (a, b) in ``exps``; points has trailing axis 2."""
    top = max(max(a, b) for a, b in exps)
    xp = [np.ones(points.shape[:-1])]
    yp = [np.ones(points.shape[:-1])]
    for _ in range(top):
        xp.append(xp[-1] * points[..., 0])
        yp.append(yp[-1] * points[..., 1])
    return np.stack([xp[a] * yp[b] for a, b in exps], axis=-1)


# --------------------------------------------------------------------------
# RBF-FD


def _poly_exponents(m: int):
    return ((0, 0),) + basis_exponents(m) if m >= 1 else ((0, 0),)


def rbffd_weights(stencils: StencilSet, spec: KernelSpec, m: int, op, flatness: FlatnessRule = None,
                  epsilon=None) -> WeightSet:
    """RBF-FD weights from an RBF system augmented with monomials up to degree m.

    The local system has one row per stencil node (centre plus neighbours)
    and one per monomial, the constant included.  Epsilon comes from
    ``flatness`` if given, else ``epsilon`` (scalar or per node), else
    ``spec.epsilon``.  Coordinates are scaled by each stencil's radius
    before solving.
    """
    return rbffd_weight_family(stencils, spec, m, [op], flatness, epsilon)[0]


def rbffd_weight_family(stencils, spec, m, ops, flatness=None, epsilon=None):
    """Several RBF-FD operators sharing one factorisation per node."""
    if spec.family not in RBF_FAMILIES:
        raise ValueError(f"{spec.family!r} is not an RBF family")
    ops = [OperatorKind.parse(o) for o in ops]
    for o in ops:
        if o.name == "hyperviscosity":
            raise ValueError("RBF-FD hyperviscosity is not supported")
    n_poly = basis_size(m) + 1
    counts = stencils.counts
    if np.any(counts + 1 <= basis_size(m)):
        raise ValueError(f"RBF-FD order {m} needs more than {basis_size(m)} neighbours")
    dist = np.where(stencils.mask, stencils.distances, 0.0)
    rmax = dist.max(axis=1)
    if flatness is not None:
        if flatness.family != spec.family:
            raise ValueError("flatness rule family does not match the kernel")
        eps = solve_flatness(dist, flatness)
    elif epsilon is not None:
        eps = np.broadcast_to(np.asarray(epsilon, dtype=float), (len(stencils),))
    else:
        eps = np.full(len(stencils), spec.epsilon)
    exps = _poly_exponents(m)
    out = np.zeros((len(ops),) + stencils.indices.shape)
    cond = np.zeros(len(stencils))
    for k in np.unique(counts):
        rows = np.nonzero(counts == k)[0]
        sel = np.argsort(~stencils.mask[rows], axis=1, kind="stable")[:, :k]
        off = np.take_along_axis(stencils.offsets[rows], sel[..., None], axis=1)
        scale = rmax[rows]
        pts = np.concatenate([np.zeros((len(rows), 1, 2)), off / scale[:, None, None]], axis=1)
        eps_s = (eps[rows] * scale)[:, None, None]
        diff = pts[:, :, None, :] - pts[:, None, :, :]
        r = np.hypot(diff[..., 0], diff[..., 1])
        unit = KernelSpec(spec.family, epsilon=1.0)
        phi = rbf_value(unit, eps_s * r)
        poly = _monomials(pts, exps)
        size = k + 1 + n_poly
        mat = np.zeros((len(rows), size, size))
        mat[:, : k + 1, : k + 1] = phi
        mat[:, : k + 1, k + 1:] = poly
        mat[:, k + 1:, : k + 1] = np.swapaxes(poly, 1, 2)
        rhs = np.zeros((len(rows), size, len(ops)))
        for q, o in enumerate(ops):
            # L applied at the centre to psi(|x - x_j|): argument x_i - x_j = -pts_j
            e = eps_s[:, :, 0]
            val = rbf_operator_value(unit, -pts * e[..., None], o.name)
            rhs[:, : k + 1, q] = val * e ** o.degree
            for (a, b), coef in o.targets().items():
                if (a, b) in exps:
                    rhs[:, k + 1 + exps.index((a, b)), q] = coef * factorial(a) * factorial(b)
        sol, c = _svd_solve(mat, rhs, rows)
        cond[rows] = c
        for q, o in enumerate(ops):
            w = sol[:, 1: k + 1, q] / scale[:, None] ** o.degree
            tmp = np.zeros((len(rows), stencils.width))
            np.put_along_axis(tmp, sel, w, axis=1)
            out[q, rows] = tmp
    return [WeightSet("rbf-fd", o, m, out[q], stencils, cond, spec.family) for q, o in enumerate(ops)]


# --------------------------------------------------------------------------
# LABFM


def _labfm_systems(stencils: StencilSet, generator: str, m: int, h):
    exps = basis_exponents(m)
    hh = np.broadcast_to(np.asarray(h, dtype=float), (len(stencils),))
    scaled = stencils.offsets / hh[:, None, None]
    inv_fact = np.array([1.0 / (factorial(a) * factorial(b)) for a, b in exps])
    taylor = _monomials(scaled, exps) * inv_fact
    abf = hermite_basis(m, scaled, 1.0, generator)
    abf = np.where(stencils.mask[..., None], abf, 0.0)
    mats = np.swapaxes(taylor, 1, 2) @ abf
    return mats, abf, hh


def labfm_weight_family(stencils: StencilSet, spec: KernelSpec, m: int, ops, h=None, chunk=2048):
    """LABFM weights for several operators sharing each node's ABF system.

    ``h`` defaults to a generator-dependent fraction of each stencil's
    radius: one half for Wendland C2 (support then matches the stencil), one
    third for the Gaussian.  Offsets are scaled by h before the basis is
    evaluated.
    """
    if spec.family != HERMITE_ABF:
        raise ValueError("LABFM weights need a hermite-abf kernel spec")
    ops = [OperatorKind.parse(o) for o in ops]
    exps = basis_exponents(m)
    for o in ops:
        if o.degree > m:
            raise ValueError(f"operator {o} needs consistency order >= {o.degree}")
    if np.any(stencils.counts < basis_size(m)):
        raise ValueError(f"LABFM order {m} needs at least {basis_size(m)} neighbours")
    if h is None:
        h = LABFM_H_FRACTION[spec.generator] * stencils.radius
    hh = np.broadcast_to(np.asarray(h, dtype=float), (len(stencils),))
    out = np.zeros((len(ops),) + stencils.indices.shape)
    cond = np.zeros(len(stencils))
    for start in range(0, len(stencils), chunk):
        rows = np.arange(start, min(start + chunk, len(stencils)))
        sub = stencils.subset(rows)
        mats, abf, _ = _labfm_systems(sub, spec.generator, m, hh[rows])
        rhs = np.zeros((len(rows), len(exps), len(ops)))
        for q, o in enumerate(ops):
            for ab, coef in o.targets().items():
                rhs[:, exps.index(ab), q] = coef / hh[rows] ** o.degree
        psi, c = _svd_solve(mats, rhs, rows)
        cond[rows] = c
        out[:, rows] = np.moveaxis(abf @ psi, 2, 0)
    return [WeightSet("labfm", o, m, out[q], stencils, cond, spec.generator) for q, o in enumerate(ops)]


def labfm_weights(stencils: StencilSet, spec: KernelSpec, m: int, op, h=None) -> WeightSet:
    return labfm_weight_family(stencils, spec, m, [op], h)[0]


def labfm_condition(stencils: StencilSet, generator: str, m: int, h=None) -> np.ndarray:
    if h is None:
        h = LABFM_H_FRACTION[generator] * stencils.radius
    mats, _, _ = _labfm_systems(stencils, generator, m, h)
    sv = np.linalg.svd(mats, compute_uv=False)
    with np.errstate(divide="ignore"):
        return np.where(sv[:, -1] > 0, sv[:, 0] / np.where(sv[:, -1] > 0, sv[:, -1], 1.0), np.inf)


def labfm_stencils(nodes: NodeSet, m: int, start=None, rows=None, generator=WENDLAND_C2,
                   max_condition=LABFM_SIZING_CONDITION, min_count=None) -> StencilSet:
    """Grow each node's radius by 10% steps until the LABFM system is usable.

    A stencil is accepted once it holds at least 1.5 (m^2+3m)/2 neighbours
    and its ABF system condition number is below ``max_condition``.
    """
    need = min_count if min_count is not None else math.ceil(LABFM_COUNT_MARGIN * basis_size(m))
    r0 = 2.4 * nodes.s * math.sqrt(m / 4.0) if start is None else start
    centers = np.arange(len(nodes)) if rows is None else np.asarray(rows)
    radius = np.broadcast_to(np.asarray(r0, dtype=float), (len(nodes),)).copy()
    limit = 0.5 * min(nodes.domain.width, nodes.domain.height) if nodes.domain.is_periodic else np.inf
    pending = centers.copy()
    done = {}
    while len(pending):
        st = build_stencils(nodes, radius=np.minimum(radius, limit), rows=pending)
        ok = st.counts >= need
        if np.any(ok):
            c = labfm_condition(st.subset(np.nonzero(ok)[0]), generator, m)
            ok[np.nonzero(ok)[0]] = c < max_condition
        for j in np.nonzero(ok)[0]:
            done[int(pending[j])] = st[j]
        stuck = (~ok) & (radius[pending] >= limit)
        if np.any(stuck):
            raise ValueError(f"no usable LABFM stencil within the periodic half-width for {int(stuck.sum())} nodes")
        pending = pending[~ok]
        radius[pending] *= LABFM_GROWTH
    lists = [done[int(i)] for i in centers]
    return StencilSet.from_lists(centers, [s.neighbours for s in lists], [s.offsets for s in lists],
                                 radius=np.minimum(radius[centers], limit))


# --------------------------------------------------------------------------
# finite-difference references


def fd_reference_weights(order: int, op, spacing: float):
    """Central finite-difference line stencil in difference form.

    Returns ``(offsets, weights)`` for offsets ``+-spacing, +-2 spacing, ...``.
    For 'laplacian' the 1-D second derivative is returned; a 2-D Laplacian
    is the sum of this stencil along x and y.
    """
    if order not in (2, 4, 6, 8):
        raise ValueError("central differences need an even order in {2, 4, 6, 8}")
    op = OperatorKind.parse(op)
    deriv = 1 if op.is_gradient else 2
    if op.name == "hyperviscosity":
        raise ValueError("no line-stencil reference for hyperviscosity")
    half = order // 2
    pts = np.array([p for p in range(-half, half + 1) if p != 0], dtype=float)
    # moment conditions sum_j p_j^n w_j = n! delta_{n,deriv}, n = 1..2*half
    vander = np.array([pts ** n for n in range(1, 2 * half + 1)])
    rhs = np.zeros(2 * half)
    rhs[deriv - 1] = factorial(deriv)
    w = np.linalg.solve(vander, rhs)
    return pts * spacing, w / spacing ** deriv
