"""Kernel pairs per method and single-/multi-kernel operator bundles.

Each method has a primary kernel (the single-kernel baseline, "kernel 1")
and a partner kernel ("kernel 2").  Both are evaluated on one shared
stencil so that their weights can be fused node by node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .kernels import GAUSSIAN_RBF, GAUSSIAN_SPH, HERMITE_ABF, IMQ, WENDLAND_C2, KernelSpec
from .nodeset import NodeSet, StencilSet, build_stencils
from .respower import DEFAULT_KM_FRACTION, combine, half_disc_rule, optimize_pairs
from .weights import (
    FlatnessRule,
    OperatorKind,
    WeightSet,
    labfm_stencils,
    labfm_weight_family,
    rbffd_weight_family,
    sph_gradient_weights,
    sph_laplacian_weights,
)

__all__ = ["METHODS", "KERNEL_PAIRS", "RBF_COUNTS", "SchemeSpec", "OperatorBundle", "build_bundle", "convergence_km"]

METHODS = ("sph", "rbf-fd", "labfm")

KERNEL_PAIRS = {
    "sph": (WENDLAND_C2, GAUSSIAN_SPH),
    "rbf-fd": (GAUSSIAN_RBF, IMQ),
    "labfm": (WENDLAND_C2, GAUSSIAN_SPH),  # generators of the Hermite ABFs
}

# stencil sizes used for RBF-FD at each polynomial order
RBF_COUNTS = {0: 10, 1: 15, 2: 20, 3: 25}


@dataclass(frozen=True)
class SchemeSpec:
    """Method, consistency order and method-specific knobs."""

    method: str
    m: int = 0
    h_over_s: float = 1.3
    count: int = None
    km_fraction: float = None
    imq_target: float = 0.8

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "sph" and self.m != 0:
            raise ValueError("SPH operators are zeroth-order")
        if self.method == "rbf-fd" and self.m not in RBF_COUNTS and self.count is None:
            raise ValueError(f"no default stencil size for RBF-FD order {self.m}")
        if self.method == "labfm" and self.m not in (2, 4, 6, 8):
            raise ValueError(f"unsupported LABFM order {self.m}")

    @property
    def label(self) -> str:
        if self.method == "sph":
            return f"sph-h{self.h_over_s:g}"
        return f"{self.method}-m{self.m}"

    def k_m(self, nodes: NodeSet) -> float:
        frac = self.km_fraction if self.km_fraction is not None else DEFAULT_KM_FRACTION[self.method]
        return frac * nodes.k_nyquist


@dataclass
class OperatorBundle:
    """Kernel-1, kernel-2 and fused weights for a set of operators."""

    scheme: SchemeSpec
    nodes: NodeSet
    stencils: StencilSet
    sk1: dict
    sk2: dict
    k_m: float
    mk: dict = field(default_factory=dict)
    fusion: dict = field(default_factory=dict)

    def get(self, op, variant: str = "mk") -> WeightSet:
        name = str(OperatorKind.parse(op))
        table = {"sk1": self.sk1, "sk2": self.sk2, "mk": self.mk}[variant]
        return table[name]

    def fuse(self, k_m: float = None, ops=None):
        """Optimise c_hat per node and operator; stores the fused weights."""
        k_m = self.k_m if k_m is None else k_m
        rule = half_disc_rule(k_m)
        names = [n for n in (ops or list(self.sk1)) if self.sk1[n].operator.name != "hyperviscosity"]
        combs = optimize_pairs([(self.sk1[n], self.sk2[n]) for n in names], k_m, rule)
        for name, comb in zip(names, combs):
            self.fusion[name] = comb
            self.mk[name] = combine(self.sk1[name], self.sk2[name], comb)
        return self


def _sph_bundle(nodes, scheme, ops):
    h = scheme.h_over_s * nodes.s
    st = build_stencils(nodes, radius=2.0 * h)
    vol = nodes.s ** 2
    out = []
    for fam in KERNEL_PAIRS["sph"]:
        spec = KernelSpec(fam, h=h)
        table = {}
        need_grad = any(OperatorKind.parse(o).is_gradient for o in ops)
        if need_grad:
            gx, gy = sph_gradient_weights(st, spec, vol)
            table["ddx"], table["ddy"] = gx, gy
        if any(str(OperatorKind.parse(o)) == "laplacian" for o in ops):
            table["laplacian"] = sph_laplacian_weights(st, spec, vol)
        out.append({str(OperatorKind.parse(o)): table[str(OperatorKind.parse(o))] for o in ops})
    return st, out


def _rbf_bundle(nodes, scheme, ops, stencils=None):
    count = scheme.count or RBF_COUNTS[scheme.m]
    st = stencils if stencils is not None else build_stencils(nodes, count=count)
    out = []
    for fam in KERNEL_PAIRS["rbf-fd"]:
        rule = FlatnessRule(fam, scheme.imq_target) if fam == IMQ else FlatnessRule.default(fam)
        ws = rbffd_weight_family(st, KernelSpec(fam), scheme.m, ops, flatness=rule)
        out.append({str(w.operator): w for w in ws})
    return st, out


def _labfm_bundle(nodes, scheme, ops, stencils=None):
    st = stencils if stencils is not None else labfm_stencils(nodes, scheme.m)
    out = []
    for gen in KERNEL_PAIRS["labfm"]:
        ws = labfm_weight_family(st, KernelSpec(HERMITE_ABF, generator=gen), scheme.m, ops)
        out.append({str(w.operator): w for w in ws})
    return st, out


def build_bundle(nodes: NodeSet, scheme: SchemeSpec, ops=("ddx", "ddy", "laplacian"), fuse=True,
                 k_m: float = None, stencils: StencilSet = None) -> OperatorBundle:
    """Weights from both kernels of ``scheme`` and, optionally, their fusion."""
    ops = [str(OperatorKind.parse(o)) for o in ops]
    if scheme.method == "sph":
        st, (a, b) = _sph_bundle(nodes, scheme, ops)
    elif scheme.method == "rbf-fd":
        st, (a, b) = _rbf_bundle(nodes, scheme, ops, stencils)
    else:
        st, (a, b) = _labfm_bundle(nodes, scheme, ops, stencils)
    k_m = scheme.k_m(nodes) if k_m is None else min(k_m, nodes.k_nyquist)
    bundle = OperatorBundle(scheme, nodes, st, a, b, k_m)
    if fuse:
        bundle.fuse()
    return bundle


def convergence_km(nodes: NodeSet) -> float:
    """Optimisation radius for the convergence test function, clipped to Nyquist."""
    return min(math.pi * math.sqrt(904.0), nodes.k_nyquist)
