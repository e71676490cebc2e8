"""Smoothing kernels, radial basis functions and Hermite anisotropic bases.

All evaluators are vectorised: ``r`` may be any array of distances and
``offset`` any array whose last axis has length two.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "KernelSpec",
    "SPH_FAMILIES",
    "RBF_FAMILIES",
    "kernel_value",
    "kernel_radial_derivative",
    "kernel_gradient",
    "rbf_value",
    "rbf_operator_value",
    "basis_size",
    "basis_exponents",
    "hermite",
    "hermite_basis",
]

WENDLAND_C2 = "wendland-c2"
GAUSSIAN_SPH = "gaussian-sph"
GAUSSIAN_RBF = "gaussian-rbf"
IMQ = "inverse-multiquadric"
HERMITE_ABF = "hermite-abf"

SPH_FAMILIES = (WENDLAND_C2, GAUSSIAN_SPH)
RBF_FAMILIES = (GAUSSIAN_RBF, IMQ)
FAMILIES = SPH_FAMILIES + RBF_FAMILIES + (HERMITE_ABF,)

_WENDLAND_NORM = 7.0 / (4.0 * math.pi)

LABFM_ORDERS = (2, 4, 6, 8)


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family with its length scale.

    ``h`` is the smoothing length of SPH kernels (and of the generating
    kernel of Hermite ABFs); ``epsilon`` is the RBF flatness parameter.
    ``generator`` names the SPH family that multiplies the Hermite
    polynomials of an ABF basis.
    """

    family: str
    h: float = 1.0
    epsilon: float = 1.0
    generator: str = WENDLAND_C2

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family in RBF_FAMILIES:
            if not self.epsilon > 0:
                raise ValueError("RBF flatness must be positive")
        elif not self.h > 0:
            raise ValueError("smoothing length must be positive")
        if self.family == HERMITE_ABF and self.generator not in SPH_FAMILIES:
            raise ValueError("ABF generator must be an SPH kernel family")

    @property
    def support(self) -> float:
        """Radius beyond which the kernel is identically zero (inf if none)."""
        if self.family == WENDLAND_C2:
            return 2.0 * self.h
        return math.inf

    def with_h(self, h: float) -> "KernelSpec":
        return KernelSpec(self.family, h, self.epsilon, self.generator)

    def with_epsilon(self, epsilon: float) -> "KernelSpec":
        return KernelSpec(self.family, self.h, epsilon, self.generator)


def _shape(family: str, q):
    """Dimensionless profile f(q) and f'(q) of an SPH family, unnormalised."""
    if family == WENDLAND_C2:
        t = np.clip(1.0 - 0.5 * q, 0.0, None)
        t3 = t ** 3
        return t3 * t * (2.0 * q + 1.0), -5.0 * q * t3
    if family == GAUSSIAN_SPH:
        e = np.exp(-q * q)
        return e, -2.0 * q * e
    raise ValueError(f"{family!r} is not an SPH kernel")


def _norm(family: str, h: float) -> float:
    if family == WENDLAND_C2:
        return _WENDLAND_NORM / (h * h)
    return 1.0 / (math.pi * h * h)


def kernel_value(spec: KernelSpec, r):
    """Normalised 2-D SPH kernel W(r).

    The Gaussian is the full plane-normalised profile; its truncation to the
    2h stencil happens through the neighbour list, not here.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance must be non-negative")
    family = spec.generator if spec.family == HERMITE_ABF else spec.family
    f, _ = _shape(family, r / spec.h)
    return _norm(family, spec.h) * f


def kernel_radial_derivative(spec: KernelSpec, r):
    """dW/dr."""
    r = np.asarray(r, dtype=float)
    family = spec.generator if spec.family == HERMITE_ABF else spec.family
    _, df = _shape(family, r / spec.h)
    return _norm(family, spec.h) * df / spec.h


def kernel_gradient(spec: KernelSpec, offset):
    """Gradient of W(|x|) with respect to x, evaluated at ``offset``."""
    offset = np.asarray(offset, dtype=float)
    r = np.hypot(offset[..., 0], offset[..., 1])
    dw = kernel_radial_derivative(spec, r)
    with np.errstate(invalid="ignore", divide="ignore"):
        fac = np.where(r > 0, dw / np.where(r > 0, r, 1.0), 0.0)
    return offset * fac[..., None]


# --------------------------------------------------------------------------
# radial basis functions


def rbf_value(spec: KernelSpec, r):
    r = np.asarray(r, dtype=float)
    a = (spec.epsilon * r) ** 2
    if spec.family == GAUSSIAN_RBF:
        return np.exp(-a)
    if spec.family == IMQ:
        return 1.0 / np.sqrt(1.0 + a)
    raise ValueError(f"{spec.family!r} is not an RBF family")


def rbf_operator_value(spec: KernelSpec, offset, op: str):
    """Apply ``op`` ('ddx', 'ddy' or 'laplacian') to psi(|x|) at ``offset``."""
    offset = np.asarray(offset, dtype=float)
    dx, dy = offset[..., 0], offset[..., 1]
    e2 = spec.epsilon ** 2
    r2 = dx * dx + dy * dy
    if spec.family == GAUSSIAN_RBF:
        psi = np.exp(-e2 * r2)
        if op == "ddx":
            return -2.0 * e2 * dx * psi
        if op == "ddy":
            return -2.0 * e2 * dy * psi
        if op == "laplacian":
            return (4.0 * e2 * e2 * r2 - 4.0 * e2) * psi
    elif spec.family == IMQ:
        base = 1.0 + e2 * r2
        if op == "ddx":
            return -e2 * dx * base ** -1.5
        if op == "ddy":
            return -e2 * dy * base ** -1.5
        if op == "laplacian":
            return (e2 * e2 * r2 - 2.0 * e2) * base ** -2.5
    else:
        raise ValueError(f"{spec.family!r} is not an RBF family")
    raise ValueError(f"unsupported RBF operator {op!r}")


# --------------------------------------------------------------------------
# Hermite anisotropic basis functions


def basis_size(m: int) -> int:
    """Number of non-constant monomials of total degree <= m in 2-D."""
    return (m * m + 3 * m) // 2


@lru_cache(maxsize=None)
def basis_exponents(m: int) -> tuple:
    """Exponent pairs (a, b), ordered by total degree, then x-degree descending.

    So index 0 is (1, 0), index 1 is (0, 1), index 2 is (2, 0), and so on.
    """
    return tuple((n - b, b) for n in range(1, m + 1) for b in range(n + 1))


def hermite(n_max: int, x):
    """Physicists' Hermite polynomials H_0..H_n_max at ``x``, stacked on axis 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 2.0 * x
    for n in range(1, n_max):
        out[n + 1] = 2.0 * x * out[n] - 2.0 * n * out[n - 1]
    return out


def hermite_basis(m: int, offset, h: float, generator: str = WENDLAND_C2):
    """Anisotropic basis values K(|x|/h) H_a(x/h) H_b(y/h) for every (a, b).

    Returns an array with a trailing axis of length ``basis_size(m)`` in
    the order given by :func:`basis_exponents`.  The generating kernel is
    unnormalised (its scale cancels in the weight solve).
    """
    if m not in LABFM_ORDERS:
        raise ValueError(f"unsupported consistency order {m}")
    offset = np.asarray(offset, dtype=float)
    xi = offset[..., 0] / h
    eta = offset[..., 1] / h
    q = np.hypot(xi, eta)
    k, _ = _shape(generator, q)
    hx = hermite(m, xi)
    hy = hermite(m, eta)
    cols = [hx[a] * hy[b] for a, b in basis_exponents(m)]
    return np.stack(cols, axis=-1) * k[..., None]
