"""Effective wavenumbers, resolving-power error functionals and multi-kernel fusion.

For a difference-form operator with weights w_ji acting on the plane wave
exp(i k.x), the sampled derivative at node i is exp(i k.x_i) times

    sum_j (cos(k.x_ji) - 1) w_ji + i sum_j sin(k.x_ji) w_ji .

Gradient operators are read as ``k_eff = S + i (C')`` with
``S = sum sin(k.x) w`` and ``C' = sum (1 - cos(k.x)) w``; Laplacians as
``q_eff^2 = C' - i S``.  Both are exact trigonometric sums; nothing here
depends on how the weights were produced.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nodeset import NodeSet
from .weights import OperatorKind, WeightSet

__all__ = [
    "QuadratureRule",
    "RayCurve",
    "MKCombination",
    "FilterCalibration",
    "SingularCalibrationError",
    "DEFAULT_KM_FRACTION",
    "keff_gradient",
    "qeff2_laplacian",
    "effective_response",
    "ray_curve",
    "half_disc_rule",
    "e_functional",
    "quadratic_coefficients",
    "optimize_c",
    "optimize_weights",
    "optimize_pairs",
    "combine",
    "improvement_metric",
    "calibrate_filter",
    "default_filter_targets",
    "apply_filter",
]

# optimisation radius as a fraction of the Nyquist wavenumber
DEFAULT_KM_FRACTION = {"sph": 0.2, "rbf-fd": 0.3, "labfm": 0.3}

N_RADIAL = 32
N_ANGULAR = 48

# relative size of the quadratic coefficient below which the pair is degenerate
DEGENERATE_TOL = 1e-20


def _trig_sums(offsets, weights, k):
    """sum sin(k.x) w and sum (1 - cos(k.x)) w for one or many wavevectors.

    ``offsets`` (..., K, 2), ``weights`` (..., K) and ``k`` (Q, 2) give
    arrays of shape (..., Q).
    """
    k = np.atleast_2d(np.asarray(k, dtype=float))
    phase = np.einsum("...kd,qd->...kq", offsets, k)
    sin = np.einsum("...kq,...k->...q", np.sin(phase), weights)
    one_minus_cos = np.einsum("...kq,...k->...q", 1.0 - np.cos(phase), weights)
    return sin, one_minus_cos


def keff_gradient(offsets, weights, k):
    """Effective wavenumber of a first-derivative stencil (complex)."""
    sin, omc = _trig_sums(np.asarray(offsets, float), np.asarray(weights, float), k)
    out = sin + 1j * omc
    return out[..., 0] if np.ndim(k) == 1 else out


def qeff2_laplacian(offsets, weights, k):
    """Effective squared wavenumber of a Laplacian stencil (complex)."""
    sin, omc = _trig_sums(np.asarray(offsets, float), np.asarray(weights, float), k)
    out = omc - 1j * sin
    return out[..., 0] if np.ndim(k) == 1 else out


def _target(op: OperatorKind, k):
    k = np.atleast_2d(k)
    if op.name == "ddx":
        return k[:, 0]
    if op.name == "ddy":
        return k[:, 1]
    if op.name == "laplacian":
        return (k ** 2).sum(axis=1)
    raise ValueError(f"no resolving-power target for {op}")


def effective_response(ws: WeightSet, k, rows=None):
    """Per-node effective (squared) wavenumber of a weight set at wavevectors ``k``."""
    st = ws.stencils if rows is None else ws.stencils.subset(rows)
    w = ws.weights if rows is None else ws.weights[rows]
    if ws.operator.is_gradient:
        return keff_gradient(st.offsets, w, np.atleast_2d(k))
    return qeff2_laplacian(st.offsets, w, np.atleast_2d(k))


# --------------------------------------------------------------------------
# ray curves


@dataclass
class RayCurve:
    """Node-averaged scaled effective wavenumber along k_y = slope * k_x.

    ``k_hat`` is |k|/k_Ny.  For gradients ``response`` holds the scaled
    effective wavenumber (spectral accuracy is the identity); for
    Laplacians it holds q_eff^2/k_Ny^2 (spectral accuracy is ``k_hat**2``).
    ``spread`` is the standard deviation of the real part across nodes.
    """

    slope: float
    k_hat: np.ndarray
    response: np.ndarray
    spread: np.ndarray
    operator: OperatorKind
    sign: int = 1

    @property
    def exact(self) -> np.ndarray:
        return self.k_hat ** 2 if self.operator.name == "laplacian" else self.k_hat

    def error(self) -> np.ndarray:
        """Euclidean distance from the spectral response per sample."""
        return np.abs(self.response - self.exact)


def _ray_directions(slope: float, sign: int = 1):
    d = np.array([1.0, sign * slope])
    return d / np.linalg.norm(d)


def ray_curve(nodes: NodeSet, ws: WeightSet, slope: float, n_samples: int = 50, sign: int = 1,
              rows=None) -> RayCurve:
    """Average the effective response of all (interior) nodes along one ray."""
    if n_samples < 2:
        raise ValueError("a ray curve needs at least two samples")
    if rows is None:
        rows = np.nonzero(nodes.interior[ws.stencils.centers])[0]
    k_ny = nodes.k_nyquist
    k_hat = np.arange(1, n_samples + 1) / n_samples
    direction = _ray_directions(slope, sign)
    k = k_hat[:, None] * k_ny * direction
    resp = effective_response(ws, k, rows)
    op = ws.operator
    if op.is_gradient:
        comp = 0 if op.name == "ddx" else 1
        # scale so that a spectral operator traces the identity in k_hat
        scaled = resp * (k_hat / k[:, comp])[None, :]
    else:
        scaled = resp / k_ny ** 2
    return RayCurve(slope, k_hat, scaled.mean(axis=0), scaled.real.std(axis=0), op, sign)


# --------------------------------------------------------------------------
# error functionals


@dataclass(frozen=True)
class QuadratureRule:
    """Midpoint rule on a polar grid over the half-disc |k| <= k_M.

    Points are ordered radius-major.  ``radii`` and ``angles`` are kept so
    that trigonometric tables can be built by recurrence along each ray.
    """

    points: np.ndarray
    weights: np.ndarray
    radii: np.ndarray = None
    angles: np.ndarray = None


def half_disc_rule(k_m: float, n_radial: int = N_RADIAL, n_angular: int = N_ANGULAR) -> QuadratureRule:
    if not k_m > 0:
        raise ValueError("k_M must be positive")
    dr = k_m / n_radial
    dth = math.pi / n_angular
    r = (np.arange(n_radial) + 0.5) * dr
    th = (np.arange(n_angular) + 0.5) * dth - 0.5 * math.pi
    rr, tt = np.meshgrid(r, th, indexing="ij")
    pts = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])
    return QuadratureRule(pts, (rr * dr * dth).ravel(), r, th)


def _residual_parts(op: OperatorKind, offsets, w, rule: QuadratureRule):
    """Real-part residual (target - response) and imaginary response on the rule."""
    sin, omc = _trig_sums(offsets, w, rule.points)
    target = _target(op, rule.points)
    if op.is_gradient:
        return target - sin, omc
    return target - omc, -sin


def _weighted_sums(offsets, weights, rule: QuadratureRule):
    """sum_j w_j sin(k.x_j) and sum_j w_j (1 - cos(k.x_j)) on every quadrature point.

    ``offsets`` is (..., K, 2) and ``weights`` (..., P, K) holds P weight
    vectors per stencil; the results are (..., P, Q).  On a polar rule the
    phases exp(i r_n p) are stepped along each ray instead of tabulated.
    """
    if rule.radii is None or len(rule.radii) < 2:
        phase = np.einsum("...kd,qd->...kq", offsets, rule.points)
        return weights @ np.sin(phase), weights @ (1.0 - np.cos(phase))
    r = rule.radii
    proj = offsets @ np.vstack([np.cos(rule.angles), np.sin(rule.angles)])

    def minus_one(theta):
        # exp(i theta) - 1 without cancellation in the real part
        return -2.0 * np.sin(0.5 * theta) ** 2 + 1j * np.sin(theta)

    d = minus_one((r[1] - r[0]) * proj)
    u = minus_one(r[0] * proj)
    wc = weights.astype(complex)
    out = np.empty(weights.shape[:-1] + (len(r), len(rule.angles)), dtype=complex)
    for n in range(len(r)):
        if n:
            u = u + (u + 1.0) * d
        out[..., n, :] = wc @ u
    out = out.reshape(weights.shape[:-1] + (-1,))
    return out.imag.copy(), -out.real


def _coefficients_from_sums(op: OperatorKind, s_hat, c_hat, s_bar, c_bar, rule: QuadratureRule):
    target = _target(op, rule.points)
    if op.is_gradient:
        re_bar, im_bar, dre, dim = target - s_bar, c_bar, s_hat - s_bar, c_hat - c_bar
    else:
        re_bar, im_bar, dre, dim = target - c_bar, -s_bar, c_hat - c_bar, s_bar - s_hat
    q = rule.weights
    # residual(c) = re_bar - c dre,  imaginary(c) = im_bar + c dim
    alpha = (q * (dre ** 2 + dim ** 2)).sum(axis=-1)
    beta = (q * (re_bar * dre - im_bar * dim)).sum(axis=-1)
    gamma = (q * (re_bar ** 2 + im_bar ** 2)).sum(axis=-1)
    scale = (q * (s_hat ** 2 + c_hat ** 2 + s_bar ** 2 + c_bar ** 2)).sum(axis=-1)
    return alpha, beta, gamma, scale


def _pair_coefficients(op, offsets, w_hat, w_bar, rule):
    offsets = np.asarray(offsets, float)
    stack = np.stack([np.asarray(w_hat, float), np.asarray(w_bar, float)], axis=-2)
    sn, cs = _weighted_sums(offsets, stack, rule)
    return _coefficients_from_sums(op, sn[..., 0, :], cs[..., 0, :], sn[..., 1, :], cs[..., 1, :], rule)


def quadratic_coefficients(op, offsets, w_hat, w_bar, rule: QuadratureRule):
    """Coefficients (alpha, beta, gamma) with E(c) = alpha c^2 - 2 beta c + gamma.

    All arrays may carry a leading node axis; one pass over the quadrature
    points serves every candidate c.
    """
    a, b, g, _ = _pair_coefficients(OperatorKind.parse(op), offsets, w_hat, w_bar, rule)
    return a, b, g


def _solve_quadratic(alpha, beta, gamma, scale):
    degenerate = ~(alpha > DEGENERATE_TOL * scale)
    c = np.where(degenerate, 1.0, beta / np.where(degenerate, 1.0, alpha))
    e = np.maximum(alpha * c * c - 2.0 * beta * c + gamma, 0.0)
    return c, e, degenerate


def e_functional(offsets, w_hat, w_bar, c, k_m: float, op, rule: QuadratureRule = None):
    """Resolving-power error of the combined weights c w_hat + (1 - c) w_bar."""
    op = OperatorKind.parse(op)
    rule = rule or half_disc_rule(k_m)
    w = c * np.asarray(w_hat, float) + (1.0 - c) * np.asarray(w_bar, float)
    re, im = _residual_parts(op, np.asarray(offsets, float), w, rule)
    return (rule.weights * (re ** 2 + im ** 2)).sum(axis=-1)


def optimize_c(offsets, w_hat, w_bar, k_m: float, op, rule: QuadratureRule = None):
    """Closed-form minimiser of the quadratic error functional.

    Returns ``(c_hat, e_opt, degenerate)``; degenerate pairs (w_hat equal
    to w_bar up to the tolerance) get c_hat = 1.
    """
    rule = rule or half_disc_rule(k_m)
    op = OperatorKind.parse(op)
    c, e, degenerate = _solve_quadratic(*_pair_coefficients(op, offsets, w_hat, w_bar, rule))
    if np.ndim(c) == 0:
        return float(c), float(e), bool(degenerate)
    return c, e, degenerate


@dataclass
class MKCombination:
    """Per-node fusion coefficients of two weight sets."""

    c_hat: np.ndarray
    operator: OperatorKind
    k_m: float
    e_opt: np.ndarray
    e_hat: np.ndarray
    e_bar: np.ndarray
    degenerate: np.ndarray

    @property
    def c_bar(self) -> np.ndarray:
        return 1.0 - self.c_hat


def optimize_weights(w_hat: WeightSet, w_bar: WeightSet, k_m: float, rule: QuadratureRule = None,
                     chunk: int = 512) -> MKCombination:
    """Per-node optimal c_hat for two aligned weight sets."""
    return optimize_pairs([(w_hat, w_bar)], k_m, rule, chunk)[0]


def optimize_pairs(pairs, k_m: float, rule: QuadratureRule = None, chunk: int = 512) -> list:
    """Optimise several operator pairs that share one stencil set.

    The plane-wave sums of all pairs are accumulated in a single sweep over
    the quadrature points.
    """
    for w_hat, w_bar in pairs:
        _check_aligned(w_hat, w_bar)
        if not np.array_equal(w_hat.stencils.indices, pairs[0][0].stencils.indices):
            raise ValueError("operator pairs must share a stencil set")
    rule = rule or half_disc_rule(k_m)
    n = len(pairs[0][0])
    out = [{key: np.empty(n) for key in ("c", "e", "e_hat", "e_bar")} | {"deg": np.empty(n, dtype=bool)}
           for _ in pairs]
    offsets = pairs[0][0].stencils.offsets
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        stack = np.stack([w.weights[sl] for pair in pairs for w in pair], axis=1)
        sn, cs = _weighted_sums(offsets[sl], stack, rule)
        for p, ((w_hat, _), acc) in enumerate(zip(pairs, out)):
            a, b, g, scale = _coefficients_from_sums(w_hat.operator, sn[:, 2 * p], cs[:, 2 * p],
                                                     sn[:, 2 * p + 1], cs[:, 2 * p + 1], rule)
            acc["c"][sl], acc["e"][sl], acc["deg"][sl] = _solve_quadratic(a, b, g, scale)
            acc["e_hat"][sl] = np.maximum(a - 2 * b + g, 0.0)
            acc["e_bar"][sl] = g
    return [MKCombination(acc["c"], w_hat.operator, k_m, acc["e"], acc["e_hat"], acc["e_bar"], acc["deg"])
            for (w_hat, _), acc in zip(pairs, out)]


def _check_aligned(a: WeightSet, b: WeightSet):
    if a.weights.shape != b.weights.shape or not np.array_equal(a.stencils.indices, b.stencils.indices):
        raise ValueError("weight sets do not share a stencil")
    if a.operator != b.operator:
        raise ValueError("weight sets approximate different operators")


def combine(w_hat: WeightSet, w_bar: WeightSet, c_hat) -> WeightSet:
    """Affine fusion c w_hat + (1 - c) w_bar, per node."""
    _check_aligned(w_hat, w_bar)
    c = np.asarray(c_hat.c_hat if isinstance(c_hat, MKCombination) else c_hat, dtype=float)
    c = np.broadcast_to(c, (len(w_hat),))[:, None]
    if np.all(c == 1.0):
        w = w_hat.weights.copy()
    elif np.all(c == 0.0):
        w = w_bar.weights.copy()
    else:
        w = c * w_hat.weights + (1.0 - c) * w_bar.weights
    return WeightSet(w_hat.method, w_hat.operator, w_hat.m, w, w_hat.stencils,
                     np.maximum(w_hat.condition, w_bar.condition), f"{w_hat.kernel}+{w_bar.kernel}")


def improvement_metric(sk: RayCurve, mk: RayCurve) -> np.ndarray:
    """Percentage error reduction per sample; NaN where the SK error vanishes."""
    if not np.allclose(sk.k_hat, mk.k_hat) or sk.operator != mk.operator:
        raise ValueError("curves must share sampling and operator")
    e_sk = sk.error()
    e_mk = mk.error()
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (1.0 - e_mk / e_sk) * 100.0
    return np.where(e_sk > 0, out, np.nan)


# --------------------------------------------------------------------------
# multi-kernel filter


class SingularCalibrationError(ArithmeticError):
    pass


@dataclass
class FilterCalibration:
    """Per-node filter strength kappa and fusion coefficient c_hat."""

    kappa: np.ndarray
    c_hat: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    lambda1: float
    lambda2: float
    order: int


def default_filter_targets(k_ny: float):
    """Response 2/3 at k_x = k_y = (2/3) k_Ny and 1e-3 at |k| = 0.2 k_Ny on the diagonal."""
    k1 = np.array([2.0 / 3.0, 2.0 / 3.0]) * k_ny
    k2 = np.array([1.0, 1.0]) / math.sqrt(2.0) * 0.2 * k_ny
    return k1, k2, 2.0 / 3.0, 1e-3


def calibrate_filter(w_hat: WeightSet, w_bar: WeightSet, k1, k2, lambda1: float, lambda2: float,
                     rtol: float = 1e-12) -> FilterCalibration:
    """Solve, per node, for kappa and c_hat matching two filter responses.

    With p = kappa and q = kappa c_hat the two response equations
    ``kappa sum (1 - cos(k_n.x)) (c w_hat + (1 - c) w_bar) = lambda_n``
    are linear in (p, q).
    """
    _check_aligned(w_hat, w_bar)
    k1 = np.asarray(k1, float)
    k2 = np.asarray(k2, float)
    kk = np.vstack([k1, k2])
    off = w_hat.stencils.offsets
    _, omc_bar = _trig_sums(off, w_bar.weights, kk)
    _, omc_d = _trig_sums(off, w_hat.weights - w_bar.weights, kk)
    a1, a2 = omc_bar[:, 0], omc_bar[:, 1]
    d1, d2 = omc_d[:, 0], omc_d[:, 1]
    det = a1 * d2 - a2 * d1
    scale = np.abs(a1 * d2) + np.abs(a2 * d1)
    if np.allclose(k1, k2) or np.any(~(np.abs(det) > rtol * scale)):
        raise SingularCalibrationError("filter calibration system is singular")
    p = (lambda1 * d2 - lambda2 * d1) / det
    q = (a1 * lambda2 - a2 * lambda1) / det
    if np.any(p == 0):
        raise SingularCalibrationError("zero filter strength")
    return FilterCalibration(p, q / p, k1, k2, lambda1, lambda2, w_hat.operator.order)


def apply_filter(phi, hyp: WeightSet, kappa):
    """phi + kappa * hyperviscosity(phi)."""
    return phi + np.asarray(kappa) * hyp.apply(phi)
