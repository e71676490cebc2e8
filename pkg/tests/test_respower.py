"""Effective wavenumbers, ray curves, the c-hat optimiser and filter calibration."""
import math

import numpy as np
import pytest
from conftest import GoldenOracle, monomial_error, polar_half_disc, random_stencils
from hypothesis import given, settings
from hypothesis import strategies as st

from mkmesh.kernels import GAUSSIAN_RBF, GAUSSIAN_SPH, HERMITE_ABF, IMQ, KernelSpec
from mkmesh.nodeset import DomainSpec, build_stencils, uniform_grid
from mkmesh.respower import (
    DEFAULT_KM_FRACTION,
    QuadratureRule,
    SingularCalibrationError,
    calibrate_filter,
    combine,
    default_filter_targets,
    e_functional,
    effective_response,
    half_disc_rule,
    improvement_metric,
    keff_gradient,
    optimize_c,
    optimize_weights,
    qeff2_laplacian,
    quadratic_coefficients,
    ray_curve,
)
from mkmesh.schemes import SchemeSpec, build_bundle
from mkmesh.weights import FlatnessRule, WeightSet, fd_reference_weights, labfm_weights, rbffd_weight_family


def rbf_pair(stencils, m=2, ops=("ddx", "laplacian")):
    a = rbffd_weight_family(stencils, KernelSpec(GAUSSIAN_RBF), m, ops, flatness=FlatnessRule.default(GAUSSIAN_RBF))
    b = rbffd_weight_family(stencils, KernelSpec(IMQ), m, ops, flatness=FlatnessRule.default(IMQ))
    return a, b


def test_central_fd_has_no_dissipation():
    for order in (2, 4, 6, 8):
        off, w = fd_reference_weights(order, "ddx", 0.1)
        off2 = np.column_stack([off, np.zeros_like(off)])
        k = np.column_stack([np.linspace(0, math.pi / 0.1, 40), np.zeros(40)])
        keff = keff_gradient(off2, w, k)
        assert np.all(np.abs(keff.imag) <= 1e-13 * np.abs(w).sum())
    off, w = fd_reference_weights(2, "ddx", 0.1)
    keff = keff_gradient(np.column_stack([off, [0, 0]]), w, k)
    assert np.allclose(keff.real, np.sin(k[:, 0] * 0.1) / 0.1, atol=1e-12)
    off, w = fd_reference_weights(2, "laplacian", 0.1)
    q2 = qeff2_laplacian(np.column_stack([off, [0, 0]]), w, k)
    assert np.allclose(q2.real, 2 * (1 - np.cos(k[:, 0] * 0.1)) / 0.01, atol=1e-9)
    assert np.all(np.abs(q2.imag) <= 1e-13 * np.abs(w).sum())


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_parity_relations(seed):
    rng = np.random.default_rng(seed)
    off = rng.uniform(-2, 2, (15, 2))
    w = rng.normal(size=15)
    k = rng.uniform(-3, 3, (20, 2))
    tol = 1e-12 * np.abs(w).sum()
    g, gm = keff_gradient(off, w, k), keff_gradient(off, w, -k)
    assert np.all(np.abs(g.real + gm.real) <= tol)
    assert np.all(np.abs(g.imag - gm.imag) <= tol)
    q, qm = qeff2_laplacian(off, w, k), qeff2_laplacian(off, w, -k)
    assert np.all(np.abs(q.real - qm.real) <= tol)
    assert np.all(np.abs(q.imag + qm.imag) <= tol)


def test_plane_wave_oracle():
    rng = np.random.default_rng(4)
    off = rng.uniform(-1, 1, (12, 2))
    w = rng.normal(size=12)
    for k in rng.uniform(-4, 4, (10, 2)):
        # apply the difference-form operator to exp(i k.x) sampled at the stencil
        applied = np.sum(w * (np.exp(1j * off @ k) - 1.0))
        assert applied == pytest.approx(1j * keff_gradient(off, w, k), abs=1e-12)
        assert applied == pytest.approx(-qeff2_laplacian(off, w, k), abs=1e-12)


def test_half_disc_rule():
    rule = half_disc_rule(2.0)
    assert len(rule.points) == 32 * 48
    assert rule.weights.sum() == pytest.approx(0.5 * math.pi * 4.0, rel=1e-12)
    assert np.all(rule.points[:, 0] >= 0)
    pts, area = polar_half_disc(2.0)
    assert np.allclose(rule.points, pts) and np.allclose(rule.weights, area)
    with pytest.raises(ValueError):
        half_disc_rule(0.0)


def test_ray_recurrence_matches_direct_tabulation():
    st_ = random_stencils(6, 20, seed=3)
    a, b = rbf_pair(st_)
    rule = half_disc_rule(0.3 * math.pi)
    flat = QuadratureRule(rule.points, rule.weights)
    for q in range(2):
        ra = quadratic_coefficients(a[q].operator, st_.offsets, a[q].weights, b[q].weights, rule)
        fa = quadratic_coefficients(a[q].operator, st_.offsets, a[q].weights, b[q].weights, flat)
        for x, y in zip(ra, fa):
            assert np.allclose(x, y, rtol=1e-11, atol=1e-14 * np.abs(y).max())


def test_error_functional_is_quadratic():
    st_ = random_stencils(4, 20, seed=9)
    a, b = rbf_pair(st_)
    km = 0.3 * math.pi
    for q in range(2):
        for i in range(4):
            args = (st_.offsets[i], a[q].weights[i], b[q].weights[i])
            al, be, ga = quadratic_coefficients(a[q].operator, *args, half_disc_rule(km))
            for c in (-3.0, -0.5, 0.0, 0.7, 1.0, 4.0):
                e = e_functional(*args, c, km, a[q].operator)
                assert e == pytest.approx(al * c * c - 2 * be * c + ga, rel=1e-10)


def test_optimiser_matches_golden_section_and_improves():
    st_ = random_stencils(40, 25, seed=21)
    a, b = rbf_pair(st_, m=3, ops=("ddy", "laplacian"))
    km = 0.3 * math.pi
    for q in range(2):
        for i in range(40):
            args = (st_.offsets[i], a[q].weights[i], b[q].weights[i])
            c, e, deg = optimize_c(*args, km, a[q].operator)
            assert not deg
            cg = GoldenOracle(*args, str(a[q].operator), km).minimise()
            assert abs(c - cg) <= 1e-8 * max(1.0, abs(c))
            e0 = e_functional(*args, 0.0, km, a[q].operator)
            e1 = e_functional(*args, 1.0, km, a[q].operator)
            assert e <= min(e0, e1) * (1 + 1e-12)


def test_identical_weights_are_degenerate():
    st_ = random_stencils(3, 20, seed=2)
    a, _ = rbf_pair(st_)
    comb = optimize_weights(a[0], a[0], 1.0)
    assert np.all(comb.degenerate) and np.all(comb.c_hat == 1.0)
    c, _, deg = optimize_c(st_.offsets[0], a[0].weights[0], a[0].weights[0], 1.0, "ddx")
    assert deg and c == 1.0


def test_optimize_weights_tables():
    st_ = random_stencils(10, 20, seed=6)
    a, b = rbf_pair(st_)
    km = 0.3 * math.pi
    comb = optimize_weights(a[1], b[1], km)
    for i in range(10):
        args = (st_.offsets[i], a[1].weights[i], b[1].weights[i])
        assert comb.e_hat[i] == pytest.approx(e_functional(*args, 1.0, km, "laplacian"), rel=1e-9)
        assert comb.e_bar[i] == pytest.approx(e_functional(*args, 0.0, km, "laplacian"), rel=1e-9)
    assert np.all(comb.e_opt <= np.minimum(comb.e_hat, comb.e_bar) * (1 + 1e-12))
    assert np.allclose(comb.c_bar, 1 - comb.c_hat)


def test_combine_endpoints_and_consistency():
    st_ = random_stencils(8, 30, seed=12)
    a = labfm_weights(st_, KernelSpec(HERMITE_ABF), 4, "laplacian")
    b = labfm_weights(st_, KernelSpec(HERMITE_ABF, generator=GAUSSIAN_SPH), 4, "laplacian")
    assert np.array_equal(combine(a, b, 1.0).weights, a.weights)
    assert np.array_equal(combine(a, b, 0.0).weights, b.weights)
    c = np.linspace(-5, 7, 8)
    fused = combine(a, b, c)
    assert np.allclose(fused.weights, c[:, None] * a.weights + (1 - c[:, None]) * b.weights)
    # an affine combination of consistent weights is consistent
    assert monomial_error(fused, 4) <= 1e-7
    with pytest.raises(ValueError):
        combine(a, labfm_weights(st_, KernelSpec(HERMITE_ABF), 4, "ddx"), 0.5)


def fd_weightset(n=16):
    g = uniform_grid(DomainSpec.periodic(), n)
    st_ = build_stencils(g, radius=1.01 * g.s)
    w = np.where(np.isclose(st_.offsets[..., 1], 0.0), np.sign(st_.offsets[..., 0]) / (2 * g.s), 0.0)
    return g, WeightSet("fd", "ddx", 2, w, st_)


def test_ray_curve_uniform_grid():
    g, ws = fd_weightset()
    curve = ray_curve(g, ws, 0.0, n_samples=20)
    assert np.all(curve.spread <= 1e-12)
    assert np.all(np.abs(curve.response.imag) <= 1e-12)
    k = curve.k_hat * g.k_nyquist
    assert np.allclose(curve.response.real, np.sin(k * g.s) / (g.s * g.k_nyquist), atol=1e-12)
    assert curve.error()[0] < 1e-2 and curve.error()[-1] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        ray_curve(g, ws, 0.0, n_samples=1)


def test_improvement_metric():
    g, ws = fd_weightset()
    sk = ray_curve(g, ws, 0.0, 10)
    assert np.all(improvement_metric(sk, sk) == 0.0)
    half = WeightSet("fd", "ddx", 2, ws.weights, ws.stencils)
    mk = ray_curve(g, half, 0.0, 10)
    mk.response = sk.exact + 0.5 * (sk.response - sk.exact)
    assert np.allclose(improvement_metric(sk, mk), 50.0)
    sk.response = sk.exact.astype(complex)
    assert np.all(np.isnan(improvement_metric(sk, mk)))


def test_sph_curve_is_worse_than_labfm(nodes441):
    sph = build_bundle(nodes441, SchemeSpec("sph"), ops=("ddx",), fuse=False).get("ddx", "sk1")
    lab = build_bundle(nodes441, SchemeSpec("labfm", 4), ops=("ddx",), fuse=False).get("ddx", "sk1")
    e_sph = ray_curve(nodes441, sph, 0.0, 10).error()
    e_lab = ray_curve(nodes441, lab, 0.0, 10).error()
    assert e_sph[2] > e_lab[2]


def test_default_fractions():
    assert DEFAULT_KM_FRACTION == {"sph": 0.2, "rbf-fd": 0.3, "labfm": 0.3}


def test_filter_calibration(nodes441):
    bundle = build_bundle(nodes441, SchemeSpec("labfm", 8), ops=("hyp8",), fuse=False)
    h1, h2 = bundle.sk1["hyp8"], bundle.sk2["hyp8"]
    k1, k2, l1, l2 = default_filter_targets(nodes441.k_nyquist)
    cal = calibrate_filter(h1, h2, k1, k2, l1, l2)
    fused = combine(h1, h2, cal.c_hat)
    for k, lam in ((k1, l1), (k2, l2)):
        # filter a plane wave sampled on each stencil (k need not be a
        # periodic mode of the box) and read the node-wise damping factor
        local = np.exp(1j * fused.stencils.offsets @ k) - 1.0
        ratio = 1.0 + cal.kappa * np.sum(np.where(fused.stencils.mask, fused.weights * local, 0.0), axis=1)
        assert np.allclose(ratio.real, 1 - lam, atol=1e-10)
        resp = effective_response(fused, k).real[:, 0]
        assert np.allclose(cal.kappa * resp, lam, rtol=1e-10)
    with pytest.raises(SingularCalibrationError):
        calibrate_filter(h1, h2, k1, k1, l1, l2)
