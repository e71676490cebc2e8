"""Analytic solutions and error norms against independent references."""
import math

import numpy as np
import pytest
from conftest import burgers_fd_reference
from scipy.special import ive

from mkmesh.solver.oracles import (
    TOPHAT_KMAX,
    ad_exact_case1,
    ad_exact_case2,
    bessel_i_sequence,
    burgers_exact,
    disc_poisson_problem,
    l2_norm,
    periodic_poisson_problem,
    ratio_R,
    test_function,
)


def test_test_function_derivatives():
    rng = np.random.default_rng(0)
    x, y = rng.uniform(0, 1, 200), rng.uniform(0, 1, 200)
    phi, (gx, gy), lap = test_function(x, y)
    h = 1e-5
    f = lambda a, b: test_function(a, b)[0]  # noqa: E731
    assert np.allclose((f(x + h, y) - f(x - h, y)) / (2 * h), gx, atol=1e-6 * np.abs(gx).max())
    assert np.allclose((f(x, y + h) - f(x, y - h)) / (2 * h), gy, atol=1e-6 * np.abs(gy).max())
    h = 1e-4
    fd_lap = (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4 * f(x, y)) / h ** 2
    assert np.allclose(fd_lap, lap, atol=1e-4 * np.abs(lap).max())
    assert np.allclose(test_function(x, 0.0)[0], 0.0)
    assert TOPHAT_KMAX == pytest.approx(math.hypot(15 * 2 * math.pi, 2 * math.pi))


def test_test_function_is_periodic():
    x = np.linspace(0, 1, 13)
    assert np.allclose(test_function(x, 0.3)[0], test_function(x + 1, 0.3)[0], atol=1e-12)
    assert np.allclose(test_function(0.2, x)[0], test_function(0.2, x + 1)[0], atol=1e-12)


def test_l2_norm():
    a = np.array([1.0, 2.0, 2.0])
    assert l2_norm(a, a) == 0.0
    assert l2_norm(np.zeros(3), a) == 1.0
    assert l2_norm(np.array([1.0, 2.0, 1.0]), a) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        l2_norm(a, np.zeros(3))
    with pytest.raises(ValueError):
        l2_norm(a, np.zeros(2))


def test_ratio_R():
    assert ratio_R(0.5, 1.0) == 0.5
    assert math.isnan(ratio_R(0.5, 0.0))
    assert np.allclose(ratio_R([1.0, 2.0], [2.0, 2.0]), [0.5, 1.0])


@pytest.mark.parametrize("M", [1, 3, 5])
def test_ad_initial_conditions(M):
    rng = np.random.default_rng(M)
    x, y = rng.uniform(0, 1, 500), rng.uniform(0, 1, 500)
    ic1 = sum(np.sin(2 * math.pi * m * x) for m in range(1, M + 1))
    assert np.max(np.abs(ad_exact_case1(x, y, 0.0, M, 200.0) - ic1)) <= 1e-14
    ic2 = sum(np.sin(math.sqrt(2) * m * math.pi * (x + y)) for m in range(1, M + 1))
    assert np.max(np.abs(ad_exact_case2(x, y, 0.0, M, 200.0) - ic2)) <= 1e-14


def spectral_advection_diffusion(u0, lengths, t, Re, a):
    """Exact Fourier propagation of gridded initial data (independent of the closed forms)."""
    n = u0.shape
    kx = 2 * math.pi * np.fft.fftfreq(n[1], lengths[0] / n[1])
    ky = 2 * math.pi * np.fft.fftfreq(n[0], lengths[1] / n[0])
    KX, KY = np.meshgrid(kx, ky)
    symbol = -1j * (a[0] * KX + a[1] * KY) - (KX ** 2 + KY ** 2) / Re
    return np.fft.ifft2(np.fft.fft2(u0) * np.exp(symbol * t)).real


@pytest.mark.parametrize("case", [1, 2])
def test_ad_against_fourier_propagation(case):
    L = 1.0 if case == 1 else math.sqrt(2.0)
    exact = ad_exact_case1 if case == 1 else ad_exact_case2
    g = np.arange(64) * L / 64
    X, Y = np.meshgrid(g, g)
    u0 = exact(X, Y, 0.0, 3, 50.0)
    for t in (0.1, 0.5, 1.3):
        ref = spectral_advection_diffusion(u0, (L, L), t, 50.0, (1.0, 0.0))
        assert np.max(np.abs(exact(X, Y, t, 3, 50.0) - ref)) <= 1e-12


def test_ad_case2_rejects_cross_flow():
    with pytest.raises(ValueError):
        ad_exact_case2(0.1, 0.2, 0.0, a=(1.0, 0.5))


@pytest.mark.parametrize("z", [0.0, 0.3, 0.795774715, 5.0, 40.0])
def test_bessel_sequence(z):
    seq = bessel_i_sequence(30, z)
    assert np.allclose(seq, ive(np.arange(31), z), rtol=1e-12, atol=1e-300)
    with pytest.raises(ValueError):
        bessel_i_sequence(5, -1.0)


def test_burgers_limits():
    x = np.linspace(0, 1, 101)
    assert np.allclose(burgers_exact(x, 0.0, 10.0), np.sin(2 * math.pi * x), atol=1e-10)
    assert np.max(np.abs(burgers_exact(x, 50.0, 10.0))) < 1e-12
    # odd about x = 1/2 and periodic
    assert np.allclose(burgers_exact(x, 0.3), -burgers_exact(1 - x, 0.3), atol=1e-14)


def test_burgers_against_finite_differences():
    x, ref = burgers_fd_reference(0.5, 10.0)
    assert np.max(np.abs(burgers_exact(x, 0.5, 10.0) - ref)) <= 1e-6


def test_poisson_problems():
    rng = np.random.default_rng(1)
    x, y = rng.uniform(-0.7, 0.7, 50), rng.uniform(-0.7, 0.7, 50)
    f, u = periodic_poisson_problem(x, y)
    assert np.allclose(f, -8 * math.pi ** 2 * u)
    f, u = disc_poisson_problem(x, y)
    h = 1e-4
    g = lambda a, b: disc_poisson_problem(a, b)[1]  # noqa: E731
    lap = (g(x + h, y) + g(x - h, y) + g(x, y + h) + g(x, y - h) - 4 * g(x, y)) / h ** 2
    assert np.allclose(f, lap, atol=1e-5 * np.abs(f).max())
    th = np.linspace(0, 2 * math.pi, 20)
    assert np.allclose(disc_poisson_problem(np.cos(th), np.sin(th))[1], 0.0, atol=1e-15)
