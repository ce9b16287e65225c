import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

from kernboost.kernels import (
    EPANECHNIKOV,
    GAUSSIAN,
    GaussianMixture,
    ScaledKernel,
    TabulatedKernel,
    convolve,
    eval_kernel,
    get_kernel,
    higher_order_kernel,
    kernel_moment,
)

SQ2, SQ3 = math.sqrt(2), math.sqrt(3)


def phi(u, s=1.0):
    return math.exp(-0.5 * (u / s) ** 2) / (s * math.sqrt(2 * math.pi))


def quad_conv(f, g, u, half):
    return integrate.quad(lambda z: float(f(z)) * float(g(u - z)), -half, half, limit=200)[0]


def test_gaussian_at_zero():
    assert eval_kernel(GAUSSIAN, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-15)
    assert eval_kernel(GAUSSIAN, 0.0) == pytest.approx(0.39894, abs=1e-5)


def test_epanechnikov_outside_support():
    assert eval_kernel(EPANECHNIKOV, 2.0) == 0.0
    assert eval_kernel(EPANECHNIKOV, 0.0) == 0.75


def test_mixture_eval_hand_value():
    k = GaussianMixture.from_scales([(2, 1), (-1, SQ2)])
    expected = 2 * phi(0.0) - phi(0.0, SQ2)
    assert k(0.0) == pytest.approx(expected, abs=1e-14)
    assert k(0.0) == pytest.approx(0.51579, abs=1e-5)


def test_mixture_coefficients_must_sum_to_one():
    with pytest.raises(ValueError):
        GaussianMixture.from_scales([(2, 1), (-0.5, 2)])


def test_get_kernel_names():
    assert get_kernel("Gaussian") == GAUSSIAN
    assert get_kernel("epanechnikov") == EPANECHNIKOV
    with pytest.raises(ValueError):
        get_kernel("triweight")


def test_scaled_kernel():
    kh = ScaledKernel(GAUSSIAN, 0.3)
    u = np.linspace(-1, 1, 11)
    np.testing.assert_allclose(kh(u), GAUSSIAN(u / 0.3) / 0.3, rtol=0, atol=0)
    with pytest.raises(ValueError):
        ScaledKernel(GAUSSIAN, 0.0)


def test_gaussian_self_convolution_closed_form():
    k = convolve(GAUSSIAN, GAUSSIAN)
    assert isinstance(k, GaussianMixture)
    assert k.pairs == [(1.0, pytest.approx(SQ2, abs=1e-15))]


def test_mixture_self_convolution_terms_and_quadrature():
    m = GaussianMixture.from_scales([(2, 1), (-1, SQ2)])
    mm = convolve(m, m)
    got = mm.pairs
    assert [c for c, _ in got] == [4.0, -4.0, 1.0]
    np.testing.assert_allclose([s for _, s in got], [SQ2, SQ3, 2.0], rtol=1e-14)
    for u in (0.0, 0.7, 2.5):
        assert mm(u) == pytest.approx(quad_conv(m, m, u, 12.0), abs=1e-9)


def test_epanechnikov_self_convolution():
    k = convolve(EPANECHNIKOV, EPANECHNIKOV)
    assert isinstance(k, TabulatedKernel)
    assert k.lo == pytest.approx(-2.0)
    assert k.half_width == pytest.approx(2.0)
    assert k.integral() == pytest.approx(1.0, abs=1e-6)

    # closed form of the Epanechnikov self-convolution
    def exact(u):
        a = abs(u)
        return 3 / 160 * (2 - a) ** 3 * (a * a + 6 * a + 4) if a <= 2 else 0.0

    for u in (0.0, 0.3, 1.0, 1.7, 2.5):
        assert k(u) == pytest.approx(exact(u), abs=1e-5)


def test_convolve_rejects_mismatched_steps():
    a = TabulatedKernel("epanechnikov", -1.0, 0.5, [0, 0.5625, 0.75, 0.5625, 0])
    b = TabulatedKernel("epanechnikov", -1.0, 0.25, EPANECHNIKOV(np.linspace(-1, 1, 9)))
    with pytest.raises(ValueError, match="incompatible steps"):
        convolve(a, b)


def test_higher_order_r0_is_base():
    assert higher_order_kernel(GAUSSIAN, 0) is GAUSSIAN


def test_higher_order_r1():
    k = higher_order_kernel(GAUSSIAN, 1)
    assert k.coefficients.tolist() == [2.0, -1.0]
    np.testing.assert_allclose(k.scales, [1.0, SQ2], rtol=1e-15)
    assert integrate.quad(lambda u: k(u), -20, 20)[0] == pytest.approx(1.0, abs=1e-10)
    assert integrate.quad(lambda u: u * u * k(u), -20, 20)[0] == pytest.approx(0.0, abs=1e-10)


def test_higher_order_r2_symbolic():
    k = higher_order_kernel(GAUSSIAN, 2)
    assert k.coefficients.tolist() == [4.0, -6.0, 4.0, -1.0]
    np.testing.assert_allclose(k.scales, [1.0, SQ2, SQ3, 2.0], rtol=1e-15)
    # same result through two explicit applications of 2K - K*K
    k1 = GaussianMixture([(2, 1), (-1, 2)])
    kk = convolve(k1, k1)
    manual = GaussianMixture([(2 * c, v) for c, v in k1.terms] + [(-c, v) for c, v in kk.terms])
    assert manual == k


def test_higher_order_rejects_non_plain_base():
    with pytest.raises(ValueError):
        higher_order_kernel(GaussianMixture([(2, 1), (-1, 2)]), 1)
    with pytest.raises(ValueError):
        higher_order_kernel(GAUSSIAN, -1)


def test_moments_gaussian():
    assert kernel_moment(GAUSSIAN, 1) == 0.0
    assert kernel_moment(GAUSSIAN, 2) == pytest.approx(1.0, abs=1e-15)
    assert kernel_moment(GAUSSIAN, 4) == pytest.approx(3.0, abs=1e-15)
    assert kernel_moment(higher_order_kernel(GAUSSIAN, 1), 2) == pytest.approx(0.0, abs=1e-8)


def test_moments_epanechnikov_match_closed_form():
    # int u^p 0.75 (1 - u^2) du over [-1, 1] for even p
    for p in (0, 2, 4):
        exact = 1.5 * (1 / (p + 1) - 1 / (p + 3))
        assert kernel_moment(EPANECHNIKOV, p) == pytest.approx(exact, abs=1e-9)
    tab = convolve(EPANECHNIKOV, EPANECHNIKOV)
    assert kernel_moment(tab, 2) == pytest.approx(0.4, abs=1e-6)


@pytest.mark.parametrize("r", range(5))
def test_twicing_kernel_order_is_a_power_of_two(r):
    # 1 - FT(K_r) = (1 - FT(K))^(2^r): the first nonvanishing even moment is 2^(r+1)
    k = higher_order_kernel(GAUSSIAN, r)
    order = 2 ** (r + 1)
    for p in range(1, min(order, 9)):
        assert kernel_moment(k, p) == pytest.approx(0.0, abs=1e-6)
    assert abs(kernel_moment(k, order)) >= 1.0


def test_r2_sixth_moment_vanishes_by_quadrature():
    k = higher_order_kernel(GAUSSIAN, 2)
    val = integrate.quad(lambda u: u**6 * k(u), -30, 30, limit=200)[0]
    assert abs(val) < 1e-6


@pytest.mark.parametrize("r", [4, 6])
def test_stable_evaluation_matches_extended_precision(r):
    k = higher_order_kernel(GAUSSIAN, r)
    mpmath.mp.dps = 60
    try:
        for u in (0.0, 0.37, 1.5, 3.2, 7.9):
            exact = mpmath.fsum(
                mpmath.mpf(c.numerator) / c.denominator
                * mpmath.npdf(u, 0, mpmath.sqrt(mpmath.mpf(v.numerator) / v.denominator))
                for c, v in k.terms
            )
            assert k(u) == pytest.approx(float(exact), abs=1e-6)
    finally:
        mpmath.mp.dps = 15


KERNELS = {
    "gaussian": GAUSSIAN,
    "epanechnikov": EPANECHNIKOV,
    "twice_gauss": higher_order_kernel(GAUSSIAN, 1),
    "gauss_r3": higher_order_kernel(GAUSSIAN, 3),
    "gauss_r6": higher_order_kernel(GAUSSIAN, 6),
    "epan_conv": convolve(EPANECHNIKOV, EPANECHNIKOV),
    "epan_r2": higher_order_kernel(EPANECHNIKOV, 2),
}


@pytest.mark.parametrize("name", KERNELS)
def test_integral_and_symmetry(name):
    k = KERNELS[name]
    half = k.half_width
    u = np.linspace(-half, half, 400001)
    assert np.trapezoid(k(u), u) == pytest.approx(1.0, abs=1e-6)
    v = np.linspace(0, half, 2001)
    np.testing.assert_allclose(k(v), k(-v), rtol=0, atol=1e-10)


def test_convolve_commutes():
    pairs = [
        (GaussianMixture([(2, 1), (-1, 2)]), GAUSSIAN),
        (EPANECHNIKOV, convolve(EPANECHNIKOV, EPANECHNIKOV)),
    ]
    u = np.linspace(-6, 6, 241)
    for a, b in pairs:
        np.testing.assert_allclose(convolve(a, b)(u), convolve(b, a)(u), rtol=0, atol=1e-10)


def test_closed_form_matches_grid_quadrature():
    a = GaussianMixture([(2, 1), (-1, 2)])
    for x, y in [(GAUSSIAN, GAUSSIAN), (a, GAUSSIAN), (a, a)]:
        closed = convolve(x, y)
        grid = convolve(x, y, method="grid")
        assert isinstance(grid, TabulatedKernel)
        u = np.linspace(-10, 10, 801)
        np.testing.assert_allclose(grid(u), closed(u), rtol=0, atol=1e-5)
