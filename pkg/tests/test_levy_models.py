import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import integrate, stats

from conftest import BASKET_SIGMA, finite_diff
from levy_isamp import DomainError, VarianceGammaModel, martingale_drift
from levy_isamp.levy_models import cgf, cgf_grad, domain_margin, esscher_tilt


@st.composite
def models(draw, max_dim=3):
    n = draw(st.integers(1, max_dim))
    lam = draw(st.floats(0.5, 5.0))
    b = np.array(draw(st.lists(st.floats(-0.4, 0.2), min_size=n, max_size=n)))
    a = np.array(draw(st.lists(st.floats(-0.2, 0.2), min_size=n * n, max_size=n * n))).reshape(n, n)
    sigma = a @ a.T + 0.01 * np.eye(n)
    assume(np.all(1 - b / lam - np.diag(sigma) / (2 * lam) > 0.05))
    return VarianceGammaModel(lam, b, sigma)


def in_domain_point(draw, model, scale=3.0):
    th = np.array(draw(st.lists(st.floats(-scale, scale), min_size=model.dim, max_size=model.dim)))
    assume(model.domain_margin(th) > 1e-3)
    return th


@st.composite
def model_and_theta(draw):
    m = draw(models())
    return m, in_domain_point(draw, m)


def quad_cgf(lam, b, s2, mu, theta):
    """log E exp(theta X_1) by integrating the conditional Gaussian over the gamma law."""
    rate = theta * b + 0.5 * theta**2 * s2
    logpdf = stats.gamma(a=lam, scale=1.0 / lam).logpdf
    val, _ = integrate.quad(lambda g: math.exp(logpdf(g) + rate * g), 0, np.inf, limit=400,
                            epsabs=0, epsrel=1e-12)
    return theta * mu + math.log(val)


class TestMartingaleDrift:
    def test_paper_1d(self):
        mu = martingale_drift(1.0, [-0.2], [[0.04]])
        assert mu[0] == pytest.approx(math.log(1.18), abs=1e-15)
        assert mu[0] == pytest.approx(0.165514, abs=1e-6)

    def test_degenerate_symmetric(self):
        mu = martingale_drift(1.0, [0.0], [[1e-12]])
        assert abs(mu[0]) <= 1e-12

    def test_basket(self):
        mu = martingale_drift(1.0, [-0.2] * 3, BASKET_SIGMA)
        np.testing.assert_allclose(mu, math.log(1.18), rtol=0, atol=1e-15)

    def test_inadmissible(self):
        with pytest.raises(DomainError):
            martingale_drift(1.0, [0.9], [[0.4]])

    @given(models())
    def test_martingale_cgf_zero(self, model):
        for e in np.eye(model.dim):
            assert abs(model.cgf(e)) <= 1e-12


class TestModel:
    def test_non_pd_sigma(self):
        with pytest.raises(ValueError, match="sigma not positive definite"):
            VarianceGammaModel(1.0, [-0.2], [[-0.04]])

    def test_asymmetric_sigma(self):
        with pytest.raises(ValueError, match="not symmetric"):
            VarianceGammaModel(1.0, [0, 0], [[0.04, 0.01], [0.0, 0.04]])

    def test_bad_lambda(self):
        with pytest.raises(ValueError):
            VarianceGammaModel(0.0, [-0.2], [[0.04]])

    def test_frozen(self, vg1):
        with pytest.raises(ValueError):
            vg1.b[0] = 1.0


class TestCGF:
    def test_origin(self, vg1, vg3):
        assert vg1.cgf(0.0) == 0.0
        assert vg3.cgf(np.zeros(3)) == 0.0

    def test_closed_form(self, vg1):
        expected = -math.log(1.18) - math.log(0.78)
        assert vg1.cgf(-1.0) == pytest.approx(expected, abs=1e-15)
        assert vg1.cgf(-1.0) == pytest.approx(0.082947, abs=1e-6)

    @pytest.mark.parametrize("theta", [-2.5, -1.0, -0.3, 0.5, 1.0, 2.0])
    def test_quadrature_oracle(self, vg1, theta):
        q = quad_cgf(1.0, -0.2, 0.04, math.log(1.18), theta)
        assert vg1.cgf(theta) == pytest.approx(q, rel=1e-9, abs=1e-12)

    def test_outside_domain(self, vg1):
        # u*(-8) = 1 - 1.6 - 1.28
        assert vg1.domain_margin(-8.0) == pytest.approx(-1.88)
        assert vg1.cgf(-8.0) == math.inf
        assert vg1.domain_margin(12.0) == pytest.approx(0.52)
        assert math.isfinite(vg1.cgf(12.0))

    def test_vectorized(self, vg1, vg3):
        th = np.array([-1.0, 0.0, -8.0])
        out = vg1.cgf(th)
        assert out.shape == (3,)
        assert out[0] == vg1.cgf(-1.0) and out[1] == 0.0 and out[2] == math.inf
        pts = np.array([[-1.0, -1.0, -1.0], [0.0, 0.0, 0.0]])
        np.testing.assert_array_equal(vg3.cgf(pts), [vg3.cgf(p) for p in pts])

    def test_module_wrappers(self, vg1):
        assert cgf(vg1, -1.0) == vg1.cgf(-1.0)
        assert float(domain_margin(vg1, -1.0)) == pytest.approx(0.78)

    @given(models(), st.data())
    def test_midpoint_convexity(self, model, data):
        a = in_domain_point(data.draw, model)
        b = in_domain_point(data.draw, model)
        mid = model.cgf(0.5 * (a + b))
        assert mid <= 0.5 * (model.cgf(a) + model.cgf(b)) + 1e-12 * (1 + abs(mid))


class TestGradient:
    def test_origin(self, vg1):
        assert vg1.cgf_grad(0.0)[0] == pytest.approx(math.log(1.18) - 0.2, abs=1e-15)
        assert vg1.cgf_grad(0.0)[0] == pytest.approx(-0.034486, abs=1e-6)

    def test_closed_form(self, vg1):
        assert vg1.cgf_grad(-1.0)[0] == pytest.approx(math.log(1.18) - 0.24 / 0.78, abs=1e-15)
        assert vg1.cgf_grad(-1.0)[0] == pytest.approx(-0.142178, abs=1e-6)

    def test_outside_domain_raises(self, vg1):
        with pytest.raises(DomainError):
            cgf_grad(vg1, -8.0)

    @given(model_and_theta())
    def test_finite_difference(self, mt):
        model, th = mt
        assume(model.domain_margin(th) > 0.05)
        g = np.ravel(model.cgf_grad(th))
        fd = finite_diff(lambda x: model.cgf(x), th, h=1e-6)
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-7)

    @given(model_and_theta())
    def test_hessian_finite_difference(self, mt):
        model, th = mt
        assume(model.domain_margin(th) > 0.05)
        H = model.cgf_hessian(th)
        cols = [finite_diff(lambda x, i=i: np.ravel(model.cgf_grad(x))[i], th, h=1e-6)
                for i in range(model.dim)]
        np.testing.assert_allclose(H, np.array(cols), rtol=1e-5, atol=1e-6)


class TestEsscher:
    def test_identity_tilt(self, vg3):
        t = vg3.esscher_tilt(np.zeros(3))
        np.testing.assert_array_equal(t.b, vg3.b)
        np.testing.assert_array_equal(t.sigma, vg3.sigma)
        np.testing.assert_array_equal(t.mu, vg3.mu)
        assert t.lam == vg3.lam

    def test_closed_form(self, vg1):
        t = esscher_tilt(vg1, -1.0)
        assert t.b[0] == pytest.approx(-0.24 / 0.78, abs=1e-15)
        assert t.b[0] == pytest.approx(-0.307692, abs=1e-6)
        assert t.sigma[0, 0] == pytest.approx(0.051282, abs=1e-6)
        assert t.mu[0] == vg1.mu[0] and t.lam == vg1.lam and t.tilted

    def test_outside_domain(self, vg1):
        with pytest.raises(DomainError):
            vg1.esscher_tilt(-8.0)

    @given(models(), st.data())
    def test_cgf_identity(self, model, data):
        th = in_domain_point(data.draw, model, scale=2.0)
        u = in_domain_point(data.draw, model, scale=2.0)
        assume(model.domain_margin(th + u) > 1e-3)
        tilted = model.esscher_tilt(th)
        lhs = tilted.cgf(u)
        rhs = model.cgf(th + u) - model.cgf(th)
        assert abs(lhs - rhs) <= 1e-10
