"""Special-function contracts against extended-precision series oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trefftz_epw import specialfn

from oracles import bessel_j_oracle, bessel_y_oracle, phi0_series

# values frozen from the series oracles in oracles.py
PHI0_IPI = 3.8981718325193755e-17 + 0.6366197723675814j
PHI0_M50 = 0.02
Y0_AT_FIRST_J0_ZERO = 0.509924383448479   # x = 2.404825557695773


class TestPhi0:
    def test_zero_limit(self):
        assert specialfn.phi0(0.0) == 1.0 + 0.0j

    def test_imaginary_pi(self):
        val = specialfn.phi0(1j * np.pi)
        assert abs(val - PHI0_IPI) <= 1e-15
        assert abs(val - phi0_series(1j * np.pi)) <= 1e-15

    def test_minus_fifty(self):
        val = specialfn.phi0(-50.0)
        assert abs(val - PHI0_M50) <= 1e-14
        assert abs(val - phi0_series(-50.0)) <= 1e-15

    def test_array_input(self):
        a = np.array([0.0, 1e-6, 2.0 + 3.0j, -40.0])
        vals = specialfn.phi0(a)
        assert vals.shape == (4,)
        for ai, vi in zip(a, vals):
            assert abs(vi - phi0_series(ai)) <= 1e-14 * max(1.0, abs(vi))

    @pytest.mark.parametrize("mag", [1e-8, 1e-5, 1e-3, 0.5, 3.0, 40.0, 200.0])
    def test_oracle_agreement_across_magnitudes(self, mag):
        for ang in np.linspace(0.0, 2 * np.pi, 9):
            a = mag * np.exp(1j * ang)
            ref = phi0_series(a)
            assert abs(specialfn.phi0(a) - ref) <= 1e-14 * abs(ref)

    def test_entire_taylor_circle(self):
        # values on a small circle agree with 1 + a/2 + a^2/6
        for ang in np.linspace(0.0, 2 * np.pi, 33):
            a = 1e-4 * np.exp(1j * ang)
            taylor = 1.0 + a / 2.0 + a * a / 6.0
            assert abs(specialfn.phi0(a) - taylor) <= 1e-13

    @given(st.complex_numbers(max_magnitude=500.0, allow_nan=False,
                              allow_infinity=False))
    @settings(max_examples=60, deadline=None)
    def test_property_matches_series(self, a):
        ref = phi0_series(a)
        assert abs(specialfn.phi0(a) - ref) <= 1e-13 * max(1.0, abs(ref))


class TestBesselJ:
    def test_at_zero(self):
        assert specialfn.bessel_j(0, 0.0) == 1.0
        for m in (1, 2, 7, 100):
            assert specialfn.bessel_j(m, 0.0) == 0.0

    def test_recurrence_grid(self):
        # J_{m-1} + J_{m+1} = (2m/x) J_m on a 100-point (m, x) grid
        for m in range(1, 11):
            for x in np.linspace(0.5, 45.0, 10):
                lhs = specialfn.bessel_j(m - 1, x) + specialfn.bessel_j(m + 1, x)
                rhs = 2 * m / x * specialfn.bessel_j(m, x)
                scale = max(abs(specialfn.bessel_j(m - 1, x)),
                            abs(specialfn.bessel_j(m + 1, x)), abs(rhs))
                assert abs(lhs - rhs) <= 1e-10 * max(scale, 1e-30)

    @pytest.mark.parametrize("m,x", [(0, 0.3), (1, 2.0), (5, 5.0), (12, 11.5),
                                     (3, 30.0), (40, 17.0), (0, 55.0)])
    def test_series_oracle(self, m, x):
        ref = bessel_j_oracle(m, x)
        val = specialfn.bessel_j(m, x)
        if abs(ref) > 1e-300:
            assert abs(val - ref) <= 1e-11 * abs(ref)

    def test_high_order_domain(self):
        assert specialfn.bessel_j(10_000, 1.0) == 0.0  # deep underflow
        with pytest.raises(ValueError):
            specialfn.bessel_j(10_001, 1.0)
        with pytest.raises(ValueError):
            specialfn.bessel_j(-1, 1.0)
        with pytest.raises(ValueError):
            specialfn.bessel_j(0, -0.5)


class TestBesselY:
    def test_log_singularity_sign(self):
        assert specialfn.bessel_y(0, 1e-8) < -10.0

    def test_wronskian_grid(self):
        # J1 Y0 - J0 Y1 = 2/(pi x)
        for x in np.linspace(0.2, 48.0, 100):
            w = (specialfn.bessel_j(1, x) * specialfn.bessel_y(0, x)
                 - specialfn.bessel_j(0, x) * specialfn.bessel_y(1, x))
            exact = 2.0 / (np.pi * x)
            assert abs(w - exact) <= 1e-10 * abs(exact)

    def test_value_at_first_j0_zero(self):
        assert abs(specialfn.bessel_y(0, 2.404825557695773)
                   - Y0_AT_FIRST_J0_ZERO) <= 1e-12

    @pytest.mark.parametrize("m,x", [(0, 0.1), (0, 3.7), (0, 28.0),
                                     (1, 0.05), (1, 9.0), (1, 41.0)])
    def test_series_oracle(self, m, x):
        ref = bessel_y_oracle(m, x)
        assert abs(specialfn.bessel_y(m, x) - ref) <= 1e-11 * max(abs(ref), 1e-30)

    def test_domain(self):
        with pytest.raises(ValueError):
            specialfn.bessel_y(0, 0.0)
        with pytest.raises(ValueError):
            specialfn.bessel_y(0, -1.0)
        with pytest.raises(ValueError):
            specialfn.bessel_y(2, 1.0)


class TestHankel1:
    def test_leading_asymptotics(self):
        x = 1000.0
        mod = abs(specialfn.hankel1(0, x))
        assert abs(mod - np.sqrt(2.0 / (np.pi * x))) <= 1e-2 * mod

    def test_derivative_identity(self):
        # d/dx H0 = -H1, checked against a central difference
        h = 1e-6
        fd = (specialfn.hankel1(0, 5.0 + h) - specialfn.hankel1(0, 5.0 - h)) / (2 * h)
        assert abs(fd + specialfn.hankel1(1, 5.0)) <= 1e-6

    def test_imaginary_blowup_at_origin(self):
        assert specialfn.hankel1(0, 1e-9).imag < -10.0

    def test_composition(self):
        for x in (0.4, 2.0, 17.0):
            h = specialfn.hankel1(1, x)
            assert h.real == pytest.approx(specialfn.bessel_j(1, x), rel=1e-12)
            assert h.imag == pytest.approx(specialfn.bessel_y(1, x), rel=1e-12)


class TestFundamentalSolution:
    KAPPA = 16.0
    SRC = np.array([-0.3, 0.2])

    def test_radial_symmetry(self):
        r = 0.37
        a, _ = specialfn.fundamental_solution(self.SRC + [r, 0.0], self.SRC, self.KAPPA)
        b, _ = specialfn.fundamental_solution(self.SRC + [0.0, r], self.SRC, self.KAPPA)
        c, _ = specialfn.fundamental_solution(
            self.SRC + r * np.array([np.cos(1.1), np.sin(1.1)]), self.SRC, self.KAPPA)
        assert a == pytest.approx(b, rel=1e-13)
        assert a == pytest.approx(c, rel=1e-13)

    def test_gradient_finite_difference(self):
        x = self.SRC + [0.3 * np.cos(0.4), 0.3 * np.sin(0.4)]
        _, grad = specialfn.fundamental_solution(x, self.SRC, self.KAPPA)
        h = 1e-6
        for j, e in enumerate(np.eye(2)):
            up, _ = specialfn.fundamental_solution(x + h * e, self.SRC, self.KAPPA)
            dn, _ = specialfn.fundamental_solution(x - h * e, self.SRC, self.KAPPA)
            fd = (up - dn) / (2 * h)
            assert abs(grad[j] - fd) <= 1e-6 * abs(fd)

    def test_helmholtz_residual(self):
        # 5-point Laplacian: (Delta + kappa^2) u = 0 away from the source
        x = self.SRC + [0.4, -0.1]
        h = 1e-4
        u0, _ = specialfn.fundamental_solution(x, self.SRC, self.KAPPA)
        lap = -4.0 * u0
        for e in ([h, 0], [-h, 0], [0, h], [0, -h]):
            ue, _ = specialfn.fundamental_solution(x + np.asarray(e), self.SRC,
                                                   self.KAPPA)
            lap += ue
        lap /= h * h
        assert abs(lap + self.KAPPA ** 2 * u0) <= 1e-4 * self.KAPPA ** 2 * abs(u0)

    def test_singularity_error(self):
        with pytest.raises(ValueError):
            specialfn.fundamental_solution(self.SRC, self.SRC, self.KAPPA)

    def test_vectorized_shape(self):
        pts = np.array([[0.0, 0.0], [0.5, 0.1], [0.2, -0.4]])
        vals, grads = specialfn.fundamental_solution(pts, self.SRC, self.KAPPA)
        assert vals.shape == (3,)
        assert grads.shape == (3, 2)
        one, og = specialfn.fundamental_solution(pts[1], self.SRC, self.KAPPA)
        assert one == vals[1]
        assert np.array_equal(og, grads[1])
