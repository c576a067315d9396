"""Wave parametrization, Sobol sequence, and the sampling recipe."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import qmc

from trefftz_epw import waves
from trefftz_epw.mesh import build_rect_mesh
from trefftz_epw.waves import (ElementBasis, ElementGeometry, MODE_EPW,
                               MODE_PPW, build_element_bases, epw_eval,
                               epw_grad, make_epw, map_sample, normalize_wave,
                               sample_basis, sobol3, sobol3_block,
                               triangle_geometry)

GEOM = ElementGeometry(anchors=np.array([[0.0, 0.0], [1.0, 0.0], [0.4, 0.9]]),
                       diam=math.hypot(0.6, 0.9))


class TestMakeEpw:
    def test_pure_ppw(self):
        w = make_epw(0.0, 1, 0.0, 1.0)
        assert np.allclose(w.d, [1.0, 0.0])
        assert w.zeta == 1.0
        assert np.all(w.d.imag == 0.0)

    def test_unit_evanescence(self):
        w = make_epw(0.0, 1, 1.0, 1.0)
        assert w.zeta == pytest.approx(math.sqrt(2.0), rel=1e-15)
        assert np.allclose(w.d, [math.sqrt(2.0), 1.0j])
        assert (w.d @ w.d) == pytest.approx(1.0, abs=1e-15)

    def test_construction_identities(self):
        for theta, phi, eta in ((0.3, 1, 0.0), (2.0, -1, 3.0), (5.9, 1, 12.0)):
            w = make_epw(theta, phi, eta, 16.0)
            re, im = w.d.real, w.d.imag
            scale = max(1.0, eta * eta)
            assert abs(re @ re - im @ im - 1.0) <= 1e-14 * scale
            assert abs(re @ im) <= 1e-14 * scale
            assert abs(w.d @ w.d - 1.0) <= 1e-14 * scale

    @given(theta=st.floats(-10.0, 10.0), eta=st.floats(0.0, 30.0),
           kappa=st.floats(0.01, 300.0), phi=st.sampled_from([1, -1]))
    @settings(max_examples=200, deadline=None)
    def test_invariants_property(self, theta, phi, eta, kappa):
        w = make_epw(theta, phi, eta, kappa)
        scale = max(1.0, eta * eta)
        assert abs(w.d @ w.d - 1.0) <= 1e-13 * scale
        assert 0.0 <= w.theta < 2.0 * math.pi
        assert w.zeta == pytest.approx(math.sqrt(1.0 + eta * eta), rel=1e-15)
        if eta == 0.0:
            assert np.all(w.d.imag == 0.0)

    def test_argument_errors(self):
        with pytest.raises(ValueError):
            make_epw(0.0, 1, -0.1, 1.0)
        with pytest.raises(ValueError):
            make_epw(0.0, 1, 0.0, 0.0)
        with pytest.raises(ValueError):
            make_epw(0.0, 0, 0.0, 1.0)


class TestEvaluation:
    def test_ppw_unimodular(self):
        w = make_epw(1.1, 1, 0.0, 16.0)
        pts = np.random.default_rng(0).uniform(-2, 2, (50, 2))
        assert np.allclose(np.abs(epw_eval(w, pts)), 1.0)

    def test_origin_value(self):
        for eta in (0.0, 2.5):
            w = make_epw(0.7, -1, eta, 9.0)
            assert epw_eval(w, np.zeros(2)) == 1.0 + 0.0j

    def test_decay_rate(self):
        kappa, eta = 8.0, 1.5
        w = make_epw(0.4, 1, eta, kappa)
        x = w.e / (kappa * eta)  # one e-folding along the decay direction
        assert abs(epw_eval(w, x)) == pytest.approx(math.exp(-1.0), rel=1e-13)

    def test_underflow_saturation(self):
        w = make_epw(0.0, 1, 50.0, 100.0)
        val = epw_eval(w, w.e * 10.0)
        assert 0.0 < abs(val) <= 1e-299

    def test_gradient_finite_difference(self):
        rng = np.random.default_rng(3)
        w = make_epw(2.2, -1, 2.0, 16.0)
        x = rng.uniform(-0.5, 0.5, 2)
        g = epw_grad(w, x)
        h = 1e-7
        for j, e in enumerate(np.eye(2)):
            fd = (epw_eval(w, x + h * e) - epw_eval(w, x - h * e)) / (2 * h)
            assert abs(g[j] - fd) <= 1e-6 * abs(fd)

    def test_trefftz_identity(self):
        # gradient factor satisfies (i kappa d).(i kappa d) = -kappa^2, so the
        # Helmholtz residual of any EPW vanishes identically
        w = make_epw(0.9, 1, 4.0, 16.0)
        ikd = 1j * w.kappa * w.d
        assert abs(ikd @ ikd + w.kappa ** 2) <= 1e-10

    def test_axis_aligned_gradient(self):
        w = make_epw(0.0, 1, 0.0, 5.0)
        x = np.array([0.3, -0.2])
        g = epw_grad(w, x)
        expect = 5j * np.exp(5j * x[0])
        assert g[0] == pytest.approx(expect, rel=1e-14)
        assert abs(g[1]) <= 1e-14


class TestSobol:
    def test_first_points(self):
        assert np.array_equal(sobol3(0), [0.0, 0.0, 0.0])
        assert np.array_equal(sobol3(1), [0.5, 0.5, 0.5])

    def test_reference_oracle_first_block(self):
        # scipy uses the Antonov-Saleev (gray code) traversal of the same
        # direction numbers: identical sets on dyadic blocks, and pointwise
        # equality through the gray-code reindexing
        ours = sobol3_block(0, 64)
        ref = qmc.Sobol(d=3, scramble=False).random(64)
        assert np.allclose(np.sort(ours, axis=0), np.sort(ref, axis=0))
        gray = np.arange(64) ^ (np.arange(64) >> 1)
        assert np.allclose(ours[gray], ref)

    def test_dyadic_equidistribution(self):
        pts = sobol3_block(0, 1024)
        for dim in range(3):
            counts, _ = np.histogram(pts[:, dim], bins=16, range=(0.0, 1.0))
            assert np.all(counts == 64)

    def test_block_matches_scalar(self):
        blk = sobol3_block(37, 5)
        for i in range(5):
            assert np.array_equal(blk[i], sobol3(37 + i))

    def test_range_validation(self):
        with pytest.raises(ValueError):
            sobol3(-1)
        with pytest.raises(ValueError):
            sobol3_block(2 ** 32 - 1, 2)

    def test_map_sample(self):
        s = map_sample([0.25, 0.5, 0.75])
        assert s.theta == pytest.approx(math.pi / 2)
        assert s.phi == 1          # u2 = 1/2 maps to +1
        assert s.xi == 0.75
        assert map_sample([0.0, 0.49, 0.0]).phi == -1


class TestNormalization:
    def test_anchor_max_is_one(self):
        w = make_epw(1.0, 1, 3.0, 16.0)
        nw = normalize_wave(w, GEOM.anchors)
        mods = np.abs(nw.eval(GEOM.anchors))
        assert mods.max() == pytest.approx(1.0, abs=1e-14)
        assert nw.norm_factor >= math.exp(-w.kappa * w.eta * 2.0)

    def test_interior_bound(self):
        # log-modulus is affine, so interior values stay below the vertex max
        rng = np.random.default_rng(5)
        w = make_epw(2.7, -1, 6.0, 16.0)
        nw = normalize_wave(w, GEOM.anchors)
        lam = rng.dirichlet(np.ones(3), size=100)
        pts = lam @ GEOM.anchors
        assert np.all(np.abs(nw.eval(pts)) <= 1.0 + 1e-12)

    def test_ppw_norm_is_exactly_one(self):
        nw = normalize_wave(make_epw(0.3, 1, 0.0, 4.0), GEOM.anchors)
        assert nw.norm_factor == 1.0
        assert nw.log_norm == 0.0


class TestSampleBasis:
    def test_all_ppw_when_budget_small(self):
        # 2L <= kappa diam forces every zeta to 1
        kappa = 16.0
        P = 8  # 2L = 4 <= kappa * diam
        basis = sample_basis(GEOM, P, kappa, MODE_EPW)
        assert all(w.params.zeta == 1.0 for w in basis)

    def test_ppw_mode_unimodular(self):
        basis = sample_basis(GEOM, 16, 16.0, MODE_PPW)
        assert all(w.params.eta == 0.0 for w in basis)
        assert all(w.norm_factor == 1.0 for w in basis)

    def test_evanescent_fraction(self):
        # with L = P/4 the expected fraction of waves with zeta > 1 is
        # 1 - kappa*diam/(2L); Sobol equidistribution keeps the count close
        kappa, diam = 1.0, 1.0
        P = int(4 * kappa * diam * 10)
        geom = ElementGeometry(anchors=GEOM.anchors, diam=diam)
        basis = sample_basis(geom, P, kappa, MODE_EPW)
        frac = sum(w.params.zeta > 1.0 for w in basis) / P
        expected = 1.0 - kappa * diam / (2.0 * (P / 4.0))
        assert expected == pytest.approx(0.95)
        assert abs(frac - expected) <= 0.05

    def test_invariants_of_sampled_waves(self):
        for w in sample_basis(GEOM, 64, 16.0, MODE_EPW):
            p = w.params
            scale = max(1.0, p.eta * p.eta)
            assert abs(p.d @ p.d - 1.0) <= 1e-14 * scale
            assert p.zeta == pytest.approx(math.sqrt(1 + p.eta ** 2), rel=1e-15)

    def test_determinism(self):
        a = sample_basis(GEOM, 12, 16.0, MODE_EPW, stream_offset=5)
        b = sample_basis(GEOM, 12, 16.0, MODE_EPW, stream_offset=5)
        assert [w.params for w in a] == [w.params for w in b]
        assert [w.norm_factor for w in a] == [w.norm_factor for w in b]

    def test_modes_coincide_when_clamp_active(self):
        # huge kappa*diam keeps the clamp at 1 for every draw
        geom = ElementGeometry(anchors=GEOM.anchors, diam=50.0)
        epw = sample_basis(geom, 8, 16.0, MODE_EPW)
        ppw = sample_basis(geom, 8, 16.0, MODE_PPW)
        assert [w.params for w in epw] == [w.params for w in ppw]

    def test_count_extends_same_space(self):
        short = sample_basis(GEOM, 16, 16.0, MODE_EPW)
        long = sample_basis(GEOM, 16, 16.0, MODE_EPW, count=20)
        assert [w.params for w in long[:16]] == [w.params for w in short]
        with pytest.raises(ValueError):
            sample_basis(GEOM, 16, 16.0, MODE_EPW, count=10)

    def test_validation(self):
        with pytest.raises(ValueError):
            sample_basis(GEOM, 0, 16.0, MODE_EPW)
        with pytest.raises(ValueError):
            sample_basis(GEOM, 4, 16.0, "XPW")


class TestElementBases:
    def test_oversampling_structure(self):
        mesh = build_rect_mesh((0, 0), (1, 1), 2, 2, jitter=0.2, seed=1)
        bases = build_element_bases(mesh, 10, 16.0, MODE_EPW, oversampling=1.1)
        assert len(bases) == mesh.num_elements
        for b in bases:
            assert b.n_trial == 10
            assert b.n_test == math.ceil(1.1 * 10)
            assert b.test[:10] == b.trial  # test space contains trial space

    def test_test_equals_trial(self):
        mesh = build_rect_mesh((0, 0), (1, 1), 1, 1)
        bases = build_element_bases(mesh, 6, 8.0, MODE_PPW,
                                    test_equals_trial=True)
        for b in bases:
            assert b.test is b.trial

    def test_disjoint_streams_across_elements(self):
        mesh = build_rect_mesh((0, 0), (1, 1), 2, 1)
        bases = build_element_bases(mesh, 5, 8.0, MODE_PPW)
        thetas0 = {w.params.theta for w in bases[0].test}
        thetas1 = {w.params.theta for w in bases[1].test}
        assert not thetas0 & thetas1

    def test_invariant_enforced(self):
        mesh = build_rect_mesh((0, 0), (1, 1), 1, 1)
        geom = triangle_geometry(mesh, 0)
        trial = sample_basis(geom, 4, 8.0, MODE_PPW)
        with pytest.raises(ValueError):
            ElementBasis(elem_id=0, trial=trial, test=trial[:3])
