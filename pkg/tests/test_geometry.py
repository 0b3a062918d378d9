import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obliquereg.errors import (DegenerateFieldError, GeometryError, NonDifferentiablePointError,
                               PreconditionError)
from obliquereg.geometry import (GraphDomain, ObliqueField, check_obliqueness, cyl_neighborhood,
                                 domain_from_config, lipschitz_constant, oblique_frame,
                                 outward_normal)


class TestLipschitz:
    def test_flat(self):
        assert lipschitz_constant(GraphDomain.flat(0.3), np.linspace(-1, 1, 201)) == 0.0

    def test_abs_is_exact(self):
        dom = GraphDomain.sawtooth(0.05, 4.0)
        s = np.arange(-1, 1 + 1e-9, 0.01)
        psi = lambda yp: 0.05 * np.abs(yp[..., 0])
        assert lipschitz_constant(psi, s) == pytest.approx(0.05, abs=1e-12)
        assert lipschitz_constant(dom, s) == pytest.approx(0.05, abs=1e-12)

    def test_sine(self):
        val = lipschitz_constant(GraphDomain.sine(0.1, 4.0), np.arange(-1, 1, 1e-3))
        assert 0.399 <= val <= 0.4

    def test_refinement_is_monotone(self):
        dom = GraphDomain.sine(0.1, 4.0)
        vals = [lipschitz_constant(dom, np.linspace(-1, 1, 2 ** k + 1)) for k in range(3, 11)]
        assert np.all(np.diff(vals) >= -1e-15)
        assert vals[-1] <= dom.lip_bound + 1e-12

    def test_two_tangential_variables(self):
        dom = GraphDomain.tilted([0.03, 0.04], dim=3)
        g = np.linspace(-1, 1, 9)
        pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
        assert lipschitz_constant(dom, pts) == pytest.approx(0.05, rel=1e-12)


class TestNormal:
    def test_flat(self):
        n = outward_normal(GraphDomain.flat(), np.array([0.3]))
        assert np.allclose(n, [0.0, -1.0])

    def test_half_slope(self):
        n = outward_normal(GraphDomain.tilted(0.5), np.array([0.7]))
        assert np.allclose(n, [1 / math.sqrt(5), -2 / math.sqrt(5)], atol=1e-12)

    def test_sine_at_zero(self):
        n = outward_normal(GraphDomain.sine(0.1, 1.0), np.array([0.0]))
        assert np.allclose(n, np.array([0.1, -1.0]) / math.sqrt(1.01), atol=1e-12)

    def test_kink_raises(self):
        dom = GraphDomain.wedge(3 * math.pi / 4)
        with pytest.raises(NonDifferentiablePointError):
            outward_normal(dom, np.array([0.0]))

    @given(st.floats(-0.9, 0.9), st.floats(-3, 3))
    def test_unit_length_and_downward(self, slope, s):
        n = outward_normal(GraphDomain.sine(slope, 1.3), np.array([s]))
        assert abs(np.linalg.norm(n) - 1) < 1e-12
        assert n[-1] < 0


class TestObliqueness:
    grid = np.linspace(-1, 1, 11)

    def test_diagonal_field(self):
        dom = GraphDomain.flat(delta=0.5)
        out = check_obliqueness(dom, ObliqueField.constant(np.array([1.0, -1.0]) / math.sqrt(2)), self.grid)
        assert out["min_ratio"] == pytest.approx(1 / math.sqrt(2), abs=1e-12)
        assert out["pass"]

    def test_tangential_field(self):
        dom = GraphDomain.flat(delta=0.1)
        out = check_obliqueness(dom, ObliqueField.constant([1.0, 0.0]), self.grid)
        assert out["min_ratio"] == 0.0
        assert not out["pass"]

    def test_field_along_normal(self):
        dom = GraphDomain.sine(0.2, 2.0, delta=1.0)
        bc = ObliqueField(b=lambda x: outward_normal(dom, x[..., :-1]))
        out = check_obliqueness(dom, bc, self.grid)
        assert out["min_ratio"] == pytest.approx(1.0, abs=1e-12)

    def test_zero_field(self):
        with pytest.raises(DegenerateFieldError):
            check_obliqueness(GraphDomain.flat(), ObliqueField.constant([0.0, 0.0]), self.grid)


class TestObliqueFrame:
    def test_identity_for_normal_field(self):
        dom = GraphDomain.flat(0.0, delta=0.5)
        new = oblique_frame(dom, np.array([0.0, 0.0]), np.array([0.0, 1.0]))
        s = np.linspace(-1, 1, 7)[:, None]
        assert np.allclose(new.height(s), 0.0, atol=1e-12)

    @pytest.mark.parametrize("phi", [0.05, 0.2, 0.4])
    def test_rotated_line(self, phi):
        dom = GraphDomain.flat(0.0, delta=0.5)
        b = np.array([math.sin(phi), math.cos(phi)])
        new = oblique_frame(dom, np.array([0.0, 0.0]), b)
        s = np.linspace(-1, 1, 9)[:, None]
        assert np.allclose(new.slope(s)[:, 0], math.tan(phi), atol=1e-10)
        h = new.height(s)
        assert np.allclose(np.diff(h) / np.diff(s[:, 0]), math.tan(phi), atol=1e-10)

    def test_idempotent(self):
        dom = GraphDomain.sine(0.05, 2.0, delta=0.8)
        b = np.array([math.sin(0.3), math.cos(0.3)])
        once = oblique_frame(dom, np.array([0.0, 0.0]), b)
        x1 = np.array([0.0, float(once.height(np.array([0.0])))])
        twice = oblique_frame(once, x1, np.array([0.0, 1.0]))
        s = np.linspace(-0.8, 0.8, 9)[:, None]
        assert np.allclose(once.height(s), twice.height(s), atol=1e-10)

    def test_rotated_sawtooth_oscillation(self):
        eps0, delta = 0.05, 0.8
        dom = GraphDomain.sawtooth(delta ** 2 * eps0, 0.5, phase=0.1, delta=delta)
        b = np.array([math.sin(0.2), math.cos(0.2)])
        new = oblique_frame(dom, np.array([0.0, 0.0]), b)
        s = np.linspace(-1, 1, 401)[:, None]
        s = s[~new.is_kink(s)]
        slopes = new.slope(s)[:, 0]
        assert slopes.max() - slopes.min() < 3 * eps0

    def test_not_oblique(self):
        dom = GraphDomain.flat(0.0, delta=0.5)
        with pytest.raises(PreconditionError):
            oblique_frame(dom, np.array([0.0, 0.0]), np.array([1.0, 0.1]))

    def test_zero_vector(self):
        with pytest.raises(DegenerateFieldError):
            oblique_frame(GraphDomain.flat(), np.zeros(2), np.zeros(2))


class TestCylinder:
    def test_flat_shift(self):
        cyl = cyl_neighborhood(GraphDomain.flat(1.7, delta=0.5, base_radius=4.0), np.array([0.0, 1.7]), 1.0)
        assert cyl.psi_range == pytest.approx((6.0, 6.0))
        assert cyl.in_omega(np.array([0.2, 3.0]))
        assert not cyl.in_omega(np.array([0.2, 6.5]))

    def test_small_slope_passes(self):
        dom = GraphDomain.sawtooth(0.05, 8.0, delta=0.5, base_radius=4.0)
        cyl = cyl_neighborhood(dom, np.array([0.0, float(dom.height(np.array([0.0])))]), 1.0)
        lo, hi = cyl.psi_range
        assert lo == pytest.approx(6.0, abs=1e-12)
        assert hi == pytest.approx(6.05, abs=1e-12)

    def test_steep_slope_fails(self):
        delta = 0.5
        dom = GraphDomain.sawtooth(2 / delta, 8.0, delta=delta, base_radius=4.0)
        with pytest.raises(GeometryError):
            cyl_neighborhood(dom, np.array([0.0, float(dom.height(np.array([0.0])))]), 1.0)

    def test_radius_precondition(self):
        with pytest.raises(PreconditionError):
            cyl_neighborhood(GraphDomain.flat(delta=0.5, base_radius=1.0), np.zeros(2), 0.6)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-0.3, 0.3), st.floats(0.3, 1.0))
    def test_affine_bounds_match_shift(self, slope, delta):
        # for an affine graph the range on B'_R is 3R/delta -+ |slope| R
        dom = GraphDomain.tilted(slope, delta=delta, base_radius=10.0)
        R = 1.0
        if abs(slope) * R >= 2 * R / delta:
            return
        cyl = cyl_neighborhood(dom, np.zeros(2), R)
        lo, hi = cyl.psi_range
        assert lo == pytest.approx(3 * R / delta - abs(slope) * R, abs=1e-12)
        assert hi == pytest.approx(3 * R / delta + abs(slope) * R, abs=1e-12)

    def test_omega_inside_q(self):
        dom = GraphDomain.sine(0.05, 3.0, delta=1.0, base_radius=10.0)
        cyl = cyl_neighborhood(dom, np.zeros(2), 1.0)
        rng = np.random.default_rng(1)
        for k in (0.5, 1.0, 2.0):
            pts = cyl.sample(500, rng, k)
            assert np.all(cyl.in_q(pts, k))


def test_domain_from_config():
    dom = domain_from_config({"type": "sawtooth", "slope": 0.05, "period": 0.5, "delta": 0.5, "R0": 10})
    assert dom.name == "sawtooth" and dom.delta == 0.5 and dom.base_radius == 10.0
    with pytest.raises(ValueError):
        domain_from_config({"type": "spiral"})
