import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obliquereg.errors import BoundarySingularityError, InvalidInputError
from obliquereg.geometry import GraphDomain, cyl_neighborhood
from obliquereg.quadrature import MollifierKernel
from obliquereg.regdist import (RegDistField, grad_regdist, hess_regdist, mollified_graph_G,
                                regularized_distance, scale_constant, signed_distance,
                                verify_regdist)

# G((0, 0.5), 0.2) for psi = 0.05|s|, delta = 0.5, from adaptive 2-D quadrature split at the kink
G_ABS_ORACLE = -0.49963502879469596


def abs_domain():
    return GraphDomain(psi=lambda yp: 0.05 * np.abs(yp[..., 0]),
                       dpsi=lambda yp: 0.05 * np.sign(yp),
                       kink_test=lambda yp: np.abs(yp[..., 0]) < 1e-12,
                       lip_bound=0.05, delta=0.5)


def sine_cylinder(amp=0.05, freq=1.0, delta=1.0):
    dom = GraphDomain.sine(amp, freq, delta=delta, base_radius=10.0)
    return cyl_neighborhood(dom, np.zeros(2), 1.0)


class TestKernel:
    @pytest.mark.parametrize("dim,n", [(2, 17), (2, 33), (3, 9)])
    def test_unit_mass_and_symmetry(self, dim, n):
        k = MollifierKernel.bump(dim, n)
        assert k.weights.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.all(k.weights >= 0)
        assert np.all(np.linalg.norm(k.nodes, axis=1) < 1)
        assert np.allclose(k.weights @ k.nodes, 0.0, atol=1e-15)
        assert k.marginal_weights.sum() == pytest.approx(1.0, abs=1e-14)


class TestScaleConstant:
    def test_value(self):
        assert scale_constant(0.5) == pytest.approx(2 * math.sqrt(17))

    @given(st.floats(0.01, 1.0))
    def test_lower_bound(self, delta):
        assert scale_constant(delta) >= 2 * math.sqrt(5) - 1e-12


class TestMollifiedGraph:
    def test_flat_is_constant_in_tau(self):
        f = RegDistField(GraphDomain.flat(0.7))
        y = np.array([[0.1, 0.2], [-0.3, 0.5]])
        for tau in (0.0, 0.1, 0.4):
            assert np.allclose(mollified_graph_G(f, y, tau), 0.7 - y[:, 1], atol=1e-14)

    def test_tau_zero_is_g(self):
        f = RegDistField(GraphDomain.sine(0.1, 3.0))
        y = np.array([[0.4, -0.2]])
        assert f.G(y, 0.0)[0] == pytest.approx(0.1 * math.sin(1.2) + 0.2, abs=1e-14)

    def test_against_adaptive_quadrature(self):
        y = np.array([0.0, 0.5])
        err = [abs(float(RegDistField(abs_domain(), nodes=n).G(y, 0.2)) - G_ABS_ORACLE) for n in (33, 65, 129)]
        # midpoint rule across the kink of |s| is second order
        assert err[0] < 1e-6
        assert err[0] / err[1] > 3.5 and err[1] / err[2] > 3.5


class TestFixedPoint:
    def test_flat_exact(self):
        f = RegDistField(GraphDomain.flat(0.3))
        y = np.array([[0.0, -0.2], [1.0, 0.1]])
        assert np.allclose(regularized_distance(f, y), 0.3 - y[:, 1], atol=1e-14)
        assert np.allclose(grad_regdist(f, y), [0.0, -1.0], atol=1e-14)
        assert np.allclose(hess_regdist(f, y), 0.0, atol=1e-12)

    def test_tilted_hessian_vanishes(self):
        f = RegDistField(GraphDomain.tilted(0.1))
        y = np.array([[0.0, -0.2], [0.4, -1.0]])
        assert np.allclose(f.hess(y), 0.0, atol=1e-10)

    def test_contraction_and_residual(self):
        cyl = sine_cylinder(0.1, 3.0)
        f = RegDistField(cyl.domain)
        pts = cyl.sample(200, np.random.default_rng(0))
        rho, info = f.value(pts, return_info=True)
        assert info.max_contraction <= 0.5 + 1e-6
        assert info.residual <= 2 * f.tol * np.max(np.maximum(1, np.abs(rho)))
        assert np.all(rho > 0)

    def test_sign_outside(self):
        f = RegDistField(GraphDomain.sine(0.05, 1.0))
        assert f.value(np.array([[0.0, 0.3]]))[0] < 0

    def test_rejects_bad_points(self):
        f = RegDistField(GraphDomain.flat())
        with pytest.raises(InvalidInputError):
            f.value(np.array([0.0, 1.0, 2.0]))
        with pytest.raises(InvalidInputError):
            f.value(np.array([np.nan, 0.0]))


class TestDerivatives:
    def test_gradient_matches_differences(self):
        f = RegDistField(GraphDomain.sine(0.05, 1.0))
        y = np.array([[0.3, -0.4], [-0.8, -0.1], [0.1, -1.5]])
        h = 1e-4
        fd = np.stack([(f.value(y + h * e) - f.value(y - h * e)) / (2 * h) for e in np.eye(2)], axis=-1)
        assert np.allclose(f.grad(y), fd, atol=max(1e-6, 10 * h * h))

    def test_hessian_matches_differences(self):
        f = RegDistField(GraphDomain.sine(0.05, 1.0))
        y = np.array([[0.3, -0.4], [-0.8, -0.1], [0.1, -1.5]])
        h = 1e-4
        fd = np.stack([(f.grad(y + h * e) - f.grad(y - h * e)) / (2 * h) for e in np.eye(2)], axis=-1)
        H = f.hess(y)
        assert np.allclose(H, np.swapaxes(H, -1, -2), atol=1e-14)
        assert np.allclose(H, fd, rtol=1e-3, atol=1e-3 * np.max(np.abs(fd)))

    def test_hessian_on_boundary_raises(self):
        f = RegDistField(GraphDomain.sine(0.05, 1.0))
        with pytest.raises(BoundarySingularityError):
            f.hess(np.array([[0.2, 0.05 * math.sin(0.2)]]))

    def test_hessian_bound_stable_under_refinement(self):
        dom = GraphDomain.sine(0.05, 1.0)
        rng = np.random.default_rng(3)
        rho = rng.uniform(0.01, 0.5, 100)
        s = rng.uniform(-1, 1, 100)
        y = np.column_stack([s, dom.height(s[:, None]) - rho])
        prods = []
        for n in (33, 65):
            f = RegDistField(dom, nodes=n)
            r, _, H = f.evaluate(y)
            prods.append(np.max(np.linalg.norm(H, ord=2, axis=(-2, -1)) * np.abs(r)) / dom.eps0)
        assert np.isfinite(prods).all()
        assert max(prods) / min(prods) < 1.2

    def test_global_lipschitz(self):
        cyl = sine_cylinder(0.1, 3.0)
        f = RegDistField(cyl.domain)
        pts = cyl.sample(150, np.random.default_rng(2))
        rho = f.value(pts)
        dist = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
        quot = np.abs(rho[:, None] - rho[None]) / np.where(dist > 0, dist, np.inf)
        assert quot.max() <= f.M + 1e-10


class TestVerification:
    @pytest.mark.parametrize("delta", [0.5, 1.0])
    def test_sawtooth_passes(self, delta):
        dom = GraphDomain.sawtooth(0.05, 0.5, phase=0.1, delta=delta, base_radius=10.0)
        cyl = cyl_neighborhood(dom, np.zeros(2), 1.0)
        rep = verify_regdist(RegDistField(cyl.domain), cyl.sample(100, np.random.default_rng(0)))
        assert rep.metadata["pass"], rep.warnings
        assert rep["sandwich_min"] >= 2 / 3
        assert 1 / rep["M"] <= rep["distance_ratio_min"]

    def test_rejects_outside_points(self):
        with pytest.raises(InvalidInputError):
            verify_regdist(RegDistField(GraphDomain.flat()), np.array([[0.0, 0.5]]))

    def test_signed_distance_line(self):
        dom = GraphDomain.tilted(0.5)
        y = np.array([[0.0, -1.0], [1.0, 2.0]])
        expected = (0.5 * y[:, 0] - y[:, 1]) / math.sqrt(1.25)
        assert np.allclose(signed_distance(dom, y, 4.0), expected, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.15, 0.15), st.floats(0.5, 4.0), st.floats(-1, 1), st.floats(0.02, 2.0))
def test_sandwich_property(amp, freq, s, depth):
    f = RegDistField(GraphDomain.sine(amp, freq), nodes=17)
    y = np.array([[s, amp * math.sin(freq * s) - depth]])
    ratio = f.value(y)[0] / depth
    assert 2 / 3 <= ratio <= 2
