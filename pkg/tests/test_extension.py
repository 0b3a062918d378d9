import math

import numpy as np
import pytest

from obliquereg.errors import InvalidInputError, PreconditionError
from obliquereg.extension import (extend_neumann, interior_extension_E, localization_cutoff,
                                  localize_boundary_datum)
from obliquereg.geometry import GraphDomain, cyl_neighborhood
from obliquereg.mollification import TrigPolynomial, cylinder_grid
from obliquereg.norms import BoundaryTrace, gagliardo_seminorm, lp_norm, lp_norm_trace
from obliquereg.regdist import RegDistField


@pytest.fixture(scope="module")
def saw():
    dom = GraphDomain.sawtooth(0.05, 0.5, phase=0.1, delta=1.0, base_radius=10.0)
    cyl = cyl_neighborhood(dom, np.zeros(2), 1.0)
    return cyl, RegDistField(cyl.domain)


def one(yp):
    return np.ones(np.shape(yp)[:-1])


class TestFiberExtension:
    def test_constant_is_cutoff_profile(self, saw):
        cyl, _ = saw
        E = interior_extension_E(one, cyl)
        pts = cyl.sample(300, np.random.default_rng(0), k=2.0)
        t = pts[:, 1] / cyl.psi(pts[:, :1])
        vals = E(pts)
        assert np.allclose(vals[t >= 1 / 3], 1.0)
        assert np.allclose(vals[t <= 1 / 6], 0.0)
        assert np.all((vals >= 0) & (vals <= 1))

    def test_fiber_constant(self, saw):
        cyl, _ = saw
        E1 = interior_extension_E(one, cyl)
        Ey = interior_extension_E(lambda yp: yp[..., 0], cyl)
        pts = cyl.sample(100, np.random.default_rng(1), k=2.0)
        assert np.allclose(Ey(pts), pts[:, 0] * E1(pts))

    def test_gradient(self, saw):
        cyl, _ = saw
        E = interior_extension_E(lambda yp: np.sin(3 * yp[..., 0]), cyl)
        s = np.array([-0.85, -0.3, 0.2, 0.55])  # away from the kinks
        y = np.column_stack([s, 0.25 * cyl.psi(s[:, None])])
        h = 1e-6
        fd = np.stack([(E(y + h * e) - E(y - h * e)) / (2 * h) for e in np.eye(2)], axis=-1)
        assert np.allclose(E.gradient(y), fd, atol=1e-6)

    def test_random_trig_ratio_bounded(self, saw):
        cyl, _ = saw
        rng = np.random.default_rng(5)
        grid = cylinder_grid(cyl, 2.0, 61)
        pts = grid.points()
        ratios = []
        for _ in range(50):
            c = TrigPolynomial.random(rng, degree=4, omega=math.pi / 2).coef[:, 0]
            g = lambda yp, c=c: np.real(np.exp(1j * (math.pi / 2) * np.arange(-4, 5) * yp[..., :1]) @ c)
            E = interior_extension_E(g, cyl)
            m = grid.mask
            w1p = math.hypot(lp_norm(grid.with_values(np.where(m, E(pts), 0)), 2),
                             lp_norm(grid.with_values(np.where(m[..., None], E.gradient(pts), 0)), 2))
            tr = BoundaryTrace.from_function(g, cyl.domain, -2, 2, 400)
            ratios.append(w1p / (gagliardo_seminorm(tr, 2) + lp_norm_trace(tr, 2)))
        assert np.all(np.isfinite(ratios))
        assert max(ratios) < 10 * min(ratios)


class TestLocalization:
    def test_inside_support_unchanged(self):
        s = np.linspace(-3, 3, 601)
        g = BoundaryTrace.on_interval(np.where(np.abs(s) < 1.9, np.cos(s), 0.0), -3, 3)
        assert np.array_equal(localize_boundary_datum(g, 1.0).values, g.values)

    def test_zero(self):
        g = BoundaryTrace.on_interval(np.zeros(50), -3, 3)
        assert np.all(localize_boundary_datum(g, 1.0).values == 0)

    def test_cutoff_shape(self):
        eta = localization_cutoff(1.0)
        r = np.linspace(0, 4, 401)[:, None]
        vals = eta(r)
        assert np.all(vals[r[:, 0] <= 2] == 1) and np.all(vals[r[:, 0] >= 3] == 0)
        assert np.max(np.abs(np.diff(vals)) / 0.01) <= 3.0

    @pytest.mark.parametrize("p", [2.0, 3.0])
    def test_seminorm_scaling(self, p):
        semis = []
        for R in (1.0, 2.0):
            g = localize_boundary_datum(BoundaryTrace.on_interval(np.ones(600), -3 * R, 3 * R), R)
            semis.append(gagliardo_seminorm(g, p))
        assert semis[1] / semis[0] == pytest.approx(2.0 ** (-1 + 2 / p), rel=1e-10)


class TestExtendNeumann:
    def test_constant_datum(self, saw):
        cyl, rd = saw
        res = extend_neumann(one, cyl, rd, n=33)
        assert res.trace_residual_sup <= 1e-12
        v = res.v
        m = v.mask
        # near the graph g~ = 1, so v grows with slope one along each fibre
        j = np.argmax(~m, axis=1) - 1
        i = np.arange(m.shape[0])
        slope = (v.values[i, j] - v.values[i, j - 1]) / v.spacing[1]
        assert np.allclose(slope[1:-1], 1.0, atol=1e-10)

    def test_zero_datum(self, saw):
        cyl, rd = saw
        res = extend_neumann(lambda yp: np.zeros(yp.shape[:-1]), cyl, rd, n=17)
        assert np.all(res.v.values == 0)
        assert res.N_ext == 0.0

    def test_linearity(self, saw):
        cyl, rd = saw
        g1 = lambda yp: np.sin(3 * yp[..., 0])
        g2 = lambda yp: yp[..., 0] ** 2
        a = extend_neumann(lambda yp: 2 * g1(yp) - 3 * g2(yp), cyl, rd, n=17).v.values
        b = extend_neumann(g1, cyl, rd, n=17).v.values
        c = extend_neumann(g2, cyl, rd, n=17).v.values
        assert np.allclose(a, 2 * b - 3 * c, atol=1e-12)

    def test_refinement(self, saw):
        cyl, rd = saw
        g = lambda yp: np.sin(3 * yp[..., 0])
        res = [extend_neumann(g, cyl, rd, n=n) for n in (17, 33, 65)]
        r = [x.trace_residual_sup for x in res]
        assert math.log2(r[0] / r[1]) >= 1 and math.log2(r[1] / r[2]) >= 1
        N = [x.N_ext for x in res]
        assert max(N) / min(N) <= 1.5
        for x in res:
            assert all(np.isfinite(v) for v in x.extra.values())

    def test_report(self, saw):
        cyl, rd = saw
        rep = extend_neumann(lambda yp: yp[..., 0], cyl, rd, n=17).to_report()
        assert "N_ext" in rep and "v_W2p" in rep and rep.metadata["p"] == 2.0

    def test_radius_precondition(self):
        dom = GraphDomain.flat(0.0, delta=1.0, base_radius=4.0)
        cyl = cyl_neighborhood(dom, np.zeros(2), 1.0)
        with pytest.raises(PreconditionError):
            extend_neumann(one, cyl, RegDistField(cyl.domain))

    def test_bad_datum(self, saw):
        cyl, rd = saw
        with pytest.raises(InvalidInputError):
            extend_neumann(3.0, cyl, rd)
