import math

import numpy as np
import pytest

from obliquereg.errors import InvalidInputError, PreconditionError, SolverError
from obliquereg.geometry import GraphDomain, ObliqueField, cyl_neighborhood
from obliquereg.regdist import RegDistField
from obliquereg.solver import (EllipticOperator, assemble, flatten, manufactured, probe_main_estimate,
                               probe_model_problem, solve_oblique, solve_sparse)

B_MMS = ObliqueField.constant([math.sin(0.3), -math.cos(0.3)])


def cylinder(domain):
    return cyl_neighborhood(domain, np.zeros(2), 1.0)


@pytest.fixture(scope="module")
def flat_cyl():
    return cylinder(GraphDomain.flat(0.0, delta=0.9, base_radius=10.0))


@pytest.fixture(scope="module")
def sine_cyl():
    return cylinder(GraphDomain.sine(0.05, 2.0, delta=0.9, base_radius=10.0))


def sawtooth_cyl(eps0):
    return cylinder(GraphDomain.sawtooth(eps0, 0.5, phase=0.1, delta=1.0, base_radius=10.0))


class TestOperator:
    def test_laplacian(self):
        out = EllipticOperator.laplacian().check_ellipticity(np.zeros((4, 2)))
        assert out["pass"] and out["min_eig"] == 1.0

    def test_constant_nu(self):
        op = EllipticOperator.constant([[2.0, 0.5], [0.5, 1.0]])
        assert op.check_ellipticity(np.zeros((3, 2)))["pass"]
        assert op.nu == pytest.approx(1 / np.linalg.eigvalsh([[2.0, 0.5], [0.5, 1.0]])[1])

    def test_rejects_asymmetric(self):
        with pytest.raises(InvalidInputError):
            EllipticOperator.constant([[1.0, 0.2], [0.0, 1.0]])

    def test_rejects_bad_nu(self):
        with pytest.raises(InvalidInputError):
            EllipticOperator.laplacian().__class__(a=lambda x: x, nu=0.0)


class TestFlatten:
    def test_flat_is_reflection(self, flat_cyl):
        A = np.array([[1.5, 0.3], [0.3, 0.8]])
        prob = flatten(EllipticOperator.constant(A), flat_cyl, n=17)
        S = np.diag([1.0, -1.0])
        assert np.allclose(prob.a_tilde, S @ A @ S, atol=1e-12)
        assert np.allclose(prob.coupling, 0.0, atol=1e-10)
        assert np.allclose(prob.volume_factor, 1.0, atol=1e-12)
        # z2 is the depth below the flat graph
        assert np.allclose(prob.y[:, :, 1], flat_cyl.psi_range[0] - prob.z2[None, :], atol=1e-10)

    def test_tilted_closed_form(self):
        eps = 0.1
        cyl = cylinder(GraphDomain.tilted(eps, delta=1.0, base_radius=10.0))
        prob = flatten(EllipticOperator.laplacian(), cyl, n=17)
        At = np.array([[1.0, eps], [eps, 1 + eps * eps]])
        assert np.allclose(prob.a_tilde, At, atol=1e-10)
        lo = (2 + eps ** 2 - math.sqrt(eps ** 4 + 4 * eps ** 2)) / 2
        hi = (2 + eps ** 2 + math.sqrt(eps ** 4 + 4 * eps ** 2)) / 2
        ell = prob.ellipticity()
        assert ell["min_eig"] == pytest.approx(lo, abs=1e-10)
        assert ell["max_eig"] == pytest.approx(hi, abs=1e-10)

    def test_sine_ellipticity_window(self, sine_cyl):
        prob = flatten(EllipticOperator.laplacian(), sine_cyl, n=33)
        eps0 = sine_cyl.domain.lip_bound
        ell = prob.ellipticity()
        C = max((1 - ell["min_eig"]) / eps0, (ell["max_eig"] - 1) / eps0)
        assert C < 3.0

    def test_shear_matches_regdist_on_flat(self, flat_cyl):
        a = flatten(EllipticOperator.laplacian(), flat_cyl, n=17)
        b = flatten(EllipticOperator.laplacian(), flat_cyl, n=17, transform="shear")
        assert np.allclose(a.a_tilde, b.a_tilde, atol=1e-12)
        assert np.allclose(a.y, b.y, atol=1e-10)

    def test_bad_arguments(self, flat_cyl):
        with pytest.raises(InvalidInputError):
            flatten(EllipticOperator.laplacian(), flat_cyl, n=3)
        with pytest.raises(InvalidInputError):
            flatten(EllipticOperator.laplacian(), flat_cyl, n=9, transform="polar")


class TestAssembly:
    def test_interior_rows_annihilate_constants(self, sine_cyl):
        prob = flatten(EllipticOperator.constant([[1.2, 0.2], [0.2, 0.9]], drift=(0.3, -0.1)), sine_cyl, n=17)
        n1 = prob.shape[0]
        z = np.zeros(prob.shape)
        bvec = np.tile([0.0, 1.0], (n1, 1))
        sys_ = assemble(prob, bvec, np.zeros(n1), np.zeros(n1), z, z)
        Au = (sys_.matrix @ np.ones(sys_.matrix.shape[0])).reshape(prob.shape)
        assert np.allclose(Au[sys_.interior], 0.0, atol=1e-9)
        assert np.allclose(Au[1:-1, 0], 0.0, atol=1e-9)

    def test_stagnation_reports_history(self, flat_cyl):
        prob = flatten(EllipticOperator.laplacian(), flat_cyl, n=33)
        n1 = prob.shape[0]
        f = np.ones(prob.shape)
        sys_ = assemble(prob, np.tile([0.0, -1.0], (n1, 1)), np.zeros(n1), np.zeros(n1), f, np.zeros(prob.shape))
        sys_.method, sys_.maxiter = "bicgstab", 2
        with pytest.raises(SolverError) as err:
            solve_sparse(sys_)
        assert len(err.value.residual_history) >= 1

    def test_direct_and_iterative_agree(self, flat_cyl):
        prob = flatten(EllipticOperator.laplacian(), flat_cyl, n=33)
        n1 = prob.shape[0]
        sys_ = assemble(prob, np.tile([0.2, -1.0], (n1, 1)), np.zeros(n1), np.ones(n1),
                        np.ones(prob.shape), np.zeros(prob.shape))
        x1, info1 = solve_sparse(sys_)
        sys_.method = "direct"
        x2, _ = solve_sparse(sys_)
        assert np.allclose(x1, x2, atol=1e-7 * np.max(np.abs(x2)))
        assert info1["residual_history"]


def mms_error(cyl, n, name="sin_cosh", bc_order=2, op=None):
    op = op or EllipticOperator.laplacian()
    exact, f, g = manufactured(name, op, B_MMS)
    sol = solve_oblique(op, B_MMS, g, cyl, n=n, f=f, dirichlet=exact, bc_order=bc_order)
    return float(np.max(np.abs(sol.values - exact(sol.y)))), sol


class TestManufactured:
    def test_sin_cosh_second_order(self, flat_cyl):
        err = [mms_error(flat_cyl, n)[0] for n in (17, 33, 65)]
        orders = np.log2(np.array(err[:-1]) / np.array(err[1:]))
        assert np.all(orders >= 1.5)

    def test_first_order_boundary_rows(self, flat_cyl):
        err = [mms_error(flat_cyl, n, bc_order=1)[0] for n in (17, 33, 65)]
        assert math.log2(err[1] / err[2]) >= 0.9

    def test_quadratic_reproduced(self, flat_cyl):
        err, _ = mms_error(flat_cyl, 17, name="quadratic")
        assert err < 1e-8

    def test_sine_domain_converges(self, sine_cyl):
        err = [mms_error(sine_cyl, n)[0] for n in (17, 33, 65)]
        assert math.log2(err[1] / err[2]) >= 1.0

    def test_unknown_name(self):
        with pytest.raises(InvalidInputError):
            manufactured("cubic", EllipticOperator.laplacian(), B_MMS)


class TestWellPosedness:
    def test_zero_data_gives_zero(self, sine_cyl):
        bc = ObliqueField.constant([0.0, 1.0], b0=1.0)
        sol = solve_oblique(EllipticOperator.laplacian(), bc, 0.0, sine_cyl, n=33, f=0.0, dirichlet=0.0)
        assert np.max(np.abs(sol.values)) == 0.0

    def test_maximum_principle(self, sine_cyl):
        bc = ObliqueField.constant([0.0, 1.0], b0=1.0)
        sol = solve_oblique(EllipticOperator.laplacian(), bc, lambda y: -1 - 0.5 * np.sin(y[..., 0]) ** 2,
                            sine_cyl, n=33, f=lambda y: 1 + y[..., 0] ** 2, dirichlet=-0.1)
        h = max(sol.problem.spacing)
        assert np.max(sol.values) <= h * h
        assert np.min(sol.values) < 0

    def test_preconditions(self, flat_cyl):
        op = EllipticOperator.laplacian()
        with pytest.raises(PreconditionError):
            solve_oblique(op, ObliqueField.constant([1.0, 0.1]), 0.0, flat_cyl, n=9)
        with pytest.raises(PreconditionError):
            solve_oblique(op, ObliqueField.constant([0.0, 1.0], b0=-1.0), 0.0, flat_cyl, n=9)
        with pytest.raises(PreconditionError):
            solve_oblique(EllipticOperator.constant(np.eye(2), a0=1.0), B_MMS, 0.0, flat_cyl, n=9)
        with pytest.raises(PreconditionError):
            solve_oblique(EllipticOperator(a=lambda y: np.broadcast_to(3 * np.eye(2), y.shape + (2,)), nu=0.5),
                          B_MMS, 0.0, flat_cyl, n=9)


class TestCoupling:
    def test_shear_and_regdist_agree(self):
        cyl = cylinder(GraphDomain.sine(0.05, 2.0, delta=0.9, base_radius=10.0))
        op = EllipticOperator.laplacian()
        exact, f, g = manufactured("sin_cosh", op, B_MMS)
        sols = {t: solve_oblique(op, B_MMS, g, cyl, n=65, f=f, dirichlet=exact, transform=t)
                for t in ("regdist", "shear")}
        rng = np.random.default_rng(0)
        y1 = rng.uniform(-0.8, 0.8, 40)
        y2 = cyl.psi(y1[:, None]) - rng.uniform(0.05, 2.0, 40)
        y = np.column_stack([y1, y2])
        rd = RegDistField(cyl.domain)
        z_rd = np.column_stack([y1, rd.value(y)])
        z_sh = np.column_stack([y1, cyl.psi(y1[:, None]) - y2])
        u_rd = sols["regdist"].interpolate(z_rd)
        u_sh = sols["shear"].interpolate(z_sh)
        assert np.max(np.abs(u_rd - u_sh)) < 5e-3 * np.max(np.abs(exact(y)))
        assert np.max(np.abs(u_rd - exact(y))) < 5e-3 * np.max(np.abs(exact(y)))

    def test_picard_matches_monolithic(self, sine_cyl):
        op = EllipticOperator.laplacian()
        exact, f, g = manufactured("sin_cosh", op, B_MMS)
        a = solve_oblique(op, B_MMS, g, sine_cyl, n=33, f=f, dirichlet=exact)
        b = solve_oblique(op, B_MMS, g, sine_cyl, n=33, f=f, dirichlet=exact, coupling="monolithic")
        assert a.status == "converged" and a.picard_iterations >= 1
        assert np.max(np.abs(a.values - b.values)) < 1e-6 * np.max(np.abs(b.values))

    def test_coupling_ratio_linear_in_eps0(self):
        reps = {e: probe_model_problem(sawtooth_cyl(e), n=33) for e in (0.01, 0.05, 0.1)}
        per_eps = [reps[e]["coupling_ratio"] / e for e in reps]
        assert max(per_eps) / min(per_eps) < 1.2
        assert all(r.metadata["status"] == "converged" for r in reps.values())

    def test_coupling_ratio_stable_under_refinement(self):
        cyl = sawtooth_cyl(0.05)
        c = [probe_model_problem(cyl, n=n)["coupling_ratio"] for n in (33, 65)]
        assert max(c) / min(c) < 1.5


class TestProbes:
    def test_model_zero_source(self, flat_cyl):
        assert probe_model_problem(flat_cyl, f=0.0, n=17)["ratio"] == 0.0

    def test_model_flat_stable(self, flat_cyl):
        r = [probe_model_problem(flat_cyl, f=1.0, n=n)["ratio"] for n in (33, 65)]
        assert abs(r[1] / r[0] - 1) < 0.2
        assert probe_model_problem(flat_cyl, n=17)["hardy_ratio"] > 0

    def test_model_radius(self, flat_cyl):
        with pytest.raises(InvalidInputError):
            probe_model_problem(flat_cyl, r=2.0, n=17)

    def test_main_estimate_stable(self, flat_cyl):
        op = EllipticOperator.laplacian()
        exact, f, g = manufactured("sin_cosh", op, B_MMS)
        N = [probe_main_estimate(flat_cyl, op, B_MMS, f, g, n=n, dirichlet=exact, exact=exact)["N_emp"]
             for n in (33, 65)]
        assert max(N) / min(N) < 1.3

    def test_rough_coefficients_flagged(self, flat_cyl):
        def rough(y):
            s = np.sign(np.sin(40 * y[..., 0]))
            A = np.zeros(y.shape + (2,))
            A[..., 0, 0] = 1.0 + 0.5 * s
            A[..., 1, 1] = 1.0
            return A

        op = EllipticOperator(a=rough, nu=0.5)
        exact, f, g = manufactured("quadratic", op, B_MMS)
        rep = probe_main_estimate(flat_cyl, op, B_MMS, f, g, n=33, dirichlet=exact)
        assert not rep.metadata["hypotheses"]["bmo"]["pass"]
        assert any("bmo" in w for w in rep.warnings)
        assert np.isfinite(rep["N_emp"])

    def test_frozen_coefficient_datum(self, flat_cyl):
        # constant b and b0 = 0: the frozen-coefficient datum is g itself
        op = EllipticOperator.laplacian()
        exact, f, g = manufactured("sin_cosh", op, B_MMS)
        rep = probe_main_estimate(flat_cyl, op, B_MMS, f, g, n=33, dirichlet=exact)
        assert rep["h_Lp_Gamma"] == pytest.approx(rep["g_Lp_Gamma"], rel=1e-12)
