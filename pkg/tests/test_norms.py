import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obliquereg.errors import InvalidInputError, ResolutionError
from obliquereg.norms import (BoundaryTrace, GridFunction, PiecewiseConstant, SectorRegion,
                              bmo_seminorm, dual_hardy_check, gagliardo_seminorm, hardy_check,
                              holder_seminorm, lp_norm, lp_norm_trace, sobolev_norms,
                              truncated_norm_scan)


def unit_square(func, n):
    h = 1.0 / n
    return GridFunction.sample(func, (h / 2, h / 2), (h, h), (n, n))


class TestLp:
    def test_constant_node_grid(self):
        n = 101
        h = 1.0 / (n - 1)
        f = GridFunction(np.ones((n, n)), (0, 0), (h, h))
        assert abs(lp_norm(f, 2) - 1) < 3 * h

    def test_linear(self):
        f = unit_square(lambda P: P[..., 0], 1000)
        assert lp_norm(f, 2) == pytest.approx(1 / math.sqrt(3), abs=1e-3)

    def test_zero(self):
        assert lp_norm(unit_square(lambda P: 0 * P[..., 0], 10), 3) == 0.0

    def test_mask_shrinkage_is_monotone(self):
        f = unit_square(lambda P: np.sin(5 * P[..., 0]) + P[..., 1], 50)
        m = f.points()[..., 0] < 0.5
        assert lp_norm(f, 2, mask=m) <= lp_norm(f, 2)

    def test_invalid_p(self):
        with pytest.raises(InvalidInputError):
            lp_norm(unit_square(lambda P: P[..., 0], 4), 0.5)


class TestSobolev:
    def test_constant(self):
        out = sobolev_norms(unit_square(lambda P: 3 + 0 * P[..., 0], 20), 2)
        assert out["W1p"] == pytest.approx(out["Lp"], rel=1e-12)
        assert out["W2p"] == pytest.approx(out["Lp"], rel=1e-12)

    def test_square(self):
        out = sobolev_norms(unit_square(lambda P: P[..., 0] ** 2, 400), 2)
        assert out["Lp"] == pytest.approx(1 / math.sqrt(5), abs=5e-3)
        assert out["grad_Lp"] == pytest.approx(2 / math.sqrt(3), abs=5e-3)
        assert out["hess_Lp"] == pytest.approx(2.0, abs=5e-3)
        assert out["W2p"] == pytest.approx(math.sqrt(1 / 5 + 4 / 3 + 4), abs=1e-2)

    def test_bump_second_order(self):
        bump = lambda P: np.exp(-np.sum((P - 0.5) ** 2, axis=-1) / 0.02)
        vals = [sobolev_norms(unit_square(bump, n), 2)["W2p"] for n in (40, 80, 160)]
        order = math.log2(abs(vals[1] - vals[0]) / abs(vals[2] - vals[1]))
        assert order > 1.8


class TestGagliardo:
    def test_constant_and_translation(self):
        g = BoundaryTrace.on_interval(np.sin(np.linspace(0, 3, 64)))
        assert gagliardo_seminorm(g.with_values(np.full(64, 2.0)), 2) == 0.0
        assert gagliardo_seminorm(g.with_values(g.values + 5.0), 3) == pytest.approx(gagliardo_seminorm(g, 3), rel=1e-12)

    def test_linear_self_convergence(self):
        vals = [gagliardo_seminorm(BoundaryTrace.on_interval((np.arange(n) + 0.5) / n), 2) for n in (200, 400)]
        assert abs(vals[1] / vals[0] - 1) < 0.05

    def test_step_grows_logarithmically(self):
        sq = []
        for n in (128, 256, 512, 1024):
            s = (np.arange(n) + 0.5) / n
            sq.append(gagliardo_seminorm(BoundaryTrace.on_interval((s > 0.5).astype(float)), 2) ** 2)
        inc = np.diff(sq)
        # squared seminorm grows by a constant amount per halving of h
        assert np.all(inc > 0.5)
        assert np.ptp(inc) / inc.mean() < 0.05

    def test_resolution_and_p(self):
        with pytest.raises(ResolutionError):
            gagliardo_seminorm(BoundaryTrace.on_interval([1.0, 2.0, 3.0]), 2)
        with pytest.raises(InvalidInputError):
            gagliardo_seminorm(BoundaryTrace.on_interval(np.ones(8)), 1)


def brute_force_bmo(a, r0):
    h = max(a.spacing)
    pts = a.points()[a.mask]
    vals = a.values[a.mask]
    best = 0.0
    r = r0
    while r >= 2 * h * (1 - 1e-12):
        for c in pts:
            inside = np.linalg.norm(pts - c, axis=-1) < r * (1 - 1e-10)
            v = vals[inside]
            best = max(best, float(np.mean(np.abs(v - v.mean()))))
        r /= 2
    return best


class TestBMO:
    def test_constant(self):
        assert bmo_seminorm(unit_square(lambda P: 1 + 0 * P[..., 0], 16), 0.25) == 0.0

    def test_linear_one_dimensional(self):
        n = 400
        h = 1.0 / n
        a = GridFunction.sample(lambda P: P[..., 0], (h / 2,), (h,), (n,))
        val = bmo_seminorm(a, 0.1)
        assert val == pytest.approx(brute_force_bmo(a, 0.1), abs=1e-6)
        # mean oscillation of x over an interval of radius r is r/2
        assert val == pytest.approx(0.05, abs=2 * h)

    def test_oscillating_sign(self):
        n = 2000
        h = 1.0 / n
        a = GridFunction.sample(lambda P: np.sign(np.sin(100 * P[..., 0])), (h / 2,), (h,), (n,))
        assert bmo_seminorm(a, 0.1, max_centers=300) > 0.9

    def test_matches_oracle_with_mask(self):
        rng = np.random.default_rng(4)
        h = 1.0 / 16
        vals = rng.normal(size=(16, 16))
        mask = rng.uniform(size=(16, 16)) > 0.2
        a = GridFunction(vals, (0, 0), (h, h), mask)
        assert bmo_seminorm(a, 0.3) == pytest.approx(brute_force_bmo(a, 0.3), abs=1e-12)

    def test_radius_too_small(self):
        with pytest.raises(InvalidInputError):
            bmo_seminorm(unit_square(lambda P: P[..., 0], 10), 0.1)


class TestHolder:
    def test_constant(self):
        assert holder_seminorm(np.ones(10), 0.5, np.linspace(0, 1, 10)) == 0.0

    def test_square_root(self):
        s = np.linspace(-1, 1, 201)
        assert holder_seminorm(np.sqrt(np.abs(s)), 0.5, s) == pytest.approx(1.0, abs=1e-6)

    def test_linear_half(self):
        s = np.linspace(0, 1, 101)
        assert holder_seminorm(s, 0.5, s) == pytest.approx(1.0, abs=1e-12)

    def test_alpha_range(self):
        with pytest.raises(InvalidInputError):
            holder_seminorm(np.ones(3), 1.5, np.arange(3.0))


ONE = PiecewiseConstant(np.array([0.0, 1.0]), np.array([1.0]))


class TestHardy:
    def test_constant(self):
        assert hardy_check(ONE, 2) == pytest.approx(1.0, abs=1e-12)
        assert hardy_check(lambda t: np.ones_like(t), 3) == pytest.approx(1.0, abs=1e-10)

    def test_identity(self):
        assert hardy_check(lambda t: t, 2) == pytest.approx(0.5, abs=1e-10)

    @pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
    def test_random_steps_below_sharp_constant(self, p):
        rng = np.random.default_rng(int(10 * p))
        ratios = [hardy_check(PiecewiseConstant.random(rng), p) for _ in range(1000)]
        assert max(ratios) <= p / (p - 1) + 1e-9

    def test_degenerate(self):
        with pytest.raises(InvalidInputError):
            hardy_check(PiecewiseConstant(np.array([0.0, 1.0]), np.array([0.0])), 2)


class TestDualHardy:
    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, 4.0])
    def test_constant_is_gamma(self, p):
        expected = math.gamma(p + 1) ** (1 / p)
        assert dual_hardy_check(ONE, p) == pytest.approx(expected, abs=1e-9)
        assert dual_hardy_check(lambda t: np.ones_like(t), p) == pytest.approx(expected, abs=1e-5)

    def test_frozen_values(self):
        assert dual_hardy_check(ONE, 2) == pytest.approx(1.41421356, abs=1e-8)
        assert dual_hardy_check(ONE, 3) == pytest.approx(1.81712059, abs=1e-8)

    def test_support_away_from_one(self):
        rng = np.random.default_rng(9)
        worst = 0.0
        for _ in range(1000):
            h = PiecewiseConstant.random(rng)
            v = np.where(h.breaks[:-1] < 0.5, h.values, 0.0)
            b = np.unique(np.concatenate([h.breaks, [0.5]]))
            mid = 0.5 * (b[:-1] + b[1:])
            vals = np.where(mid < 0.5, h(mid), 0.0)
            if not np.any(vals):
                continue
            worst = max(worst, dual_hardy_check(PiecewiseConstant(b, vals), 2))
        # the kernel is at most 2 on (0, 1/2)
        assert worst <= 2.0


class TestTruncatedScan:
    def test_constant_converges(self):
        scan = truncated_norm_scan(lambda P: np.ones(P.shape[:-1]), SectorRegion(1.0), 2, levels=30)
        assert scan.verdict == "convergent"
        assert abs(scan.slope) < 0.05

    def test_logarithmic_divergence(self):
        f = lambda P: np.linalg.norm(P, axis=-1) ** -0.5
        scan = truncated_norm_scan(f, SectorRegion(1.0), 4, levels=30)
        assert scan.verdict == "divergent"
        assert scan.values[-1] == pytest.approx(2 * math.pi * math.log(2 ** 30), rel=1e-8)

    def test_power_divergence(self):
        f = lambda P: 1 / np.linalg.norm(P, axis=-1)
        scan = truncated_norm_scan(f, SectorRegion(1.0), 4, levels=30)
        assert scan.verdict == "divergent"
        assert scan.slope == pytest.approx(-2.0, abs=0.1)
        assert scan.increment_slope == pytest.approx(-2.0, abs=1e-8)

    def test_radii_must_decrease(self):
        with pytest.raises(InvalidInputError):
            truncated_norm_scan(lambda P: P[..., 0], SectorRegion(1.0), 2, radii=[0.1, 0.2])


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3), st.integers(0, 10_000), st.sampled_from([1.0, 2.0, 3.5]))
def test_homogeneity_and_triangle(c, seed, p):
    rng = np.random.default_rng(seed)
    h = 0.1
    f = GridFunction(rng.normal(size=(10, 10)), (0, 0), (h, h))
    g = f.with_values(rng.normal(size=(10, 10)))
    assert lp_norm(f.with_values(c * f.values), p) == pytest.approx(abs(c) * lp_norm(f, p), rel=1e-12)
    lhs = lp_norm(f.with_values(f.values + g.values), p)
    assert lhs <= lp_norm(f, p) + lp_norm(g, p) + 1e-12 * (lp_norm(f, p) + lp_norm(g, p))
    tr = BoundaryTrace.on_interval(rng.normal(size=32))
    assert gagliardo_seminorm(tr.with_values(c * tr.values), max(p, 1.5)) == pytest.approx(
        abs(c) * gagliardo_seminorm(tr, max(p, 1.5)), rel=1e-12)
    assert lp_norm_trace(tr.with_values(c * tr.values), p) == pytest.approx(abs(c) * lp_norm_trace(tr, p), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from([1.5, 2.0, 4.0]))
def test_hardy_property(seed, p):
    h = PiecewiseConstant.random(np.random.default_rng(seed))
    if h.lp_norm(p) == 0:
        return
    assert hardy_check(h, p) <= p / (p - 1) + 1e-9
