"""Lipschitz graph domains, oblique vector fields and adapted coordinate frames.

A domain is the region ``{y : y_d < psi(y')}`` below the graph of a Lipschitz
function ``psi`` of ``d - 1`` variables.  Points are arrays with the coordinate
axis last; ``y'`` always carries ``d - 1`` components, even in two dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

from .errors import (
    DegenerateFieldError,
    FrameConstructionError,
    GeometryError,
    InvalidInputError,
    NonDifferentiablePointError,
    PreconditionError,
)

__all__ = [
    "GraphDomain",
    "ObliqueField",
    "CylNeighborhood",
    "lipschitz_constant",
    "outward_normal",
    "check_obliqueness",
    "oblique_frame",
    "cyl_neighborhood",
    "domain_from_config",
    "boundary_points",
]

KINK_TOL = 1e-9


def _first(yp):
    return np.asarray(yp, dtype=float)[..., 0]


@dataclass(frozen=True)
class GraphDomain:
    """Region below the graph of ``psi``.

    Parameters
    ----------
    psi : callable
        Maps ``y'`` of shape ``(..., dim - 1)`` to heights of shape ``(...)``.
    dim : int
        Ambient dimension, 2 or 3.
    lip_bound : float
        Claimed Lipschitz constant of ``psi``.
    base_radius : float
        Radius ``R0`` of the neighbourhoods on which the geometry is controlled.
    delta : float
        Obliqueness constant the domain is meant to be used with.
    dpsi, d2psi : callable, optional
        Gradient ``(..., dim - 1)`` and Hessian ``(..., dim - 1, dim - 1)`` of
        ``psi``.  Where ``psi`` has kinks the gradient returns a one-sided value.
    kink_test : callable, optional
        Returns a boolean mask of points where ``psi`` is not differentiable.
    chart : tuple, optional
        ``(lo, hi)`` box outside which ``psi`` is undefined.
    eps0 : float, optional
        Smallness parameter: ``|Dpsi(y') - Dpsi(z')| < 3 eps0``.  Defaults to
        ``lip_bound``.
    """

    psi: Callable[[NDArray], NDArray]
    dim: int = 2
    lip_bound: float = 0.1
    base_radius: float = 1.0
    delta: float = 1.0
    dpsi: Optional[Callable[[NDArray], NDArray]] = None
    d2psi: Optional[Callable[[NDArray], NDArray]] = None
    kink_test: Optional[Callable[[NDArray], NDArray]] = None
    chart: Optional[tuple] = None
    eps0: Optional[float] = None
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise InvalidInputError("only dimensions 2 and 3 are supported")
        if self.eps0 is None:
            object.__setattr__(self, "eps0", float(self.lip_bound))

    # evaluation -----------------------------------------------------------------
    def height(self, yp) -> NDArray:
        return np.asarray(self.psi(np.asarray(yp, dtype=float)), dtype=float)

    def slope(self, yp, strict: bool = False) -> NDArray:
        """Gradient of ``psi``; with ``strict`` kinks raise instead of returning one side."""
        yp = np.asarray(yp, dtype=float)
        if strict and self.kink_test is not None and np.any(self.kink_test(yp)):
            raise NonDifferentiablePointError("psi is not differentiable at the requested point")
        if self.dpsi is not None:
            return np.asarray(self.dpsi(yp), dtype=float)
        h = 1e-6 * max(1.0, self.base_radius)
        out = np.empty(yp.shape)
        for i in range(self.dim - 1):
            e = np.zeros(self.dim - 1)
            e[i] = h
            out[..., i] = (self.height(yp + e) - self.height(yp - e)) / (2 * h)
        return out

    def curvature(self, yp) -> NDArray:
        yp = np.asarray(yp, dtype=float)
        if self.d2psi is not None:
            return np.asarray(self.d2psi(yp), dtype=float)
        h = 1e-4 * max(1.0, self.base_radius)
        m = self.dim - 1
        out = np.empty(yp.shape + (m,))
        for i in range(m):
            e = np.zeros(m)
            e[i] = h
            out[..., i, :] = (self.slope(yp + e) - self.slope(yp - e)) / (2 * h)
        return out

    def is_kink(self, yp) -> NDArray:
        yp = np.asarray(yp, dtype=float)
        if self.kink_test is None:
            return np.zeros(yp.shape[:-1], dtype=bool)
        return np.asarray(self.kink_test(yp), dtype=bool)

    def check_chart(self, yp) -> None:
        if self.chart is None:
            return
        lo, hi = self.chart
        yp = np.asarray(yp)
        if np.any(yp < lo - 1e-12) or np.any(yp > hi + 1e-12):
            from .errors import OutOfChartError

            raise OutOfChartError(f"point outside the chart [{lo}, {hi}] of psi")

    def contains(self, y) -> NDArray:
        y = np.asarray(y, dtype=float)
        return y[..., -1] < self.height(y[..., :-1])

    def shifted(self, offset, lift: float = 0.0, name: str | None = None) -> "GraphDomain":
        """Domain with ``psi_new(y') = psi(y' + offset) + lift``."""
        offset = np.asarray(offset, dtype=float)
        psi, dpsi, d2psi, kink = self.psi, self.dpsi, self.d2psi, self.kink_test
        chart = None
        if self.chart is not None:
            chart = (self.chart[0] - float(np.max(offset)), self.chart[1] - float(np.min(offset)))
        return replace(
            self,
            psi=lambda yp: psi(np.asarray(yp, dtype=float) + offset) + lift,
            dpsi=None if dpsi is None else (lambda yp: dpsi(np.asarray(yp, dtype=float) + offset)),
            d2psi=None if d2psi is None else (lambda yp: d2psi(np.asarray(yp, dtype=float) + offset)),
            kink_test=None if kink is None else (lambda yp: kink(np.asarray(yp, dtype=float) + offset)),
            chart=chart,
            name=name or self.name,
        )

    # constructors ---------------------------------------------------------------
    @classmethod
    def flat(cls, level: float = 0.0, dim: int = 2, **kw) -> "GraphDomain":
        m = dim - 1
        return cls(
            psi=lambda yp: np.full(np.shape(yp)[:-1], float(level)),
            dpsi=lambda yp: np.zeros(np.shape(yp)),
            d2psi=lambda yp: np.zeros(np.shape(yp) + (m,)),
            dim=dim,
            lip_bound=kw.pop("lip_bound", 0.0),
            name="flat",
            params={"level": level},
            **kw,
        )

    @classmethod
    def tilted(cls, slope, level: float = 0.0, dim: int = 2, **kw) -> "GraphDomain":
        m = dim - 1
        s = np.broadcast_to(np.asarray(slope, dtype=float), (m,)).copy()
        return cls(
            psi=lambda yp: level + np.asarray(yp, dtype=float) @ s,
            dpsi=lambda yp: np.broadcast_to(s, np.shape(yp)).copy(),
            d2psi=lambda yp: np.zeros(np.shape(yp) + (m,)),
            dim=dim,
            lip_bound=kw.pop("lip_bound", float(np.linalg.norm(s))),
            name="tilted",
            params={"slope": s.tolist(), "level": level},
            **kw,
        )

    @classmethod
    def sawtooth(cls, slope: float, period: float, level: float = 0.0, phase: float = 0.0,
                 **kw) -> "GraphDomain":
        """Triangle wave of slope ``+-slope`` in the first tangential variable (d = 2)."""
        half = 0.5 * period

        def tri(s):
            t = np.mod(s - phase, period)
            return np.where(t < half, t, period - t)

        def kink(yp):
            t = np.mod(_first(yp) - phase, half)
            return np.minimum(t, half - t) < KINK_TOL * max(1.0, period)

        return cls(
            psi=lambda yp: level + slope * (tri(_first(yp)) - 0.5 * half),
            dpsi=lambda yp: (slope * np.where(np.mod(_first(yp) - phase, period) < half, 1.0, -1.0))[..., None],
            d2psi=lambda yp: np.zeros(np.shape(yp) + (1,)),
            kink_test=kink,
            lip_bound=kw.pop("lip_bound", abs(slope)),
            name="sawtooth",
            params={"slope": slope, "period": period, "level": level, "phase": phase},
            **kw,
        )

    @classmethod
    def sine(cls, amplitude: float, frequency: float, level: float = 0.0, **kw) -> "GraphDomain":
        a, k = amplitude, frequency
        return cls(
            psi=lambda yp: level + a * np.sin(k * _first(yp)),
            dpsi=lambda yp: (a * k * np.cos(k * _first(yp)))[..., None],
            d2psi=lambda yp: (-a * k * k * np.sin(k * _first(yp)))[..., None, None],
            lip_bound=kw.pop("lip_bound", abs(a * k)),
            name="sine",
            params={"amplitude": a, "frequency": k, "level": level},
            **kw,
        )

    @classmethod
    def cusp(cls, eps: float, level: float = 0.0, **kw) -> "GraphDomain":
        """``psi = level - |y1|^(1 + eps)``: the cusp ``{x > |y|^(1+eps)}`` with ``x = level - y_d``."""
        e = eps

        def d2(yp):
            s = np.abs(_first(yp))
            with np.errstate(divide="ignore"):
                val = -(1 + e) * e * np.where(s > 0, s ** (e - 1), np.inf)
            return val[..., None, None]

        return cls(
            psi=lambda yp: level - np.abs(_first(yp)) ** (1 + e),
            dpsi=lambda yp: (-(1 + e) * np.sign(_first(yp)) * np.abs(_first(yp)) ** e)[..., None],
            d2psi=d2,
            lip_bound=kw.pop("lip_bound", 1 + e),
            name="cusp",
            params={"eps": eps, "level": level},
            **kw,
        )

    @classmethod
    def wedge(cls, theta0: float, level: float = 0.0, **kw) -> "GraphDomain":
        """Wedge ``{|theta| < theta0}`` with ``theta0`` in ``(pi/2, pi)`` as a graph domain.

        With ``x = level - y_d`` and ``y = y1`` the wedge is ``{x > -|y| |cot theta0|}``.
        """
        if not (math.pi / 2 < theta0 < math.pi):
            raise InvalidInputError("theta0 must lie in (pi/2, pi)")
        c = abs(1.0 / math.tan(theta0))
        return cls(
            psi=lambda yp: level + c * np.abs(_first(yp)),
            dpsi=lambda yp: (c * np.where(_first(yp) >= 0, 1.0, -1.0))[..., None],
            d2psi=lambda yp: np.zeros(np.shape(yp) + (1,)),
            kink_test=lambda yp: np.abs(_first(yp)) < KINK_TOL,
            lip_bound=kw.pop("lip_bound", c),
            name="wedge",
            params={"theta0": theta0, "level": level},
            **kw,
        )

    @classmethod
    def table(cls, s, values, **kw) -> "GraphDomain":
        """Piecewise-linear ``psi`` through tabulated samples (d = 2)."""
        s = np.asarray(s, dtype=float)
        v = np.asarray(values, dtype=float)
        order = np.argsort(s)
        s, v = s[order], v[order]
        if s.size < 2 or np.any(np.diff(s) <= 0):
            raise InvalidInputError("table needs at least two distinct abscissae")
        slopes = np.diff(v) / np.diff(s)

        def dpsi(yp):
            t = _first(yp)
            idx = np.clip(np.searchsorted(s, t, side="right") - 1, 0, slopes.size - 1)
            return slopes[idx][..., None]

        def kink(yp):
            t = _first(yp)
            idx = np.clip(np.searchsorted(s, t), 0, s.size - 1)
            near = np.minimum(np.abs(s[idx] - t), np.abs(s[np.maximum(idx - 1, 0)] - t))
            return near < KINK_TOL

        return cls(
            psi=lambda yp: np.interp(_first(yp), s, v),
            dpsi=dpsi,
            d2psi=lambda yp: np.zeros(np.shape(yp) + (1,)),
            kink_test=kink,
            chart=(float(s[0]), float(s[-1])),
            lip_bound=kw.pop("lip_bound", float(np.max(np.abs(slopes)))),
            name="table",
            params={"n": int(s.size)},
            **kw,
        )


@dataclass(frozen=True)
class ObliqueField:
    """Boundary vector field ``b`` and zeroth-order coefficient ``b0``.

    ``b`` maps points ``(..., d)`` to vectors ``(..., d)``; ``b0`` maps points to scalars.
    ``alpha`` is the Hölder exponent the field is assumed to have.
    """

    b: Callable[[NDArray], NDArray]
    b0: Callable[[NDArray], NDArray] = lambda x: np.zeros(np.shape(x)[:-1])
    alpha: float = 1.0

    @classmethod
    def constant(cls, vector, b0: float = 0.0, alpha: float = 1.0) -> "ObliqueField":
        vec = np.asarray(vector, dtype=float)
        return cls(
            b=lambda x: np.broadcast_to(vec, np.shape(x)).copy(),
            b0=lambda x: np.full(np.shape(x)[:-1], float(b0)),
            alpha=alpha,
        )


def boundary_points(domain: GraphDomain, yp) -> NDArray:
    yp = np.asarray(yp, dtype=float)
    return np.concatenate([yp, domain.height(yp)[..., None]], axis=-1)


def _as_tangential(domain, sample_grid):
    g = np.asarray(sample_grid, dtype=float)
    if domain.dim == 2 and (g.ndim == 1 or g.shape[-1] != 1):
        g = g[..., None]
    return g.reshape(-1, domain.dim - 1)


def lipschitz_constant(psi, sample_grid) -> float:
    """Largest difference quotient of ``psi`` over all pairs of sample points.

    ``psi`` may be a :class:`GraphDomain` or a callable on ``(..., d - 1)`` arrays.
    For one tangential variable only adjacent sorted pairs are needed.
    """
    if isinstance(psi, GraphDomain):
        pts = _as_tangential(psi, sample_grid)
        f = psi.height
    else:
        pts = np.asarray(sample_grid, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        f = psi
    vals = np.asarray(f(pts), dtype=float)
    if pts.shape[0] < 2:
        return 0.0
    if pts.shape[1] == 1:
        order = np.argsort(pts[:, 0])
        ds = np.diff(pts[order, 0])
        dv = np.diff(vals[order])
        ok = ds > 0
        return float(np.max(np.abs(dv[ok]) / ds[ok])) if np.any(ok) else 0.0
    best = 0.0
    for start in range(0, pts.shape[0], 512):
        block = pts[start:start + 512]
        dist = np.linalg.norm(block[:, None, :] - pts[None, :, :], axis=-1)
        dv = np.abs(vals[start:start + 512, None] - vals[None, :])
        ok = dist > 0
        if np.any(ok):
            best = max(best, float(np.max(dv[ok] / dist[ok])))
    return best


def outward_normal(domain: GraphDomain, yp) -> NDArray:
    """Unit normal ``(Dpsi, -1) / sqrt(1 + |Dpsi|^2)`` at the boundary point over ``y'``.

    Raises :class:`NonDifferentiablePointError` at kinks of ``psi``.
    """
    yp = np.asarray(yp, dtype=float)
    dpsi = domain.slope(yp, strict=True)
    vec = np.concatenate([dpsi, -np.ones(dpsi.shape[:-1] + (1,))], axis=-1)
    return vec / np.linalg.norm(vec, axis=-1, keepdims=True)


def check_obliqueness(domain: GraphDomain, bc: ObliqueField, sample_grid) -> dict:
    """Worst signed obliqueness ratio ``b.n / |b|`` over sampled boundary points.

    Kinks are skipped.  The result reports both the signed minimum and the
    orientation-free minimum of ``|b.n| / |b|``.
    """
    yp = _as_tangential(domain, sample_grid)
    yp = yp[~domain.is_kink(yp)]
    if yp.shape[0] == 0:
        raise InvalidInputError("no differentiable boundary points in the sample")
    x = boundary_points(domain, yp)
    b = np.asarray(bc.b(x), dtype=float)
    nb = np.linalg.norm(b, axis=-1)
    if np.any(nb == 0):
        raise DegenerateFieldError("b vanishes at a sampled boundary point")
    n = outward_normal(domain, yp)
    ratio = np.sum(b * n, axis=-1) / nb
    i = int(np.argmin(ratio))
    j = int(np.argmin(np.abs(ratio)))
    return {
        "min_ratio": float(ratio[i]),
        "argmin": x[i].tolist(),
        "min_abs_ratio": float(abs(ratio[j])),
        "pass": bool(ratio[i] >= domain.delta),
        "pass_abs": bool(abs(ratio[j]) >= domain.delta),
    }


def _orthonormal_frame(axis: NDArray) -> NDArray:
    """Columns ``e_1, ..., e_{d-1}, axis`` forming a rotation (det = +1)."""
    d = axis.size
    if d == 2:
        e1 = np.array([axis[1], -axis[0]])
        return np.column_stack([e1, axis])
    # Householder reflection sending e_d to axis, then fix orientation.
    ed = np.zeros(d)
    ed[-1] = 1.0
    v = axis - ed
    if np.linalg.norm(v) < 1e-14:
        return np.eye(d)
    H = np.eye(d) - 2.0 * np.outer(v, v) / (v @ v)
    if np.linalg.det(H) < 0:
        H[:, 0] *= -1.0
    return H


def oblique_frame(domain: GraphDomain, x0, b_at_x0, window: float | None = None,
                  iters: int = 80) -> GraphDomain:
    """Rewrite ``domain`` in coordinates whose last axis is parallel to ``b(x0)``.

    ``x0`` is a boundary point.  The axis is ``+-b/|b|``, with the sign chosen so
    the domain stays below the new graph; obliqueness ``|b.n| >= delta |b|`` is
    required.  The new origin sits at ``x0 - psi(x0') * axis`` so that ``x0`` keeps
    its height.  The new graph is found by bracketed root finding on the fibres
    parallel to the axis.
    """
    x0 = np.asarray(x0, dtype=float)
    b = np.asarray(b_at_x0, dtype=float)
    d = domain.dim
    if x0.shape != (d,) or b.shape != (d,):
        raise InvalidInputError("x0 and b must be vectors of the ambient dimension")
    nb = np.linalg.norm(b)
    if nb == 0:
        raise DegenerateFieldError("b(x0) = 0")
    up = np.concatenate([-domain.slope(x0[:-1]), [1.0]])
    up /= np.linalg.norm(up)
    cosang = float(b @ up) / nb
    if abs(cosang) < domain.delta:
        raise PreconditionError(
            f"b(x0) is not delta-oblique: |b.n|/|b| = {abs(cosang):.3g} < delta = {domain.delta}")
    axis = np.sign(cosang) * b / nb
    Q = _orthonormal_frame(axis)
    h0 = float(domain.height(x0[:-1]))
    origin = x0 - h0 * axis
    if window is None:
        window = 4.0 * domain.base_radius * (1.0 + 6.0 / domain.delta)
    min_dFdt = domain.delta * 0.5

    def residual(yp, t):
        p = origin + yp @ Q[:, :-1].T + t[..., None] * axis
        return p[..., -1] - domain.height(p[..., :-1]), p

    def psi_new(yp):
        yp = np.asarray(yp, dtype=float)
        shape = yp.shape[:-1]
        ypf = yp.reshape(-1, d - 1)
        lo = np.full(ypf.shape[0], h0 - window)
        hi = np.full(ypf.shape[0], h0 + window)
        flo, _ = residual(ypf, lo)
        fhi, _ = residual(ypf, hi)
        if np.any(flo >= 0) or np.any(fhi <= 0):
            raise FrameConstructionError("fibre root not bracketed inside the search window")
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            fm, _ = residual(ypf, mid)
            neg = fm < 0
            lo = np.where(neg, mid, lo)
            hi = np.where(neg, hi, mid)
            if np.max(hi - lo) < 1e-14 * max(1.0, window):
                break
        return (0.5 * (lo + hi)).reshape(shape)

    def dpsi_new(yp):
        yp = np.asarray(yp, dtype=float)
        t = psi_new(yp)
        _, p = residual(yp, t)
        ds = domain.slope(p[..., :-1])
        grad_x = np.concatenate([-ds, np.ones(ds.shape[:-1] + (1,))], axis=-1)
        dF_dy = grad_x @ Q[:, :-1]
        dF_dt = grad_x @ axis
        if np.any(dF_dt < min_dFdt * 1e-3):
            raise FrameConstructionError("fibres are nearly tangent to the boundary")
        return -dF_dy / dF_dt[..., None]

    def kink_new(yp):
        t = psi_new(yp)
        _, p = residual(np.asarray(yp, dtype=float), t)
        return domain.is_kink(p[..., :-1])

    lip = np.tan(math.acos(min(1.0, domain.delta))) if domain.delta < 1 else 0.0
    new = GraphDomain(
        psi=psi_new,
        dim=d,
        lip_bound=float(max(lip, domain.lip_bound)),
        base_radius=domain.base_radius,
        delta=domain.delta,
        dpsi=dpsi_new,
        kink_test=kink_new if domain.kink_test is not None else None,
        eps0=domain.eps0,
        name=f"{domain.name}-oblique",
        params={**domain.params, "frame_axis": axis.tolist()},
    )
    object.__setattr__(new, "_rotation", Q)
    object.__setattr__(new, "_origin", origin)
    return new


@dataclass(frozen=True)
class CylNeighborhood:
    """Cylinder geometry around a boundary point placed at ``(0, 3R/delta)``.

    ``domain`` is the shifted graph domain.  The nested cylinder of scale ``k``
    (``k`` times ``R``) has its bottom at ``(3R/delta)(1 - k)``, so every scale
    shares the same centre and the graph stays inside ``Q_kR``.
    """

    domain: GraphDomain
    R: float
    delta: float
    center: NDArray
    psi_range: tuple

    @property
    def dim(self) -> int:
        return self.domain.dim

    def psi(self, yp) -> NDArray:
        return self.domain.height(yp)

    def bottom(self, k: float = 1.0) -> float:
        return 3.0 * self.R / self.delta * (1.0 - k)

    def height_bound(self, k: float = 1.0) -> float:
        return self.bottom(k) + 6.0 * k * self.R / self.delta

    def _radius_ok(self, y, k):
        yp = np.asarray(y, dtype=float)[..., :-1]
        return np.linalg.norm(yp, axis=-1) < k * self.R

    def in_omega(self, y, k: float = 1.0) -> NDArray:
        y = np.asarray(y, dtype=float)
        return self._radius_ok(y, k) & (y[..., -1] > self.bottom(k)) & (y[..., -1] < self.psi(y[..., :-1]))

    def sample(self, n: int, rng: np.random.Generator, k: float = 1.0) -> NDArray:
        """``n`` random points of ``Omega_kR``: ``y'`` uniform in the ball, ``y_d`` uniform on its fibre."""
        m = self.dim - 1
        if m == 1:
            yp = rng.uniform(-k * self.R, k * self.R, (n, 1))
        else:
            r = k * self.R * np.sqrt(rng.uniform(0, 1, n))
            th = rng.uniform(0, 2 * math.pi, n)
            yp = np.column_stack([r * np.cos(th), r * np.sin(th)])
        lo = self.bottom(k)
        top = self.psi(yp)
        t = rng.uniform(0, 1, n)
        yd = lo + t * (top - lo)
        return np.concatenate([yp, yd[:, None]], axis=1)

    def in_q(self, y, k: float = 1.0) -> NDArray:
        y = np.asarray(y, dtype=float)
        return self._radius_ok(y, k) & (y[..., -1] > self.bottom(k)) & (y[..., -1] < self.height_bound(k))


def _ball_samples(dim, R, n):
    if dim == 2:
        return np.linspace(-R, R, n)[:, None]
    m = int(math.ceil(math.sqrt(n)))
    g = np.linspace(-R, R, m)
    pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    pts = pts[np.linalg.norm(pts, axis=-1) <= R]
    # include the boundary circle
    th = np.linspace(0, 2 * math.pi, 4 * m, endpoint=False)
    return np.concatenate([pts, R * np.column_stack([np.cos(th), np.sin(th)])])


def cyl_neighborhood(domain: GraphDomain, x0, R: float, n_samples: int = 4001,
                     extent: float = 1.0) -> CylNeighborhood:
    """Shift ``domain`` so that ``x0`` sits at ``(0, 3R/delta)`` and verify the cylinder bounds.

    ``domain`` must already be in an oblique frame.  Requires ``R < delta * R0`` and
    ``R/delta < psi < 5R/delta`` on the closed ball of radius ``extent * R``.
    """
    delta = domain.delta
    if not (0 < R < delta * domain.base_radius):
        raise PreconditionError(f"R = {R} must satisfy 0 < R < delta * R0 = {delta * domain.base_radius}")
    x0 = np.asarray(x0, dtype=float)
    lift = 3.0 * R / delta - float(domain.height(x0[:-1]))
    shifted = domain.shifted(x0[:-1], lift)
    pts = _ball_samples(domain.dim, extent * R, n_samples)
    vals = shifted.height(pts)
    lo, hi = float(np.min(vals)), float(np.max(vals))
    if not (lo > R / delta and hi < 5.0 * R / delta):
        raise GeometryError(
            f"psi leaves (R/delta, 5R/delta) = ({R / delta:.6g}, {5 * R / delta:.6g}): range [{lo:.6g}, {hi:.6g}]")
    return CylNeighborhood(domain=shifted, R=float(R), delta=float(delta), center=x0, psi_range=(lo, hi))


_DOMAIN_TYPES = ("flat", "tilted", "sawtooth", "sine", "cusp", "wedge", "table")


def domain_from_config(cfg: dict) -> GraphDomain:
    """Build a :class:`GraphDomain` from a JSON-style dictionary."""
    cfg = dict(cfg)
    kind = cfg.pop("type", None)
    common = {}
    for key in ("delta", "eps0", "base_radius"):
        if key in cfg:
            common[key] = float(cfg.pop(key))
    if "R0" in cfg:
        common["base_radius"] = float(cfg.pop("R0"))
    if "lip_bound" in cfg:
        common["lip_bound"] = float(cfg.pop("lip_bound"))
    if kind == "flat":
        return GraphDomain.flat(cfg.get("level", 0.0), dim=int(cfg.get("dim", 2)), **common)
    if kind == "tilted":
        return GraphDomain.tilted(cfg["slope"], cfg.get("level", 0.0), dim=int(cfg.get("dim", 2)), **common)
    if kind == "sawtooth":
        return GraphDomain.sawtooth(cfg["slope"], cfg["period"], cfg.get("level", 0.0),
                                    cfg.get("phase", 0.0), **common)
    if kind == "sine":
        return GraphDomain.sine(cfg["amplitude"], cfg["frequency"], cfg.get("level", 0.0), **common)
    if kind == "cusp":
        return GraphDomain.cusp(cfg["eps"], cfg.get("level", 0.0), **common)
    if kind == "wedge":
        return GraphDomain.wedge(cfg["theta0"], cfg.get("level", 0.0), **common)
    if kind == "table":
        if "path" in cfg:
            data = np.loadtxt(cfg["path"], delimiter=",", ndmin=2)
            s, v = data[:, 0], data[:, 1]
        else:
            s, v = cfg["s"], cfg["values"]
        return GraphDomain.table(s, v, **common)
    raise InvalidInputError(f"unknown domain type {kind!r}; expected one of {_DOMAIN_TYPES}")
