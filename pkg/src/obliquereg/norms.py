"""Norm and seminorm estimators, Hardy-type inequality checks and truncated-norm scans."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import CubicSpline

from .errors import InvalidInputError, QuadratureFailureError, ResolutionError
from .quadrature import gauss_legendre, graded_breakpoints
from .report import NormReport

__all__ = [
    "GridFunction",
    "BoundaryTrace",
    "NormReport",
    "lp_norm",
    "lp_norm_trace",
    "grid_gradient",
    "grid_hessian",
    "sobolev_norms",
    "gagliardo_seminorm",
    "bmo_seminorm",
    "holder_seminorm",
    "PiecewiseConstant",
    "hardy_check",
    "dual_hardy_check",
    "SectorRegion",
    "CuspRegion",
    "ScanResult",
    "truncated_norm_scan",
]


# ----------------------------------------------------------------------------------
# grid functions


@dataclass
class GridFunction:
    """Samples on a uniform tensor grid with an inside-mask.

    ``values`` has the grid shape, optionally followed by component axes.
    ``weights`` overrides the default cell volume ``prod(spacing)``.
    """

    values: NDArray
    origin: tuple
    spacing: tuple
    mask: Optional[NDArray] = None
    weights: Optional[NDArray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.origin = tuple(float(o) for o in self.origin)
        self.spacing = tuple(float(h) for h in self.spacing)
        if any(h <= 0 for h in self.spacing):
            raise InvalidInputError("grid spacing must be positive")
        if self.mask is None:
            self.mask = np.ones(self.shape, dtype=bool)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.shape:
            raise InvalidInputError("mask shape does not match the grid")

    @property
    def dim(self) -> int:
        return len(self.spacing)

    @property
    def shape(self) -> tuple:
        return self.values.shape[: self.dim]

    def axes(self) -> list:
        return [o + h * np.arange(n) for o, h, n in zip(self.origin, self.spacing, self.shape)]

    def points(self) -> NDArray:
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def cell_weights(self) -> NDArray:
        if self.weights is not None:
            return np.asarray(self.weights, dtype=float)
        return np.full(self.shape, float(np.prod(self.spacing)))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(values, self.origin, self.spacing, self.mask, self.weights)

    @classmethod
    def sample(cls, func: Callable, origin, spacing, shape, inside: Callable | None = None) -> "GridFunction":
        axes = [o + h * np.arange(n) for o, h, n in zip(origin, spacing, shape)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        mask = None if inside is None else np.asarray(inside(pts), dtype=bool)
        vals = np.asarray(func(pts), dtype=float)
        if mask is not None:
            vals = np.where(mask.reshape(mask.shape + (1,) * (vals.ndim - mask.ndim)), vals, 0.0)
        return cls(vals, tuple(origin), tuple(spacing), mask)


def _pointwise_magnitude(values: NDArray, dim: int) -> NDArray:
    if values.ndim == dim:
        return np.abs(values)
    flat = values.reshape(values.shape[:dim] + (-1,))
    return np.linalg.norm(flat, axis=-1)


def _check_p(p):
    if not (p >= 1):
        raise InvalidInputError(f"p must be at least 1, got {p}")


def lp_norm(f: GridFunction, p: float, mask: NDArray | None = None) -> float:
    """``(sum |f_i|^p w_i)^(1/p)`` over inside nodes; vector values use the Euclidean magnitude."""
    _check_p(p)
    m = f.mask if mask is None else (f.mask & mask)
    mag = _pointwise_magnitude(f.values, f.dim)[m]
    w = f.cell_weights()[m]
    if mag.size == 0:
        return 0.0
    top = float(np.max(mag))
    if top == 0.0:
        return 0.0
    return top * float(np.sum(w * (mag / top) ** p)) ** (1.0 / p)


def _shift(a, k, axis, fill):
    out = np.full_like(a, fill)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if k > 0:
        src[axis] = slice(k, None)
        dst[axis] = slice(None, -k)
    else:
        src[axis] = slice(None, k)
        dst[axis] = slice(-k, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _first_diff(values, mask, axis, h):
    """Mask-aware first derivative: central where possible, second-order one-sided otherwise."""
    v = np.where(mask, values, 0.0)
    up1, up2 = _shift(v, 1, axis, 0.0), _shift(v, 2, axis, 0.0)
    dn1, dn2 = _shift(v, -1, axis, 0.0), _shift(v, -2, axis, 0.0)
    mu1, mu2 = _shift(mask, 1, axis, False), _shift(mask, 2, axis, False)
    md1, md2 = _shift(mask, -1, axis, False), _shift(mask, -2, axis, False)
    out = np.full(values.shape, np.nan)
    central = mask & mu1 & md1
    fwd2 = mask & ~central & mu1 & mu2
    bwd2 = mask & ~central & ~fwd2 & md1 & md2
    fwd1 = mask & ~central & ~fwd2 & ~bwd2 & mu1
    bwd1 = mask & ~central & ~fwd2 & ~bwd2 & ~fwd1 & md1
    out[central] = ((up1 - dn1) / (2 * h))[central]
    out[fwd2] = ((-3 * v + 4 * up1 - up2) / (2 * h))[fwd2]
    out[bwd2] = ((3 * v - 4 * dn1 + dn2) / (2 * h))[bwd2]
    out[fwd1] = ((up1 - v) / h)[fwd1]
    out[bwd1] = ((v - dn1) / h)[bwd1]
    if np.any(mask & np.isnan(out)):
        raise ResolutionError("mask too thin for difference stencils along an axis")
    return out


def _second_diff(values, mask, axis, h):
    v = np.where(mask, values, 0.0)
    s = {k: _shift(v, k, axis, 0.0) for k in (-3, -2, -1, 1, 2, 3)}
    m = {k: _shift(mask, k, axis, False) for k in (-3, -2, -1, 1, 2, 3)}
    out = np.full(values.shape, np.nan)
    central = mask & m[1] & m[-1]
    fwd = mask & ~central & m[1] & m[2] & m[3]
    bwd = mask & ~central & ~fwd & m[-1] & m[-2] & m[-3]
    fwd3 = mask & ~central & ~fwd & ~bwd & m[1] & m[2]
    bwd3 = mask & ~central & ~fwd & ~bwd & ~fwd3 & m[-1] & m[-2]
    out[central] = ((s[1] - 2 * v + s[-1]) / h ** 2)[central]
    out[fwd] = ((2 * v - 5 * s[1] + 4 * s[2] - s[3]) / h ** 2)[fwd]
    out[bwd] = ((2 * v - 5 * s[-1] + 4 * s[-2] - s[-3]) / h ** 2)[bwd]
    out[fwd3] = ((v - 2 * s[1] + s[2]) / h ** 2)[fwd3]
    out[bwd3] = ((v - 2 * s[-1] + s[-2]) / h ** 2)[bwd3]
    if np.any(mask & np.isnan(out)):
        raise ResolutionError("mask too thin for second-difference stencils")
    return out


def grid_gradient(u: GridFunction) -> NDArray:
    """Finite-difference gradient, shape ``grid + (d,)``; NaN outside the mask."""
    return np.stack([_first_diff(u.values, u.mask, k, u.spacing[k]) for k in range(u.dim)], axis=-1)


def grid_hessian(u: GridFunction, gradient: NDArray | None = None) -> NDArray:
    """Finite-difference Hessian, shape ``grid + (d, d)``; NaN outside the mask."""
    d = u.dim
    du = grid_gradient(u) if gradient is None else gradient
    out = np.empty(u.shape + (d, d))
    for i in range(d):
        out[..., i, i] = _second_diff(u.values, u.mask, i, u.spacing[i])
        for j in range(i + 1, d):
            mixed = 0.5 * (_first_diff(np.nan_to_num(du[..., i]), u.mask, j, u.spacing[j])
                           + _first_diff(np.nan_to_num(du[..., j]), u.mask, i, u.spacing[i]))
            out[..., i, j] = out[..., j, i] = mixed
    return out


def sobolev_norms(u: GridFunction, p: float) -> dict:
    """``Lp``, ``grad_Lp``, ``hess_Lp`` and the composite ``W1p``, ``W2p`` norms."""
    _check_p(p)
    if u.values.ndim != u.dim:
        raise InvalidInputError("sobolev_norms expects a scalar grid function")
    du = grid_gradient(u)
    d2u = grid_hessian(u, du)
    n0 = lp_norm(u, p)
    n1 = lp_norm(u.with_values(np.nan_to_num(du)), p)
    n2 = lp_norm(u.with_values(np.nan_to_num(d2u)), p)
    return {
        "Lp": n0,
        "grad_Lp": n1,
        "hess_Lp": n2,
        "W1p": (n0 ** p + n1 ** p) ** (1.0 / p),
        "W2p": (n0 ** p + n1 ** p + n2 ** p) ** (1.0 / p),
    }


# ----------------------------------------------------------------------------------
# boundary traces


@dataclass
class BoundaryTrace:
    """Boundary datum sampled along a curve.

    ``param`` holds the tangential coordinates ``y'`` (shape ``(n,)`` for curves),
    ``arclength`` the cumulative arclength at each sample and ``weights`` the
    arclength quadrature weights.
    """

    param: NDArray
    values: NDArray
    weights: NDArray
    arclength: NDArray
    interpolation: str = "cubic"
    _interp: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.param = np.asarray(self.param, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.arclength = np.asarray(self.arclength, dtype=float)
        if np.any(self.weights <= 0):
            raise InvalidInputError("arclength weights must be positive")
        if self.param.ndim != 1:
            raise InvalidInputError("traces are parameterised by one tangential variable")

    def __call__(self, yp) -> NDArray:
        t = np.asarray(yp, dtype=float)
        if t.ndim >= 1 and t.shape[-1] == 1:
            t = t[..., 0]
        if self._interp is None:
            if self.interpolation == "cubic" and self.param.size >= 4:
                self._interp = CubicSpline(self.param, self.values, extrapolate=True)
            else:
                self._interp = lambda x: np.interp(x, self.param, self.values)
        return np.asarray(self._interp(t))

    def with_values(self, values) -> "BoundaryTrace":
        return BoundaryTrace(self.param, values, self.weights, self.arclength, self.interpolation)

    @property
    def spacing(self) -> float:
        return float(np.max(self.weights))

    @classmethod
    def on_interval(cls, values, a: float = 0.0, b: float = 1.0, **kw) -> "BoundaryTrace":
        """Midpoint samples of a flat curve ``[a, b]`` (arclength equals the parameter)."""
        values = np.asarray(values, dtype=float)
        n = values.size
        h = (b - a) / n
        s = a + h * (np.arange(n) + 0.5)
        return cls(s, values, np.full(n, h), s - a, **kw)

    @classmethod
    def from_function(cls, g: Callable, domain, a: float, b: float, n: int, **kw) -> "BoundaryTrace":
        """Sample ``g(y')`` at cell midpoints of ``[a, b]`` with arclength weights of the graph."""
        edges = np.linspace(a, b, n + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        x, w = gauss_legendre(edges[:-1], edges[1:], 8)
        dpsi = domain.slope(x[..., None])[..., 0]
        cell = np.sum(w * np.sqrt(1.0 + dpsi ** 2), axis=-1)
        xm, wm = gauss_legendre(edges[:-1], mid, 8)
        dm = domain.slope(xm[..., None])[..., 0]
        half = np.sum(wm * np.sqrt(1.0 + dm ** 2), axis=-1)
        arc = np.concatenate([[0.0], np.cumsum(cell)[:-1]]) + half
        vals = np.asarray(g(mid[:, None]), dtype=float).reshape(n)
        return cls(mid, vals, cell, arc, **kw)


def lp_norm_trace(g: BoundaryTrace, p: float) -> float:
    _check_p(p)
    mag = np.abs(g.values)
    top = float(np.max(mag)) if mag.size else 0.0
    if top == 0.0:
        return 0.0
    return top * float(np.sum(g.weights * (mag / top) ** p)) ** (1.0 / p)


def gagliardo_seminorm(g: BoundaryTrace, p: float, cutoff: float | None = None,
                       block: int = 1024) -> float:
    """``(sum_{|s-t| > h} |g(s) - g(t)|^p / |s - t|^p w_s w_t)^(1/p)`` (order ``1 - 1/p``).

    ``cutoff`` defaults to the largest arclength cell, which removes the diagonal
    and its immediate neighbours on uniform samples.
    """
    if not p > 1:
        raise InvalidInputError("the boundary seminorm needs p > 1")
    n = g.values.size
    if n < 4:
        raise ResolutionError("at least four samples are required")
    h = g.spacing if cutoff is None else float(cutoff)
    s, v, w = g.arclength, g.values, g.weights
    total = 0.0
    for i in range(0, n, block):
        ds = np.abs(s[i:i + block, None] - s[None, :])
        dv = np.abs(v[i:i + block, None] - v[None, :])
        keep = ds > h * (1.0 + 1e-12)
        q = np.zeros_like(ds)
        q[keep] = (dv[keep] / ds[keep]) ** p
        total += float(np.sum(w[i:i + block, None] * w[None, :] * q))
    return total ** (1.0 / p)


def holder_seminorm(g, alpha: float, points: NDArray | None = None, block: int = 1024) -> float:
    """Sup of ``|g(s) - g(t)| / |s - t|^alpha`` over sampled pairs.

    ``g`` is a :class:`BoundaryTrace` (distances along arclength) or an array of
    values together with ``points`` of shape ``(n,)`` or ``(n, k)``.
    """
    if not (0 < alpha <= 1):
        raise InvalidInputError("alpha must lie in (0, 1]")
    if isinstance(g, BoundaryTrace):
        vals, pts = g.values, g.arclength[:, None]
    else:
        vals = np.asarray(g, dtype=float).ravel()
        pts = np.asarray(points, dtype=float)
        pts = pts.reshape(vals.size, -1)
    if vals.size < 2:
        raise InvalidInputError("need at least two samples")
    best = 0.0
    for i in range(0, vals.size, block):
        dist = np.linalg.norm(pts[i:i + block, None, :] - pts[None, :, :], axis=-1)
        dv = np.abs(vals[i:i + block, None] - vals[None, :])
        ok = dist > 0
        if np.any(ok):
            best = max(best, float(np.max(dv[ok] / dist[ok] ** alpha)))
    return best


def bmo_seminorm(a: GridFunction, r0: float, max_centers: int | None = None, seed: int = 0) -> float:
    """Sup of the mean oscillation of ``a`` over ``B_r(x) ∩ Ω`` for dyadic ``r`` in ``[2h, r0]``.

    Every inside node is a centre unless ``max_centers`` limits the sweep to a
    seeded random subset.  Balls are open and contain grid nodes only.
    """
    h = max(a.spacing)
    if r0 < 2 * h * (1 - 1e-12):
        raise InvalidInputError("r0 must be at least twice the grid spacing")
    radii = []
    r = float(r0)
    while r >= 2 * h * (1 - 1e-12):
        radii.append(r)
        r /= 2.0
    d = a.dim
    vals = a.values
    mask = a.mask
    centers = np.argwhere(mask)
    if max_centers is not None and centers.shape[0] > max_centers:
        rng = np.random.default_rng(seed)
        centers = centers[np.sort(rng.choice(centers.shape[0], max_centers, replace=False))]
    shape = np.array(a.shape)
    sp = np.array(a.spacing)
    best = 0.0
    for r in radii:
        reach = np.floor(r / sp).astype(int)
        rng_axes = [np.arange(-k, k + 1) for k in reach]
        offs = np.stack(np.meshgrid(*rng_axes, indexing="ij"), axis=-1).reshape(-1, d)
        # open balls; nodes at distance r up to roundoff are excluded
        offs = offs[np.linalg.norm(offs * sp, axis=-1) < r * (1 - 1e-10)]
        for start in range(0, centers.shape[0], max(1, 400000 // max(1, offs.shape[0]))):
            c = centers[start:start + max(1, 400000 // max(1, offs.shape[0]))]
            idx = c[:, None, :] + offs[None, :, :]
            inb = np.all((idx >= 0) & (idx < shape), axis=-1)
            idx = np.where(inb[..., None], idx, 0)
            ok = inb & mask[tuple(np.moveaxis(idx, -1, 0))]
            v = vals[tuple(np.moveaxis(idx, -1, 0))]
            cnt = ok.sum(axis=1)
            mean = np.where(ok, v, 0.0).sum(axis=1) / cnt
            osc = np.where(ok, np.abs(v - mean[:, None]), 0.0).sum(axis=1) / cnt
            best = max(best, float(np.max(osc)))
    return best


# ----------------------------------------------------------------------------------
# Hardy inequalities


@dataclass(frozen=True)
class PiecewiseConstant:
    """Step function on ``(0, 1)`` with ``values[k]`` on ``[breaks[k], breaks[k+1])``."""

    breaks: NDArray
    values: NDArray

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if b.ndim != 1 or b.size != v.size + 1 or b[0] != 0.0 or b[-1] != 1.0 or np.any(np.diff(b) <= 0):
            raise InvalidInputError("breaks must increase from 0 to 1 with one more entry than values")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    def __call__(self, x):
        idx = np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, self.values.size - 1)
        return self.values[idx]

    def lp_norm(self, p: float) -> float:
        return float(np.sum(np.abs(self.values) ** p * np.diff(self.breaks))) ** (1.0 / p)

    @classmethod
    def random(cls, rng: np.random.Generator, pieces: int | None = None) -> "PiecewiseConstant":
        n = int(pieces if pieces is not None else rng.integers(1, 12))
        inner = np.sort(rng.uniform(0.0, 1.0, n - 1))
        breaks = np.concatenate([[0.0], inner, [1.0]])
        breaks = np.unique(breaks)
        return cls(breaks, rng.uniform(-1.0, 1.0, breaks.size - 1))


def _sub_panels(a, b, toward_zero: bool):
    """Split ``[a, b]`` so each panel is no longer than its distance to the singular end."""
    if toward_zero:
        if a <= 0:
            return graded_breakpoints(0.0, b, "a", 40, 0.5, 4)
        pts = [a]
        while pts[-1] < b:
            pts.append(min(b, 2.0 * pts[-1]))
        return np.array(pts)
    if b >= 1:
        # Gauss nodes closer to 1 than ~1e-16 would round onto the singularity
        levels = max(1, min(40, int(math.log2((1.0 - a) / 1e-12))))
        return graded_breakpoints(a, 1.0, "b", levels, 0.5, 4)
    pts = [b]
    while pts[-1] > a:
        pts.append(max(a, 1.0 - 2.0 * (1.0 - pts[-1])))
    return np.array(pts[::-1])


def _piece_panels(breaks, toward_zero, extra=(), n=20):
    """Gauss nodes over each piece, refined at ``extra`` points; ``owner`` maps nodes to pieces."""
    pts = np.unique(np.concatenate([breaks, np.asarray(extra, dtype=float)]))
    xs, ws = [], []
    for a, b in zip(pts[:-1], pts[1:]):
        bp = _sub_panels(a, b, toward_zero)
        x, w = gauss_legendre(bp[:-1], bp[1:], n)
        xs.append(x.ravel())
        ws.append(w.ravel())
    x, w = np.concatenate(xs), np.concatenate(ws)
    owner = np.clip(np.searchsorted(breaks, x, side="right") - 1, 0, breaks.size - 2)
    return x, w, owner


def _inside(points, breaks, owner_lo, owner_hi):
    keep = (points > breaks[owner_lo]) & (points < breaks[owner_hi])
    return points[keep]


def _callable_primitive(h, breaks, kernel, n=16):
    """Nodes, weights, h-values and ``int_0^x kernel(t) h(t) dt`` at every node."""
    x, w = gauss_legendre(breaks[:-1], breaks[1:], n)
    panel_int = np.sum(w * kernel(x) * h(x), axis=-1)
    before = np.concatenate([[0.0], np.cumsum(panel_int)[:-1]])
    xi, wi = gauss_legendre(np.broadcast_to(breaks[:-1, None], x.shape), x, n)
    partial = np.sum(wi * kernel(xi) * h(xi), axis=-1)
    return x.ravel(), w.ravel(), h(x).ravel(), (before[:, None] + partial).ravel()


def _ratio(num_pp, h_norm, p):
    if h_norm == 0:
        raise InvalidInputError("h has zero L_p norm")
    return num_pp ** (1.0 / p) / h_norm


def hardy_check(h, p: float, levels: int = 40) -> float:
    """``||(1/x) int_0^x h||_p / ||h||_p`` on ``(0, 1)``.

    Step functions are integrated exactly piece by piece; callables use a
    composite Gauss rule graded toward both endpoints.
    """
    if not p > 1:
        raise InvalidInputError("the Hardy inequality needs p > 1")
    if isinstance(h, PiecewiseConstant):
        b, v = h.breaks, h.values
        prim = np.concatenate([[0.0], np.cumsum(v * np.diff(b))])
        idx = np.arange(v.size)
        with np.errstate(divide="ignore", invalid="ignore"):
            roots = np.where(v != 0, b[:-1] - prim[:-1] / v, np.nan)
        roots = _inside(roots, b, idx, idx + 1)
        x, w, k = _piece_panels(b, toward_zero=True, extra=roots)
        H = (prim[k] + v[k] * (x - b[k])) / x
        num = float(np.sum(w * np.abs(H) ** p))
        return _ratio(num, h.lp_norm(p), p)
    breaks = graded_breakpoints(0.0, 1.0, "both", levels, 0.5, 8)
    x, w, hv, prim = _callable_primitive(h, breaks, lambda t: np.ones_like(t))
    num = float(np.sum(w * np.abs(prim / x) ** p))
    den = float(np.sum(w * np.abs(hv) ** p)) ** (1.0 / p)
    return _ratio(num, den, p)


def dual_hardy_check(h, p: float, levels: int = 40) -> float:
    """``||int_0^x h(t)/(1-t) dt||_p / ||h||_p`` on ``(0, 1)`` with grading toward 1."""
    if not p >= 1:
        raise InvalidInputError("p must be at least 1")
    if isinstance(h, PiecewiseConstant):
        b, v = h.breaks, h.values
        logs = -np.log1p(-b[:-1])
        inc = v[:-1] * np.diff(logs)
        prim = np.concatenate([[0.0], np.cumsum(inc)])
        idx = np.arange(v.size)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            roots = np.where(v != 0, 1.0 - (1.0 - b[:-1]) * np.exp(prim / v), np.nan)
        roots = _inside(roots, b, idx, idx + 1)
        x, w, k = _piece_panels(b, toward_zero=False, extra=roots)
        F = prim[k] + v[k] * (-np.log1p(-x) + np.log1p(-b[k]))
        num = float(np.sum(w * np.abs(F) ** p))
        return _ratio(num, h.lp_norm(p), p)
    breaks = graded_breakpoints(0.0, 1.0, "b", levels, 0.5, 8)
    x, w, hv, prim = _callable_primitive(h, breaks, lambda t: 1.0 / (1.0 - t))
    num = float(np.sum(w * np.abs(prim) ** p))
    den = float(np.sum(w * np.abs(hv) ** p)) ** (1.0 / p)
    return _ratio(num, den, p)


# ----------------------------------------------------------------------------------
# truncated-norm scans


class SectorRegion:
    """Sector ``{center + r e^{i theta}: theta_lo < theta < theta_hi, r < radius}``.

    The truncation parameter removes the disk ``r <= tau``.
    """

    def __init__(self, radius: float, theta_lo: float = -math.pi, theta_hi: float = math.pi,
                 center=(0.0, 0.0), n_r: int = 24, n_theta: int = 24, theta_panels: int = 8):
        self.radius = float(radius)
        self.theta_lo, self.theta_hi = float(theta_lo), float(theta_hi)
        self.center = np.asarray(center, dtype=float)
        self.n_r = n_r
        tb = np.linspace(self.theta_lo, self.theta_hi, theta_panels + 1)
        th, wt = gauss_legendre(tb[:-1], tb[1:], n_theta)
        self._th, self._wt = th.ravel(), wt.ravel()

    @property
    def scale(self) -> float:
        return self.radius

    def _integrate(self, fun, breaks):
        r, wr = gauss_legendre(breaks[:-1], breaks[1:], self.n_r)
        r, wr = r.ravel(), wr.ravel()
        pts = self.center + np.stack([np.outer(r, np.cos(self._th)), np.outer(r, np.sin(self._th))], axis=-1)
        vals = fun(pts)
        return float(np.sum(vals * (wr * r)[:, None] * self._wt[None, :]))

    def shell(self, fun, t_small: float, t_big: float) -> float:
        return self._integrate(fun, np.array([t_small, t_big]))

    def outer(self, fun, t: float) -> float:
        br = np.unique(np.concatenate([np.linspace(t, self.radius, 17), [0.5 * self.radius]]))
        br = br[(br >= t) & (br <= self.radius)]
        return self._integrate(fun, br)


class CuspRegion:
    """``{(x, y): x > c |y|^gamma, x^2 + y^2 < radius^2}``; truncation removes ``|y| <= tau``."""

    def __init__(self, gamma: float, radius: float, coef: float = 1.0, n_y: int = 24, n_x: int = 24):
        self.gamma, self.radius, self.coef = float(gamma), float(radius), float(coef)
        self.n_y, self.n_x = n_y, n_x
        from scipy.optimize import brentq

        self.y_max = brentq(lambda y: self.coef * y ** self.gamma - math.sqrt(max(self.radius ** 2 - y * y, 0.0)),
                            0.0, self.radius)

    @property
    def scale(self) -> float:
        return self.y_max

    def _x_integral(self, fun, y, wy):
        lo = self.coef * np.abs(y) ** self.gamma
        hi = np.sqrt(np.maximum(self.radius ** 2 - y * y, 0.0))
        mid = np.sqrt(np.maximum((0.5 * self.radius) ** 2 - y * y, 0.0))
        mid = np.clip(mid, lo, hi)
        total = 0.0
        for a, b in ((lo, mid), (mid, hi)):
            x, wx = gauss_legendre(a, b, self.n_x)
            pts = np.stack([x, np.broadcast_to(y[:, None], x.shape)], axis=-1)
            total += float(np.sum(fun(pts) * wx * wy[:, None]))
        return total

    def _band(self, fun, breaks):
        y, wy = gauss_legendre(breaks[:-1], breaks[1:], self.n_y)
        y, wy = y.ravel(), wy.ravel()
        return self._x_integral(fun, y, wy) + self._x_integral(fun, -y, wy)

    def shell(self, fun, t_small: float, t_big: float) -> float:
        return self._band(fun, np.array([t_small, t_big]))

    def outer(self, fun, t: float) -> float:
        ym = self.y_max
        br = [t]
        cut = math.sqrt(max(0.0, 0.25 * self.radius ** 2))
        br.extend(np.linspace(t, ym, 17)[1:-1])
        if t < cut < ym:
            br.append(cut)
        # grade toward y_max where the x-interval closes like a square root
        tail = ym - (ym - t) * 0.5 ** np.arange(1, 20)
        br = np.unique(np.concatenate([br, tail, [ym]]))
        return self._band(fun, br[(br >= t) & (br <= ym)])


@dataclass
class ScanResult:
    radii: NDArray
    values: NDArray
    slope: float
    verdict: str
    last_rel_increment: float
    increment_ratio: float
    log_growth: float
    fit_points: int
    increment_slope: float = float("nan")

    @property
    def norms(self) -> NDArray:
        return self.values

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "verdict": self.verdict,
            "last_rel_increment": self.last_rel_increment,
            "increment_ratio": self.increment_ratio,
            "log_growth": self.log_growth,
            "increment_slope": self.increment_slope,
            "final_value": float(self.values[-1]),
            "levels": int(self.radii.size),
        }


def truncated_norm_scan(f: Callable, region, p: float, levels: int = 40, radii=None,
                        fit_points: int = 8, slope_tol: float = 0.05, cauchy_tol: float = 0.01) -> ScanResult:
    """Certify ``f in L_p`` or ``f not in L_p`` near a singular set.

    ``values[k]`` is ``||f||_p^p`` over the region minus the exclusion of size
    ``radii[k]`` (default ``scale * 2^-k``).  A slope of ``log values`` against
    ``log radii`` below ``-slope_tol`` certifies divergence (``increment_slope``,
    fitted to the shell contributions, estimates the exponent without the bias
    of the finite part); a flat slope with a
    relative last increment below ``cauchy_tol`` and geometrically decaying
    increments certifies convergence.  Non-decaying increments (logarithmic
    growth) also certify divergence.
    """
    _check_p(p)
    if radii is None:
        radii = region.scale * 0.5 ** np.arange(1, levels + 1)
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) >= 0):
        raise InvalidInputError("radii must decrease")

    def integrand(pts):
        val = np.asarray(f(pts), dtype=float)
        if val.ndim > pts.ndim - 1:
            val = np.linalg.norm(val.reshape(val.shape[: pts.ndim - 1] + (-1,)), axis=-1)
        out = np.abs(val) ** p
        if not np.all(np.isfinite(out)):
            raise QuadratureFailureError("integrand is not finite at a quadrature node")
        return out

    vals = np.empty(radii.size)
    vals[0] = region.outer(integrand, radii[0])
    for k in range(1, radii.size):
        vals[k] = vals[k - 1] + region.shell(integrand, radii[k], radii[k - 1])
    if np.any(np.diff(vals) < -1e-12 * np.abs(vals[1:])):
        raise QuadratureFailureError("truncated values are not monotone")
    m = min(fit_points, radii.size)
    lr, lv = np.log(radii[-m:]), np.log(np.maximum(vals[-m:], np.finfo(float).tiny))
    slope = float(np.polyfit(lr, lv, 1)[0]) if vals[-1] > 0 else 0.0
    inc = np.diff(vals)
    last = float(inc[-1] / vals[-1]) if vals[-1] > 0 else 0.0
    lag = min(4, inc.size - 1)
    ratio = float(inc[-1] / inc[-1 - lag]) if lag > 0 and inc[-1 - lag] > 0 else 0.0
    log_growth = float(np.polyfit(-lr, vals[-m:], 1)[0] / vals[-1]) if vals[-1] > 0 else 0.0
    # shell contributions follow the power law without the constant offset of ``vals``
    tail = inc[-(m - 1):]
    inc_slope = (float(np.polyfit(lr[1:], np.log(tail), 1)[0])
                 if m > 2 and np.all(tail > 0) else float("nan"))
    tiny = inc[-1] <= 1e-13 * max(vals[-1], 1e-300)
    decaying = tiny or ratio < 0.8
    if slope < -slope_tol:
        verdict = "divergent"
    elif not decaying:
        verdict = "divergent"
    elif abs(slope) <= slope_tol and last <= cauchy_tol:
        verdict = "convergent"
    else:
        verdict = "inconclusive"
    return ScanResult(radii, vals, slope, verdict, last, ratio, log_growth, m, inc_slope)
