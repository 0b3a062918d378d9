"""Extension of Neumann data: from ``g`` on the graph to ``v`` with ``dv/dy_d = g``.

The datum is first extended into the domain constant along vertical fibres
(with a vertical cutoff near the bottom), mollified with the regularized
mollification, and finally integrated along fibres:

    v(y', y_d) = int_0^{y_d} g~(y', t) dt.

Since ``g~`` coincides with ``g`` on the boundary, ``dv/dy_d = g`` there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import cumulative_simpson

from .errors import ExtensionFailureError, InvalidInputError, PreconditionError
from .geometry import CylNeighborhood
from .mollification import MollifiedField
from .norms import (
    BoundaryTrace,
    GridFunction,
    gagliardo_seminorm,
    lp_norm,
    lp_norm_trace,
    _first_diff,
)
from .quadrature import MollifierKernel, gauss_legendre
from .regdist import RegDistField
from .report import NormReport

__all__ = [
    "smoothstep",
    "localization_cutoff",
    "localize_boundary_datum",
    "FiberExtension",
    "interior_extension_E",
    "ExtensionResult",
    "extend_neumann",
]


def smoothstep(t):
    """Quintic ramp ``6t^5 - 15t^4 + 10t^3`` clipped to ``[0, 1]`` and its derivative."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10 - 15 * t + 6 * t * t), 30 * t * t * (1 - t) ** 2


def localization_cutoff(R: float) -> Callable:
    """Radial cutoff in ``y'``: 1 for ``|y'| <= 2R``, 0 for ``|y'| >= 3R``, ``|D eta| <= 1.875/R``."""

    def eta(yp):
        r = np.linalg.norm(np.atleast_1d(np.asarray(yp, dtype=float))[..., None] if np.ndim(yp) == 1 else yp,
                           axis=-1)
        s, _ = smoothstep((r - 2 * R) / R)
        return 1.0 - s

    return eta


def localize_boundary_datum(g: BoundaryTrace, R: float) -> BoundaryTrace:
    """Multiply a trace by the localization cutoff of radius ``R``."""
    s, _ = smoothstep((np.abs(g.param) - 2 * R) / R)
    return g.with_values(g.values * (1.0 - s))


def _datum(g):
    """Value and derivative callables on ``(..., 1)`` tangential arrays."""
    if isinstance(g, BoundaryTrace):
        g(np.array([0.0]))  # build the interpolant
        spline = g._interp
        if hasattr(spline, "derivative"):
            dspline = spline.derivative()
            return (lambda yp: spline(yp[..., 0])), (lambda yp: dspline(yp[..., 0]))
        h = 1e-6

        def dlin(yp):
            return (g(yp[..., 0] + h) - g(yp[..., 0] - h)) / (2 * h)

        return (lambda yp: g(yp[..., 0])), dlin
    if callable(g):
        h = 1e-6

        def value(yp):
            return np.broadcast_to(np.asarray(g(yp), dtype=float), yp.shape[:-1])

        def deriv(yp):
            e = np.zeros(yp.shape[-1])
            e[0] = h
            return (value(yp + e) - value(yp - e)) / (2 * h)

        return value, deriv
    raise InvalidInputError("boundary datum must be a BoundaryTrace or a callable of y'")


@dataclass
class FiberExtension:
    """``E(g)(y) = g(y') chi(y_d / psi(y'))`` with ``chi = 0`` below 1/6 and ``= 1`` above 1/3."""

    value_fn: Callable
    deriv_fn: Callable
    cyl: CylNeighborhood
    lower: float = 1.0 / 6.0
    upper: float = 1.0 / 3.0

    def _chi(self, y):
        psi = self.cyl.psi(y[..., :-1])
        t = y[..., -1] / psi
        width = self.upper - self.lower
        s, ds = smoothstep((t - self.lower) / width)
        return psi, t, s, ds / width

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        _, _, chi, _ = self._chi(y)
        return self.value_fn(y[..., :-1]) * chi

    def gradient(self, y):
        y = np.asarray(y, dtype=float)
        yp = y[..., :-1]
        psi, t, chi, dchi = self._chi(y)
        gv = self.value_fn(yp)
        dpsi = self.cyl.domain.slope(yp)[..., 0]
        d1 = self.deriv_fn(yp) * chi + gv * dchi * (-t * dpsi / psi)
        d2 = gv * dchi / psi
        return np.stack([d1, d2], axis=-1)


def interior_extension_E(g, cyl: CylNeighborhood) -> FiberExtension:
    value, deriv = _datum(g)
    return FiberExtension(value, deriv, cyl)


@dataclass
class ExtensionResult:
    v: GridFunction
    trace_points: NDArray
    trace_residual: NDArray
    norms: dict
    boundary_norms: dict
    N_ext: float
    p: float
    resolution: int
    extra: dict = field(default_factory=dict)

    @property
    def trace_residual_sup(self) -> float:
        return float(np.max(self.trace_residual))

    def to_report(self) -> NormReport:
        rep = NormReport()
        grid = list(self.v.shape)
        for k, val in self.norms.items():
            rep.add(f"v_{k}", val, grid, "norm")
        for k, val in self.boundary_norms.items():
            rep.add(f"g_{k}", val, grid, "norm")
        rep.add("N_ext", self.N_ext, grid, "ratio")
        rep.add("trace_residual_sup", self.trace_residual_sup, grid, "check")
        for k, val in self.extra.items():
            rep.add(k, val, grid, "ratio")
        rep.metadata["p"] = self.p
        return rep


def _fiber_integrals(values, h, mask):
    """Cumulative Simpson integral along the last axis from node 0 (values beyond the mask ignored)."""
    vals = np.where(mask, values, 0.0)
    out = np.zeros_like(vals)
    out[..., 1:] = cumulative_simpson(vals, dx=h, axis=-1)
    return out


def extend_neumann(g, cyl: CylNeighborhood, regdist: RegDistField, p: float = 2.0, n: int = 33,
                   kernel_nodes: int = 17, trace_samples: int = 201, boundary_samples: int = 600,
                   trace_threshold: float | None = None, check_radius: bool = True) -> ExtensionResult:
    """Build ``v`` on ``Omega_R`` for the datum ``g`` and measure the extension constant.

    Parameters
    ----------
    g : BoundaryTrace or callable
        Boundary datum as a function of ``y'``.
    n : int
        Grid nodes across ``[-R, R]``; the vertical spacing matches.
    kernel_nodes : int
        Midpoint nodes per axis of the mollification kernel.
    trace_samples : int
        Boundary abscissae at which the Neumann trace residual is measured.
    """
    if cyl.dim != 2:
        raise InvalidInputError("the extension operator is implemented for d = 2")
    R, delta = cyl.R, cyl.delta
    if check_radius and not R < delta * cyl.domain.base_radius / 8.0:
        raise PreconditionError(f"R = {R} must be below delta * R0 / 8 = {delta * cyl.domain.base_radius / 8.0}")
    E = interior_extension_E(g, cyl)
    kernel = MollifierKernel.bump(2, kernel_nodes)
    field_ = MollifiedField(E, regdist, cyl, grad_g=E.gradient, kernel=kernel)

    # grid over Omega_R: y1 in [-R, R], y2 from 0 up to max psi
    h1 = 2 * R / (n - 1)
    top = cyl.psi_range[1]
    n2 = int(math.ceil(top / h1)) + 1
    h2 = top / (n2 - 1)
    y1 = -R + h1 * np.arange(n)
    y2 = h2 * np.arange(n2)
    Y = np.stack(np.meshgrid(y1, y2, indexing="ij"), axis=-1)
    psi_col = cyl.psi(y1[:, None])
    inside = Y[..., 1] < psi_col[:, None]
    inside[:, 0] = True
    # evaluate g~ and D g~ on every node up to the first node above the graph (needed by Simpson)
    last = np.argmax(~inside, axis=1)
    last = np.where(np.all(inside, axis=1), n2 - 1, last)
    need = np.arange(n2)[None, :] <= last[:, None]
    # nodes above the graph are integrated with the boundary value continued constantly
    pts = Y[need & inside]
    gt = np.zeros(Y.shape[:2])
    dgt = np.zeros(Y.shape)
    gt[need & inside] = field_.value(pts)
    dgt[need & inside] = field_.gradient(pts)
    yb = np.stack([y1, psi_col], axis=-1)
    gb_vals, gb_der = _datum(g)
    gbound = gb_vals(y1[:, None])
    outside_need = need & ~inside
    gt[outside_need] = np.broadcast_to(gbound[:, None], gt.shape)[outside_need]
    v = _fiber_integrals(gt, h2, need)
    d1v = _fiber_integrals(dgt[..., 0], h2, need)

    # Simpson weights at inside nodes touch at most the first node above the graph,
    # where g~ is continued by the boundary value.
    mask = inside & (np.abs(Y[..., 0]) < R + 1e-12)
    vg = GridFunction(np.where(mask, v, 0.0), (-R, 0.0), (h1, h2), mask)
    d11 = _first_diff(np.where(mask, d1v, 0.0), mask, 0, h1)
    dv = np.stack([d1v, gt], axis=-1)
    d2v = np.stack([np.stack([d11, dgt[..., 0]], -1), np.stack([dgt[..., 0], dgt[..., 1]], -1)], -2)
    norms = {
        "Lp": lp_norm(vg, p),
        "grad_Lp": lp_norm(vg.with_values(np.where(mask[..., None], dv, 0.0)), p),
        "hess_Lp": lp_norm(vg.with_values(np.where(mask[..., None, None], np.nan_to_num(d2v), 0.0)), p),
        "tangential_hess_Lp": lp_norm(vg.with_values(np.where(mask, np.nan_to_num(d11), 0.0)), p),
        "mixed_hess_Lp": lp_norm(vg.with_values(np.where(mask[..., None], dgt, 0.0)), p),
    }
    norms["W2p"] = (norms["Lp"] ** p + norms["grad_Lp"] ** p + norms["hess_Lp"] ** p) ** (1.0 / p)

    # Neumann trace residual: one-sided difference of v over the last interval below the graph
    ts = np.linspace(-R, R, trace_samples)
    psi_t = cyl.psi(ts[:, None])
    lo = psi_t - h2
    x, w = gauss_legendre(lo, psi_t, 3)
    tp = np.stack([np.broadcast_to(ts[:, None], x.shape), x], axis=-1)
    avg = np.sum(field_.value(tp) * w, axis=-1) / h2
    residual = np.abs(avg - gb_vals(ts[:, None]))
    scale = 1.0 + float(np.max(np.abs(gb_vals(ts[:, None]))))
    threshold = 0.05 * scale if trace_threshold is None else trace_threshold
    if float(np.max(residual)) > threshold:
        raise ExtensionFailureError(
            f"Neumann trace residual {float(np.max(residual)):.3g} exceeds {threshold:.3g}")

    # boundary norms on Gamma_3R
    trace = BoundaryTrace.from_function(lambda yp: gb_vals(yp), cyl.domain, -3 * R, 3 * R, boundary_samples)
    gl = lp_norm_trace(trace, p)
    gs = gagliardo_seminorm(trace, p) if p > 1 else 0.0
    denom = gs + R ** (-1.0 + 1.0 / p) * gl
    N_ext = norms["W2p"] / denom if denom > 0 else (0.0 if norms["W2p"] == 0 else math.inf)

    # lower-order and mixed-derivative comparisons against E(g) on Omega_2R
    h1b = h1
    yb1 = -2 * R + h1b * np.arange(int(round(4 * R / h1b)) + 1)
    yb2 = cyl.bottom(2) + h1b * np.arange(int(math.ceil((top - cyl.bottom(2)) / h1b)) + 1)
    YB = np.stack(np.meshgrid(yb1, yb2, indexing="ij"), axis=-1)
    mb = cyl.in_omega(YB, 2.0)
    EG = GridFunction(np.where(mb, E(YB), 0.0), (yb1[0], yb2[0]), (h1b, h1b), mb)
    DEG = EG.with_values(np.where(mb[..., None], E.gradient(YB), 0.0))
    e_lp, de_lp = lp_norm(EG, p), lp_norm(DEG, p)
    extra = {
        "lower_order_ratio": norms["Lp"] / (R / delta * e_lp) if e_lp > 0 else 0.0,
        "mixed_ratio": norms["mixed_hess_Lp"] / de_lp if de_lp > 0 else 0.0,
        "tangential_ratio": norms["tangential_hess_Lp"] / de_lp if de_lp > 0 else 0.0,
    }
    return ExtensionResult(
        v=vg,
        trace_points=yb,
        trace_residual=residual,
        norms=norms,
        boundary_norms={"Lp_Gamma3R": gl, "gagliardo_Gamma3R": gs},
        N_ext=float(N_ext),
        p=p,
        resolution=n,
        extra=extra,
    )
