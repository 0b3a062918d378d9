"""Regularized distance to the graph boundary.

For ``g(y) = psi(y') - y_d`` the regularized distance ``rho0`` is the unique
fixed point of

    tau -> G(y, tau) = int g(y - tau w / M) phi(w) dw,    M = 2 sqrt(4/delta^2 + 1),

which is a contraction with constant 1/2.  Since ``g`` is affine in ``y_d`` the
ball integral collapses to a ``(d-1)``-dimensional integral against the
marginal kernel, and all tau-derivatives are moved onto the kernel by
integration by parts so that only ``Dpsi`` is ever needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import (
    BoundarySingularityError,
    ContractionViolationError,
    ConvergenceError,
    InvalidInputError,
)
from .geometry import GraphDomain
from .quadrature import MollifierKernel

__all__ = [
    "RegDistField",
    "FixedPointInfo",
    "scale_constant",
    "mollified_graph_G",
    "regularized_distance",
    "grad_regdist",
    "hess_regdist",
    "signed_distance",
    "verify_regdist",
]


def scale_constant(delta: float) -> float:
    """``M = 2 (4/delta^2 + 1)^(1/2)``."""
    return 2.0 * math.sqrt(4.0 / delta ** 2 + 1.0)


@dataclass
class FixedPointInfo:
    iterations: int
    max_contraction: float
    residual: float


class RegDistField:
    """Regularized distance ``rho0`` of a graph domain with its first two derivatives.

    Parameters
    ----------
    domain : GraphDomain
    nodes : int
        Midpoint nodes per axis of the kernel quadrature.
    tol : float
        Relative stopping tolerance of the fixed-point iteration.
    max_iters : int
        Iteration budget; exceeding it raises :class:`ConvergenceError`.
    """

    def __init__(self, domain: GraphDomain, nodes: int = 33, tol: float = 1e-12,
                 max_iters: int = 80, kernel: MollifierKernel | None = None):
        self.domain = domain
        self.dim = domain.dim
        self.M = scale_constant(domain.delta)
        self.kernel = kernel if kernel is not None else MollifierKernel.bump(domain.dim, nodes)
        self.tol = tol
        self.max_iters = max_iters
        k = self.kernel
        w = k.marginal_nodes
        m = self.dim - 1
        self._w = w
        self._phi = k.marginal_weights
        self._dphi = k.marginal_grad_weights
        wdphi = np.sum(w * self._dphi, axis=-1)
        self._k_mixed = -m * self._phi - wdphi
        self._k_second = (m + 1) * self._phi + wdphi
        self.last_info: FixedPointInfo | None = None

    # helpers -----------------------------------------------------------------------
    def _points(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.dim:
            raise InvalidInputError(f"points must have {self.dim} coordinates")
        if not np.all(np.isfinite(y)):
            raise InvalidInputError("points must be finite")
        return y.reshape(-1, self.dim), y.shape[:-1]

    def _shifted(self, yp, s):
        # y' - s w' for every point and kernel node: (N, Q, d-1)
        pts = yp[:, None, :] - s[:, None, None] * self._w[None, :, :]
        self.domain.check_chart(pts)
        return pts

    def _F(self, yp, s):
        return self.domain.height(self._shifted(yp, s)) @ self._phi

    # public API --------------------------------------------------------------------
    def G(self, y, tau) -> NDArray:
        """Mollified graph function ``G(y, tau)`` (vectorised over points and tau)."""
        y = np.asarray(y, dtype=float)
        tau = np.broadcast_to(np.asarray(tau, dtype=float), y.shape[:-1])
        yf, shape = self._points(y)
        val = self._F(yf[:, :-1], tau.ravel() / self.M) - yf[:, -1]
        return val.reshape(shape)

    def G_tau(self, y, tau) -> NDArray:
        y = np.asarray(y, dtype=float)
        tau = np.broadcast_to(np.asarray(tau, dtype=float), y.shape[:-1])
        yf, shape = self._points(y)
        s = tau.ravel() / self.M
        ds = self.domain.slope(self._shifted(yf[:, :-1], s))
        Fs = -np.einsum("nqk,qk,q->n", ds, self._w, self._phi)
        return (Fs / self.M).reshape(shape)

    def value(self, y, return_info: bool = False):
        """Fixed point ``rho0(y)`` of ``tau -> G(y, tau)``."""
        yf, shape = self._points(y)
        yp, yd = yf[:, :-1], yf[:, -1]
        g = self.domain.height(yp) - yd
        scale = np.maximum(1.0, np.abs(g))
        tau = g.copy()
        active = np.ones(tau.shape, dtype=bool)
        prev_step = np.full(tau.shape, np.nan)
        max_ratio = 0.0
        noise = 1e3 * np.finfo(float).eps * scale
        it = 0
        while np.any(active):
            if it >= self.max_iters:
                raise ConvergenceError(
                    f"fixed point not reached after {self.max_iters} iterations at {int(active.sum())} points")
            idx = np.flatnonzero(active)
            new = self._F(yp[idx], tau[idx] / self.M) - yd[idx]
            step = np.abs(new - tau[idx])
            ps = prev_step[idx]
            ok = np.isfinite(ps) & (ps > noise[idx])
            if np.any(ok):
                max_ratio = max(max_ratio, float(np.max(step[ok] / ps[ok])))
            prev_step[idx] = step
            tau[idx] = new
            active[idx] = step >= self.tol * scale[idx]
            it += 1
        resid = float(np.max(np.abs(self._F(yp, tau / self.M) - yd - tau))) if tau.size else 0.0
        info = FixedPointInfo(iterations=it, max_contraction=max_ratio, residual=resid)
        self.last_info = info
        rho = tau.reshape(shape)
        return (rho, info) if return_info else rho

    def _first_order(self, yf, rho):
        yp = yf[:, :-1]
        s = rho / self.M
        ds = self.domain.slope(self._shifted(yp, s))
        Gi = np.einsum("nqk,q->nk", ds, self._phi)
        Gt = -np.einsum("nqk,qk,q->n", ds, self._w, self._phi) / self.M
        denom = 1.0 - Gt
        if np.any(denom < 0.5 - 1e-8):
            raise ContractionViolationError(
                f"1 - G_tau = {float(np.min(denom)):.6g} < 1/2; the domain violates the smallness condition")
        grad = np.concatenate([Gi, -np.ones((yf.shape[0], 1))], axis=1) / denom[:, None]
        return grad, ds, s, denom

    def grad(self, y) -> NDArray:
        """``D rho0 = (G_1, ..., G_{d-1}, -1) / (1 - G_tau)``."""
        yf, shape = self._points(y)
        rho = self.value(yf)
        grad, *_ = self._first_order(yf, rho)
        return grad.reshape(shape + (self.dim,))

    def evaluate(self, y, hessian: bool = True):
        """Return ``(rho0, D rho0, D^2 rho0)`` (the last is ``None`` unless requested)."""
        yf, shape = self._points(y)
        rho = self.value(yf)
        grad, ds, s, denom = self._first_order(yf, rho)
        hess = None
        if hessian:
            hess = self._hessian(yf, rho, grad, ds, s, denom).reshape(shape + (self.dim, self.dim))
        return rho.reshape(shape), grad.reshape(shape + (self.dim,)), hess

    def hess(self, y) -> NDArray:
        return self.evaluate(y, hessian=True)[2]

    def _hessian(self, yf, rho, grad, ds, s, denom):
        d, m = self.dim, self.dim - 1
        scale = np.maximum(1.0, np.abs(self.domain.height(yf[:, :-1])))
        if np.any(np.abs(rho) <= 1e-13 * scale):
            raise BoundarySingularityError("the Hessian of rho0 is undefined on the boundary")
        ds0 = self.domain.slope(yf[:, :-1])
        diff = ds - ds0[:, None, :]
        inv_s = 1.0 / s
        Fij = np.einsum("nqi,qj->nij", diff, self._dphi) * inv_s[:, None, None]
        Fis = np.einsum("nqi,q->ni", diff, self._k_mixed) * inv_s[:, None]
        Fss = np.einsum("nqk,qk,q->n", diff, self._w, self._k_second) * inv_s
        N = yf.shape[0]
        Gyy = np.zeros((N, d, d))
        Gyy[:, :m, :m] = 0.5 * (Fij + np.swapaxes(Fij, 1, 2))
        Gyt = np.zeros((N, d))
        Gyt[:, :m] = Fis / self.M
        Gtt = Fss / self.M ** 2
        H = (Gyy
             + Gyt[:, :, None] * grad[:, None, :]
             + grad[:, :, None] * Gyt[:, None, :]
             + Gtt[:, None, None] * grad[:, :, None] * grad[:, None, :])
        return H / denom[:, None, None]


def mollified_graph_G(field: RegDistField, y, tau) -> NDArray:
    return field.G(y, tau)


def regularized_distance(field: RegDistField, y) -> NDArray:
    return field.value(y)


def grad_regdist(field: RegDistField, y) -> NDArray:
    return field.grad(y)


def hess_regdist(field: RegDistField, y) -> NDArray:
    return field.hess(y)


def signed_distance(domain: GraphDomain, y, span: float, n: int = 4001) -> NDArray:
    """Brute-force signed distance to the graph (positive inside), for d = 2.

    The graph is sampled on ``[y1 - span, y1 + span]`` and the best sample is
    refined by golden-section search on the adjacent cells.
    """
    y = np.asarray(y, dtype=float)
    if domain.dim != 2:
        raise InvalidInputError("brute-force distance is implemented for d = 2")
    yf = y.reshape(-1, 2)
    out = np.empty(yf.shape[0])
    t = np.linspace(-span, span, n)
    h = t[1] - t[0]
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    for i, (a, b) in enumerate(yf):
        s = a + t
        d2 = (s - a) ** 2 + (domain.height(s[:, None]) - b) ** 2
        k = int(np.argmin(d2))
        lo, hi = s[k] - h, s[k] + h

        def f(x):
            return (x - a) ** 2 + (float(domain.height(np.array([[x]]))[0]) - b) ** 2

        c, e = hi - gr * (hi - lo), lo + gr * (hi - lo)
        fc, fe = f(c), f(e)
        for _ in range(60):
            if fc < fe:
                hi, e, fe = e, c, fc
                c = hi - gr * (hi - lo)
                fc = f(c)
            else:
                lo, c, fc = c, e, fe
                e = lo + gr * (hi - lo)
                fe = f(e)
        dist = math.sqrt(min(fc, fe, d2[k]))
        sign = 1.0 if b < float(domain.height(np.array([[a]]))[0]) else -1.0
        out[i] = sign * dist
    return out.reshape(y.shape[:-1])


def verify_regdist(field: RegDistField, points, contraction_tol: float = 1e-6,
                   oscillation_tol: float = 1e-3, span: float | None = None) -> "NormReport":
    """Check the fixed-point, sandwich, distance-comparability and oscillation bounds at ``points``.

    ``g = psi(y') - y_d``; the bounds are ``contraction <= 1/2``,
    ``2/3 <= rho0/g <= 2``, ``1/M <= rho0/d <= M`` against the brute-force
    distance ``d`` (d = 2) and ``|D rho0(y) - D rho0(z)| <= 12 eps0``.
    """
    from .report import NormReport

    pts = np.asarray(points, dtype=float).reshape(-1, field.dim)
    dom = field.domain
    g = dom.height(pts[:, :-1]) - pts[:, -1]
    if np.any(g <= 0):
        raise InvalidInputError("all points must lie strictly inside the domain")
    rho, info = field.value(pts, return_info=True)
    grad = field.grad(pts)
    sand = rho / g
    rep = NormReport()
    grid = {"points": int(pts.shape[0]), "kernel_nodes": int(field.kernel.n)}
    rep.add("contraction_max", info.max_contraction, grid, "check")
    rep.add("fixed_point_residual", info.residual, grid, "check")
    rep.add("sandwich_min", float(sand.min()), grid, "ratio")
    rep.add("sandwich_max", float(sand.max()), grid, "ratio")
    osc = 0.0
    for i in range(0, pts.shape[0], 512):
        diff = grad[i:i + 512, None, :] - grad[None, :, :]
        osc = max(osc, float(np.max(np.linalg.norm(diff, axis=-1))))
    rep.add("gradient_oscillation", osc, grid, "check")
    rep.add("oscillation_bound", 12.0 * dom.eps0, "analytic", "check")
    rep.add("M", field.M, "analytic", "check")
    checks = {
        "contraction": info.max_contraction <= 0.5 + contraction_tol,
        "sandwich": bool(sand.min() >= 2.0 / 3.0 and sand.max() <= 2.0),
        "oscillation": osc <= 12.0 * dom.eps0 + oscillation_tol,
    }
    if field.dim == 2:
        sp_ = float(np.max(g)) * 1.05 + 1e-9 if span is None else span
        d = signed_distance(dom, pts, sp_)
        ratio = rho / d
        rep.add("distance_ratio_min", float(ratio.min()), grid, "ratio")
        rep.add("distance_ratio_max", float(ratio.max()), grid, "ratio")
        checks["distance"] = bool(ratio.min() >= 1.0 / field.M and ratio.max() <= field.M)
    rep.metadata["checks"] = checks
    rep.metadata["pass"] = all(checks.values())
    for name, ok in checks.items():
        if not ok:
            rep.warn(f"regularized distance bound {name} violated")
    return rep
