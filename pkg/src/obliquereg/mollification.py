"""Regularized mollification with a distance-dependent radius.

    g~(y) = int g(y - rho0(y) w / M1) phi(w) dw,   M1 = max(3M/delta, 2 sup|D rho0|)

The averaging radius shrinks to zero on the boundary, so ``g~ = g`` there, while
``y -> y - rho0(y) w / M1`` has Jacobian determinant ``1 - w.D rho0 / M1 >= 1/2``.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

from .errors import ContainmentError, InvalidInputError
from .geometry import CylNeighborhood
from .norms import GridFunction, lp_norm
from .quadrature import MollifierKernel
from .regdist import RegDistField
from .report import NormReport

__all__ = [
    "MollifiedField",
    "mollify",
    "mollify_gradient",
    "TrigPolynomial",
    "cylinder_grid",
    "verify_young_bounds",
]


def _fd_gradient(g, h=1e-6):
    def grad(z):
        z = np.asarray(z, dtype=float)
        out = np.empty(z.shape)
        for k in range(z.shape[-1]):
            e = np.zeros(z.shape[-1])
            e[k] = h
            out[..., k] = (g(z + e) - g(z - e)) / (2 * h)
        return out

    return grad


def cylinder_grid(cyl: CylNeighborhood, k: float, n: int) -> GridFunction:
    """Node grid covering the bounding box of the nested cylinder ``Omega_kR`` (d = 2), with mask."""
    R = cyl.R
    lo2 = cyl.bottom(k)
    hi2 = cyl.psi_range[1] + 1e-12
    h1 = 2 * k * R / (n - 1)
    n2 = max(3, int(np.ceil((hi2 - lo2) / h1)) + 1)
    h2 = (hi2 - lo2) / (n2 - 1)
    origin = (-k * R, lo2)
    axes = [origin[0] + h1 * np.arange(n), origin[1] + h2 * np.arange(n2)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    mask = cyl.in_omega(pts, k)
    return GridFunction(np.zeros(mask.shape), origin, (h1, h2), mask)


class MollifiedField:
    """Evaluator for ``g~`` and ``D g~`` on a cylindrical neighbourhood.

    Parameters
    ----------
    g : callable
        Source function on ``Omega_2R``; maps ``(..., d)`` points to ``(...)``.
    regdist : RegDistField
        Regularized distance of ``cyl.domain``.
    cyl : CylNeighborhood
    grad_g : callable, optional
        Gradient of ``g``; central differences are used otherwise.
    M1 : float, optional
        Override of the scale; by default ``max(3M/delta, 2 * 1.05 * sup|D rho0|)``
        with the sup sampled on ``Omega_2R``.
    """

    def __init__(self, g: Callable, regdist: RegDistField, cyl: CylNeighborhood,
                 grad_g: Optional[Callable] = None, M1: float | None = None,
                 kernel: MollifierKernel | None = None, sup_samples: int = 41):
        self.g = g
        self.grad_g = grad_g if grad_g is not None else _fd_gradient(g)
        self.regdist = regdist
        self.cyl = cyl
        self.kernel = kernel if kernel is not None else regdist.kernel
        self.sup_grad = self._sample_sup_grad(sup_samples)
        default = max(3.0 * regdist.M / cyl.delta, 2.0 * 1.05 * self.sup_grad)
        self.M1 = float(default if M1 is None else M1)
        if self.M1 < 2.0 * self.sup_grad:
            raise InvalidInputError("M1 is below twice the sampled sup of |D rho0|")

    def _sample_sup_grad(self, n):
        if self.cyl.dim != 2:
            pts = np.random.default_rng(0).uniform(-1, 1, (400, self.cyl.dim))
            pts[:, :-1] *= 2 * self.cyl.R
            pts[:, -1] = self.cyl.bottom(2) + (pts[:, -1] + 1) / 2 * (self.cyl.psi_range[1] - self.cyl.bottom(2))
        else:
            grid = cylinder_grid(self.cyl, 2.0, n)
            pts = grid.points()[grid.mask]
        pts = pts[self.cyl.in_omega(pts, 2.0)]
        return float(np.max(np.linalg.norm(self.regdist.grad(pts), axis=-1)))

    # shifted points ------------------------------------------------------------------
    def _frame(self, y):
        y = np.asarray(y, dtype=float)
        yf = y.reshape(-1, self.cyl.dim)
        rho, grad, _ = self.regdist.evaluate(yf, hessian=False)
        z = yf[:, None, :] - (rho / self.M1)[:, None, None] * self.kernel.nodes[None, :, :]
        return y.shape[:-1], yf, rho, grad, z

    def containment_failures(self, z) -> int:
        cyl = self.cyl
        yp, yd = z[..., :-1], z[..., -1]
        inside = ((np.linalg.norm(yp, axis=-1) < 2 * cyl.R)
                  & (yd > cyl.bottom(2))
                  & (yd <= cyl.psi(yp) + 1e-12))
        return int(np.size(inside) - np.count_nonzero(inside))

    def _check(self, z):
        bad = self.containment_failures(z)
        if bad:
            raise ContainmentError(f"{bad} shifted quadrature points leave Omega_2R; M1 = {self.M1:.6g} is too small")

    def jacobian_min(self, y) -> float:
        """Smallest ``1 - w.D rho0(y)/M1`` over the points and all kernel nodes."""
        _, _, _, grad, _ = self._frame(y)
        det = 1.0 - (grad @ self.kernel.nodes.T) / self.M1
        return float(np.min(det))

    # evaluation ----------------------------------------------------------------------
    def value(self, y) -> NDArray:
        shape, yf, rho, grad, z = self._frame(y)
        self._check(z)
        vals = np.asarray(self.g(z), dtype=float) @ self.kernel.weights
        on_boundary = rho == 0.0
        if np.any(on_boundary):
            vals[on_boundary] = np.asarray(self.g(yf[on_boundary]), dtype=float)
        return vals.reshape(shape)

    def gradient(self, y) -> NDArray:
        shape, yf, rho, grad, z = self._frame(y)
        self._check(z)
        dg = np.asarray(self.grad_g(z), dtype=float)
        phi = self.kernel.weights
        w = self.kernel.nodes
        avg = np.einsum("nqk,q->nk", dg, phi)
        wdg = np.einsum("nqk,qk,q->n", dg, w, phi)
        out = avg - wdg[:, None] * grad / self.M1
        return out.reshape(shape + (self.cyl.dim,))


def mollify(field: MollifiedField, y) -> NDArray:
    return field.value(y)


def mollify_gradient(field: MollifiedField, y) -> NDArray:
    return field.gradient(y)


class TrigPolynomial:
    """``Re sum_{|m|<=deg, 0<=n<=deg} c_mn exp(i omega (m y1 + n y2))`` with complex coefficients."""

    def __init__(self, coef: NDArray, omega: float):
        self.coef = np.asarray(coef, dtype=complex)
        self.omega = float(omega)
        deg = self.coef.shape[1] - 1
        self.m = np.arange(-deg, deg + 1)
        self.n = np.arange(0, deg + 1)

    @classmethod
    def random(cls, rng: np.random.Generator, degree: int = 8, omega: float = 1.0) -> "TrigPolynomial":
        shape = (2 * degree + 1, degree + 1)
        coef = rng.uniform(-1, 1, shape) + 1j * rng.uniform(-1, 1, shape)
        return cls(coef, omega)

    def _parts(self, y):
        y = np.asarray(y, dtype=float)
        e1 = np.exp(1j * self.omega * y[..., 0, None] * self.m)
        e2 = np.exp(1j * self.omega * y[..., 1, None] * self.n)
        return e1, e2

    def __call__(self, y):
        e1, e2 = self._parts(y)
        return np.real(np.einsum("...m,mn,...n->...", e1, self.coef, e2))

    def gradient(self, y):
        e1, e2 = self._parts(y)
        iw = 1j * self.omega
        g1 = np.einsum("...m,mn,...n->...", e1 * (iw * self.m), self.coef, e2)
        g2 = np.einsum("...m,mn,...n->...", e1, self.coef, e2 * (iw * self.n))
        return np.real(np.stack([g1, g2], axis=-1))


def verify_young_bounds(regdist: RegDistField, cyl: CylNeighborhood, p: float, trials: int = 100,
                        seed: int = 0, degree: int = 8, n: int = 41, omega: float | None = None,
                        kernel: MollifierKernel | None = None) -> NormReport:
    """Max over random trigonometric ``g`` of the mollification norm ratios.

    ``lp_ratio_max`` is ``||g~||_{p,Omega_R} / ||g||_{p,Omega_2R}`` and
    ``w1p_ratio_max`` the analogue for gradients.  Both are expected to stay
    below ``2^(1/p)``.  Because ``g`` is linear in its coefficients, the
    mollified Fourier modes are precomputed once and shared by all trials.
    """
    if trials < 1:
        raise InvalidInputError("trials must be at least 1")
    if cyl.dim != 2:
        raise InvalidInputError("the Young-bound sweep is implemented for d = 2")
    omega = float(np.pi / (2 * cyl.R) if omega is None else omega)
    probe = TrigPolynomial(np.zeros((2 * degree + 1, degree + 1)), omega)
    field = MollifiedField(probe, regdist, cyl, grad_g=probe.gradient, kernel=kernel)
    inner = cylinder_grid(cyl, 1.0, n)
    outer = cylinder_grid(cyl, 2.0, 2 * n - 1)
    y_in = inner.points()[inner.mask]
    y_out = outer.points()[outer.mask]

    # mollified modes: K[y, m, n] = sum_q phi_q e1 e2 ; L[y, l, m, n] adds the factor w_l
    phi, w = field.kernel.weights, field.kernel.nodes
    K = np.empty((y_in.shape[0], probe.m.size, probe.n.size), dtype=complex)
    L = np.empty((y_in.shape[0], 2, probe.m.size, probe.n.size), dtype=complex)
    jac_min = np.inf
    fails = 0
    grads = np.empty((y_in.shape[0], 2))
    for start in range(0, y_in.shape[0], 64):
        _, _, rho, grad, z = field._frame(y_in[start:start + 64])
        fails += field.containment_failures(z)
        jac_min = min(jac_min, float(np.min(1.0 - grad @ w.T / field.M1)))
        e1, e2 = probe._parts(z)
        e1t = np.swapaxes(e1, 1, 2)
        K[start:start + 64] = np.matmul(e1t * phi, e2)
        for l in range(2):
            L[start:start + 64, l] = np.matmul(e1t * (phi * w[:, l]), e2)
        grads[start:start + 64] = grad
    e1o, e2o = probe._parts(y_out)
    iw = 1j * omega
    km = (iw * probe.m)[:, None]
    kn = (iw * probe.n)[None, :]
    rng = np.random.default_rng(seed)
    lp_max = w1p_max = 0.0
    for _ in range(trials):
        c = TrigPolynomial.random(rng, degree, omega).coef
        gt = np.real(np.einsum("bmn,mn->b", K, c))
        d1 = np.einsum("bmn,mn->b", K, c * km)
        d2 = np.einsum("bmn,mn->b", K, c * kn)
        wdg = np.einsum("bmn,mn->b", L[:, 0], c * km) + np.einsum("bmn,mn->b", L[:, 1], c * kn)
        dgt = np.real(np.stack([d1, d2], axis=-1) - wdg[:, None] * grads / field.M1)
        g_out = np.real(np.einsum("bm,mn,bn->b", e1o, c, e2o))
        dg_out = np.real(np.stack([np.einsum("bm,mn,bn->b", e1o * (iw * probe.m), c, e2o),
                                   np.einsum("bm,mn,bn->b", e1o, c, e2o * (iw * probe.n))], axis=-1))
        num = _masked_norm(inner, gt, p)
        den = _masked_norm(outer, g_out, p)
        dnum = _masked_norm(inner, np.linalg.norm(dgt, axis=-1), p)
        dden = _masked_norm(outer, np.linalg.norm(dg_out, axis=-1), p)
        lp_max = max(lp_max, num / den)
        w1p_max = max(w1p_max, dnum / dden)
    rep = NormReport()
    grid = {"inner": list(inner.shape), "outer": list(outer.shape), "kernel_nodes": field.kernel.n}
    rep.add("lp_ratio_max", lp_max, grid, "ratio")
    rep.add("w1p_ratio_max", w1p_max, grid, "ratio")
    rep.add("young_bound", 2.0 ** (1.0 / p), "analytic", "ratio")
    rep.add("jacobian_min", jac_min, grid, "check")
    rep.add("containment_failures", fails, grid, "count")
    rep.add("M1", field.M1, grid, "check")
    rep.metadata.update({"seed": seed, "trials": trials, "degree": degree, "omega": omega, "p": p})
    if fails:
        rep.warn("shifted quadrature points left Omega_2R")
    return rep


def _masked_norm(grid: GridFunction, vals, p):
    full = np.zeros(grid.shape)
    full[grid.mask] = vals
    return lp_norm(grid.with_values(full), p)
