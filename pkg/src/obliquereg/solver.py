"""Finite-difference solver for ``Lu = f`` with an oblique derivative condition (d = 2).

The cylinder ``Omega_R`` is flattened by ``z = (y1, rho0(y))`` so that the
curved boundary becomes ``z2 = 0``.  With ``J = dz/dy``,

    a_ij D_ij u = (J a J^T)_kl D_kl u~ + (a_ij D_ij rho0) D_z2 u~,

and the second term (the coupling) is kept separate: it is singular like
``eps0 / z2`` and is either iterated on the right-hand side (Picard) or folded
into the matrix (monolithic).  The sides and the far end of the rectangle
carry Dirichlet data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray
from scipy.interpolate import PchipInterpolator, RegularGridInterpolator

from .errors import (
    BoundarySingularityError,
    FlatteningError,
    InvalidInputError,
    PreconditionError,
    SolverError,
)
from .geometry import (
    CylNeighborhood,
    ObliqueField,
    boundary_points,
    check_obliqueness,
    lipschitz_constant,
)
from .norms import (
    BoundaryTrace,
    GridFunction,
    bmo_seminorm,
    gagliardo_seminorm,
    grid_gradient,
    grid_hessian,
    holder_seminorm,
    lp_norm,
    lp_norm_trace,
)
from .regdist import RegDistField
from .report import NormReport

__all__ = [
    "EllipticOperator",
    "RegDistMap",
    "ShearMap",
    "FlattenedProblem",
    "SparseSystem",
    "ObliqueSolution",
    "flatten",
    "assemble",
    "solve_sparse",
    "solve_oblique",
    "manufactured",
    "probe_model_problem",
    "probe_main_estimate",
]


def _const_field(value, shape_tail=()):
    v = np.asarray(value, dtype=float)

    def fn(x):
        return np.broadcast_to(v, np.shape(x)[:-1] + shape_tail).copy()

    return fn


@dataclass
class EllipticOperator:
    """``L u = a_ij D_ij u + a_i D_i u + a0 u`` with callables of ``(..., 2)`` points."""

    a: Callable
    drift: Callable = field(default_factory=lambda: _const_field([0.0, 0.0], (2,)))
    a0: Callable = field(default_factory=lambda: _const_field(0.0))
    nu: float = 1.0
    name: str = "custom"

    def __post_init__(self):
        if not (0 < self.nu <= 1):
            raise InvalidInputError("nu must lie in (0, 1]")

    @classmethod
    def laplacian(cls) -> "EllipticOperator":
        return cls(a=_const_field(np.eye(2), (2, 2)), nu=1.0, name="laplacian")

    @classmethod
    def constant(cls, matrix, drift=(0.0, 0.0), a0: float = 0.0, nu: float | None = None) -> "EllipticOperator":
        A = np.asarray(matrix, dtype=float)
        if A.shape != (2, 2) or not np.allclose(A, A.T):
            raise InvalidInputError("the coefficient matrix must be symmetric 2x2")
        eig = np.linalg.eigvalsh(A)
        if nu is None:
            nu = float(min(eig[0], 1.0 / eig[1], 1.0))
        return cls(a=_const_field(A, (2, 2)), drift=_const_field(drift, (2,)), a0=_const_field(a0),
                   nu=nu, name="constant")

    def check_ellipticity(self, points) -> dict:
        """Eigenvalue bounds of ``a`` at the sampled points against ``[nu, 1/nu]``."""
        A = np.asarray(self.a(np.asarray(points, dtype=float)), dtype=float).reshape(-1, 2, 2)
        if not np.allclose(A, np.swapaxes(A, 1, 2)):
            raise InvalidInputError("a_ij is not symmetric")
        eig = np.linalg.eigvalsh(A)
        lo, hi = float(eig[:, 0].min()), float(eig[:, 1].max())
        tol = 1e-12
        return {"min_eig": lo, "max_eig": hi,
                "pass": bool(lo >= self.nu - tol and hi <= 1.0 / self.nu + tol)}


# ----------------------------------------------------------------------------------
# flattening maps


class RegDistMap:
    """``z2 = rho0(y)``, inverted column by column (monotone interpolation, then Newton)."""

    name = "regdist"

    def __init__(self, regdist: RegDistField, cyl: CylNeighborhood, samples: int | None = None):
        self.regdist = regdist
        self.cyl = cyl
        self.samples = samples

    def transverse(self, y, hessian: bool = True):
        return self.regdist.evaluate(y, hessian=hessian)

    def height(self, z1) -> float:
        base = np.stack([z1, np.full_like(z1, self.cyl.bottom(1.0))], axis=-1)
        return float(np.min(self.regdist.value(base)))

    def invert(self, z1, z2) -> NDArray:
        n1, n2 = z1.size, z2.size
        m = self.samples or max(8 * n2, 200)
        lo = self.cyl.bottom(1.0)
        top = self.cyl.psi(z1[:, None])
        t = np.linspace(0.0, 1.0, m)
        ys = lo + (top[:, None] - lo) * t[None, :]
        pts = np.stack([np.broadcast_to(z1[:, None], ys.shape), ys], axis=-1)
        rho = self.regdist.value(pts.reshape(-1, 2)).reshape(n1, m)
        if np.any(np.diff(rho, axis=1) >= 0):
            raise FlatteningError("rho0 is not strictly decreasing along a vertical fibre")
        y2 = np.empty((n1, n2))
        for i in range(n1):
            inv = PchipInterpolator(rho[i, ::-1], ys[i, ::-1])
            y2[i] = inv(z2)
        for _ in range(3):
            P = np.stack([np.broadcast_to(z1[:, None], y2.shape), y2], axis=-1).reshape(-1, 2)
            r, g, _ = self.regdist.evaluate(P, hessian=False)
            step = (r - np.broadcast_to(z2, y2.shape).ravel()) / g[:, 1]
            y2 = y2 - step.reshape(y2.shape)
        y2[:, 0] = top
        return y2


class ShearMap:
    """Vertical shear ``z2 = psi(y1) - y2`` (needs a twice differentiable ``psi``)."""

    name = "shear"

    def __init__(self, cyl: CylNeighborhood):
        self.cyl = cyl
        self.domain = cyl.domain

    def transverse(self, y, hessian: bool = True):
        y = np.asarray(y, dtype=float)
        yp = y[..., :1]
        z2 = self.domain.height(yp) - y[..., 1]
        dpsi = self.domain.slope(yp)[..., 0]
        grad = np.stack([dpsi, -np.ones_like(dpsi)], axis=-1)
        hess = None
        if hessian:
            hess = np.zeros(y.shape + (2,))
            hess[..., 0, 0] = self.domain.curvature(yp)[..., 0, 0]
        return z2, grad, hess

    def height(self, z1) -> float:
        return float(np.min(self.cyl.psi(z1[:, None]))) - self.cyl.bottom(1.0)

    def invert(self, z1, z2) -> NDArray:
        return self.cyl.psi(z1[:, None])[:, None] - z2[None, :]


# ----------------------------------------------------------------------------------
# flattened problem


@dataclass
class FlattenedProblem:
    """Coefficients of the flattened operator on the rectangle ``(-R, R) x (0, H)``.

    ``coupling`` is ``a_ij D_ij z2`` and multiplies ``D_z2 u~``; it is not part
    of ``a_tilde``.  ``jacobian`` is ``J = dz/dy`` at every node and ``y`` the
    node positions in the original coordinates.
    """

    z1: NDArray
    z2: NDArray
    y: NDArray
    jacobian: NDArray
    map_hessian: NDArray
    a_tilde: NDArray
    drift_tilde: NDArray
    a0: NDArray
    coupling: NDArray
    nu: float
    map_name: str
    cyl: CylNeighborhood

    @property
    def shape(self) -> tuple:
        return (self.z1.size, self.z2.size)

    @property
    def spacing(self) -> tuple:
        return (float(self.z1[1] - self.z1[0]), float(self.z2[1] - self.z2[0]))

    @property
    def height(self) -> float:
        return float(self.z2[-1])

    @property
    def volume_factor(self) -> NDArray:
        """``|det dy/dz| = 1 / |D_2 z2|``."""
        return 1.0 / np.abs(self.jacobian[..., 1, 1])

    def ellipticity(self) -> dict:
        eig = np.linalg.eigvalsh(self.a_tilde.reshape(-1, 2, 2))
        lo, hi = float(eig[:, 0].min()), float(eig[:, 1].max())
        nu_t = min(lo, 1.0 / hi)
        return {"min_eig": lo, "max_eig": hi, "nu_tilde": nu_t, "conditioning": nu_t / self.nu}

    def grid(self, values=None) -> GridFunction:
        vals = np.zeros(self.shape) if values is None else values
        h1, h2 = self.spacing
        w = np.full(self.shape, h1 * h2)
        w[[0, -1], :] *= 0.5
        w[:, [0, -1]] *= 0.5
        return GridFunction(vals, (self.z1[0], 0.0), (h1, h2), weights=w)


def flatten(operator: EllipticOperator, cyl: CylNeighborhood, regdist: RegDistField | None = None,
            n: int = 65, n2: int | None = None, transform: str = "regdist") -> FlattenedProblem:
    """Flatten ``Omega_R`` onto a rectangle with ``n x n2`` nodes."""
    if cyl.dim != 2:
        raise InvalidInputError("the solver is implemented for d = 2")
    if n < 5:
        raise InvalidInputError("at least 5 nodes per direction are required")
    n2 = n if n2 is None else n2
    if transform == "regdist":
        tmap = RegDistMap(regdist if regdist is not None else RegDistField(cyl.domain), cyl)
    elif transform == "shear":
        tmap = ShearMap(cyl)
    else:
        raise InvalidInputError(f"unknown transform {transform!r}")
    R = cyl.R
    z1 = np.linspace(-R, R, n)
    H = tmap.height(z1)
    if not H > 0:
        raise FlatteningError("the flattened rectangle has no height")
    z2 = np.linspace(0.0, H, n2)
    y2 = tmap.invert(z1, z2)
    Y = np.stack([np.broadcast_to(z1[:, None], y2.shape), y2], axis=-1)
    if np.any(np.diff(y2, axis=1) >= 0):
        raise FlatteningError("the inverted fibres are not monotone; refine the sampling")
    _, grad, _ = tmap.transverse(Y, hessian=False)
    hess = np.empty(Y.shape + (2,))
    try:
        hess[:, 1:] = tmap.transverse(Y[:, 1:], hessian=True)[2]
    except BoundarySingularityError as exc:
        raise FlatteningError("the first interior row touches the boundary; refine the grid") from exc
    # the Hessian of rho0 is singular on the boundary; the boundary row borrows row 1
    if transform == "regdist":
        hess[:, 0] = hess[:, 1]
    else:
        hess[:, 0] = tmap.transverse(Y[:, 0], hessian=True)[2]
    J = np.zeros(Y.shape + (2,))
    J[..., 0, 0] = 1.0
    J[..., 1, :] = grad
    A = np.asarray(operator.a(Y), dtype=float)
    At = np.einsum("...ik,...kl,...jl->...ij", J, A, J)
    drift = np.einsum("...ik,...k->...i", J, np.asarray(operator.drift(Y), dtype=float))
    kappa = np.einsum("...ij,...ij->...", A, hess)
    return FlattenedProblem(z1=z1, z2=z2, y=Y, jacobian=J, map_hessian=hess, a_tilde=At, drift_tilde=drift,
                            a0=np.asarray(operator.a0(Y), dtype=float), coupling=kappa, nu=operator.nu,
                            map_name=tmap.name, cyl=cyl)


# ----------------------------------------------------------------------------------
# assembly and linear solve


@dataclass
class SparseSystem:
    """CSR matrix with lexicographic ordering ``k = i * n2 + j`` over the node grid."""

    matrix: sp.csr_matrix
    rhs: NDArray
    shape: tuple
    method: str = "auto"
    rtol: float = 1e-10
    maxiter: int = 4000
    interior: Optional[NDArray] = None

    def with_rhs(self, rhs) -> "SparseSystem":
        return SparseSystem(self.matrix, rhs, self.shape, self.method, self.rtol, self.maxiter, self.interior)


def assemble(prob: FlattenedProblem, bvec: NDArray, b0: NDArray, g: NDArray, f: NDArray,
             dirichlet: NDArray, coupling_in_matrix: bool = False, bc_order: int = 2) -> SparseSystem:
    """Nine-point interior stencil, oblique rows on ``z2 = 0`` and Dirichlet rows elsewhere.

    ``bvec`` holds the flattened field ``J b`` along the boundary row.
    """
    if bc_order not in (1, 2):
        raise InvalidInputError("bc_order must be 1 or 2")
    n1, n2 = prob.shape
    h1, h2 = prob.spacing
    idx = np.arange(n1 * n2).reshape(n1, n2)
    rows, cols, vals = [], [], []

    def put(r, c, v):
        r, c, v = np.broadcast_arrays(r, c, v)
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(v.ravel())

    I = (slice(1, -1), slice(1, -1))
    a11, a12, a22 = (prob.a_tilde[I + (i, j)] for i, j in ((0, 0), (0, 1), (1, 1)))
    d1, d2 = prob.drift_tilde[I + (0,)], prob.drift_tilde[I + (1,)]
    if coupling_in_matrix:
        d2 = d2 + prob.coupling[I]
    c = idx[I]

    def nb(di, dj):
        return idx[1 + di:n1 - 1 + di, 1 + dj:n2 - 1 + dj]

    put(c, c, -2 * a11 / h1 ** 2 - 2 * a22 / h2 ** 2 + prob.a0[I])
    put(c, nb(1, 0), a11 / h1 ** 2 + d1 / (2 * h1))
    put(c, nb(-1, 0), a11 / h1 ** 2 - d1 / (2 * h1))
    put(c, nb(0, 1), a22 / h2 ** 2 + d2 / (2 * h2))
    put(c, nb(0, -1), a22 / h2 ** 2 - d2 / (2 * h2))
    cross = a12 / (2 * h1 * h2)
    put(c, nb(1, 1), cross)
    put(c, nb(-1, -1), cross)
    put(c, nb(1, -1), -cross)
    put(c, nb(-1, 1), -cross)

    # oblique rows
    ib = idx[1:-1, 0]
    b1, b2 = bvec[1:-1, 0], bvec[1:-1, 1]
    put(ib, idx[2:, 0], b1 / (2 * h1))
    put(ib, idx[:-2, 0], -b1 / (2 * h1))
    if bc_order == 2:
        put(ib, ib, -3 * b2 / (2 * h2) + b0[1:-1])
        put(ib, idx[1:-1, 1], 4 * b2 / (2 * h2))
        put(ib, idx[1:-1, 2], -b2 / (2 * h2))
    else:
        put(ib, ib, -b2 / h2 + b0[1:-1])
        put(ib, idx[1:-1, 1], b2 / h2)

    # Dirichlet rows
    dmask = np.zeros((n1, n2), dtype=bool)
    dmask[[0, -1], :] = True
    dmask[:, -1] = True
    put(idx[dmask], idx[dmask], 1.0)

    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n1 * n2, n1 * n2))
    rhs = np.zeros((n1, n2))
    rhs[I] = f[I]
    rhs[1:-1, 0] = g[1:-1]
    rhs[dmask] = dirichlet[dmask]
    interior = np.zeros((n1, n2), dtype=bool)
    interior[I] = True
    return SparseSystem(A, rhs.ravel(), (n1, n2), interior=interior)


class _LinearSolver:
    """BiCGSTAB with Jacobi preconditioning; a sparse LU takes over after stagnation on small grids."""

    direct_limit = 129 * 129

    def __init__(self, system: SparseSystem):
        self.A = system.matrix.tocsr()
        self.system = system
        diag = self.A.diagonal()
        if np.any(diag == 0):
            raise SolverError("zero on the diagonal; the stencil is degenerate", [])
        self.M = sp.diags(1.0 / diag)
        self.lu = None
        self.method = system.method
        if self.method == "direct":
            self._factor()

    def _factor(self):
        if self.lu is None:
            self.lu = spla.splu(self.A.tocsc())

    def __call__(self, rhs, x0=None):
        nb = float(np.linalg.norm(rhs)) or 1.0
        history = []
        if self.lu is None and self.method in ("auto", "bicgstab"):
            def cb(xk):
                history.append(float(np.linalg.norm(rhs - self.A @ xk)) / nb)

            x, info = spla.bicgstab(self.A, rhs, x0=x0, rtol=self.system.rtol, atol=0.0,
                                    maxiter=self.system.maxiter, M=self.M, callback=cb)
            res = float(np.linalg.norm(rhs - self.A @ x)) / nb
            if info == 0 and res <= 10 * self.system.rtol:
                return x, {"method": "bicgstab", "iterations": len(history), "residual_history": history}
            if self.method == "bicgstab" or self.A.shape[0] > self.direct_limit:
                raise SolverError(f"BiCGSTAB stagnated at relative residual {res:.3g}", history)
        self._factor()
        x = self.lu.solve(rhs)
        res = float(np.linalg.norm(rhs - self.A @ x)) / nb
        history.append(res)
        if not res <= max(self.system.rtol, 1e-9):
            raise SolverError(f"direct solve left relative residual {res:.3g}", history)
        return x, {"method": "direct", "iterations": 1, "residual_history": history}


def solve_sparse(system: SparseSystem, x0=None):
    """Solve ``system`` and return ``(x, info)`` with the residual history."""
    return _LinearSolver(system)(system.rhs, x0)


# ----------------------------------------------------------------------------------
# solution


@dataclass
class ObliqueSolution:
    """Nodal solution on the flattened rectangle with derivatives mapped back to ``y``."""

    values: NDArray
    problem: FlattenedProblem
    status: str
    picard_changes: list
    linear_info: list

    @property
    def y(self) -> NDArray:
        return self.problem.y

    @property
    def picard_iterations(self) -> int:
        return len(self.picard_changes)

    def grid_z(self) -> GridFunction:
        return self.problem.grid(self.values)

    def grad_z(self) -> NDArray:
        return grid_gradient(self.grid_z())

    def hess_z(self) -> NDArray:
        return grid_hessian(self.grid_z())

    def grad_y(self) -> NDArray:
        return np.einsum("...ik,...i->...k", self.problem.jacobian, self.grad_z())

    def hess_y(self) -> NDArray:
        J = self.problem.jacobian
        gz = self.grad_z()
        Hz = grid_hessian(self.grid_z(), gz)
        return np.einsum("...ik,...ij,...jl->...kl", J, Hz, J) + gz[..., 1, None, None] * self.problem.map_hessian

    def y_grid(self, values) -> GridFunction:
        """Grid function with ``y``-volume weights (trapezoid in ``z`` times ``|det dy/dz|``)."""
        base = self.problem.grid(values)
        return GridFunction(values, base.origin, base.spacing,
                            weights=base.cell_weights() * self.problem.volume_factor)

    def region_mask(self, k: float = 1.0) -> NDArray:
        """Nodes in ``Omega_kR`` (boundary row included)."""
        cyl = self.problem.cyl
        Y = self.y
        m = cyl.in_omega(Y, k)
        m[:, 0] = np.abs(Y[:, 0, 0]) < k * cyl.R
        return m

    def lp_y(self, values, p: float, k: float = 1.0) -> float:
        return lp_norm(self.y_grid(values), p, self.region_mask(k))

    def interpolate(self, z_points) -> NDArray:
        """Cubic interpolation of the nodal values at points given in ``z`` coordinates."""
        interp = RegularGridInterpolator((self.problem.z1, self.problem.z2), self.values, method="cubic")
        return interp(z_points)


def _as_nodal(fn, Y, default=0.0):
    if fn is None:
        return np.full(Y.shape[:-1], default)
    if callable(fn):
        return np.broadcast_to(np.asarray(fn(Y), dtype=float), Y.shape[:-1]).copy()
    return np.broadcast_to(np.asarray(fn, dtype=float), Y.shape[:-1]).copy()


def _dz2_central(u, h2):
    out = np.zeros_like(u)
    out[:, 1:-1] = (u[:, 2:] - u[:, :-2]) / (2 * h2)
    return out


def _hess_change(prob, new, old, p):
    g = prob.grid(new - old)
    num = lp_norm(g.with_values(np.nan_to_num(grid_hessian(g))), p)
    den = lp_norm(g.with_values(np.nan_to_num(grid_hessian(prob.grid(new)))), p)
    return num / den if den > 0 else num


def solve_oblique(operator: EllipticOperator, bc: ObliqueField, g, cyl: CylNeighborhood, n: int = 65,
                  f=None, dirichlet=None, regdist: RegDistField | None = None, transform: str = "regdist",
                  coupling: str = "picard", bc_order: int = 2, method: str = "auto",
                  picard_tol: float = 1e-8, max_picard: int = 60, check: bool = True,
                  problem: FlattenedProblem | None = None) -> ObliqueSolution:
    """Solve ``Lu = f`` in ``Omega_R``, ``b.Du + b0 u = g`` on ``Gamma_R``, ``u = dirichlet`` elsewhere.

    ``f``, ``g`` and ``dirichlet`` are callables of ``y`` points (or constants).
    With ``coupling='picard'`` the singular coupling term is lagged and the loop
    stops when the relative change of ``D^2_z u~`` falls below ``picard_tol``;
    a growing change is reported as ``status = 'smallness violated'``.
    """
    if coupling not in ("picard", "monolithic"):
        raise InvalidInputError("coupling must be 'picard' or 'monolithic'")
    prob = problem if problem is not None else flatten(operator, cyl, regdist, n, transform=transform)
    Y = prob.y
    yb = Y[:, 0]
    if check:
        grid = np.linspace(-cyl.R, cyl.R, 201)
        obl = check_obliqueness(cyl.domain, bc, grid)
        if not obl["pass_abs"]:
            raise PreconditionError(f"obliqueness fails: min |b.n|/|b| = {obl['min_abs_ratio']:.4g}")
        ell = operator.check_ellipticity(Y)
        if not ell["pass"]:
            raise PreconditionError(f"ellipticity fails: eigenvalues in [{ell['min_eig']:.4g}, {ell['max_eig']:.4g}]")
        if np.any(prob.a0 > 1e-14):
            raise PreconditionError("a0 must be non-positive")
        if np.any(np.asarray(bc.b0(yb)) < -1e-14):
            raise PreconditionError("b0 must be non-negative")
    bvec = np.einsum("...ik,...k->...i", prob.jacobian[:, 0], np.asarray(bc.b(yb), dtype=float))
    b0 = np.broadcast_to(np.asarray(bc.b0(yb), dtype=float), yb.shape[:-1])
    gv = _as_nodal(g, yb)
    fv = _as_nodal(f, Y)
    dv = _as_nodal(dirichlet, Y)
    system = assemble(prob, bvec, b0, gv, fv, dv, coupling_in_matrix=(coupling == "monolithic"), bc_order=bc_order)
    system.method = method
    solver = _LinearSolver(system)
    u, info = solver(system.rhs)
    infos = [info]
    u = u.reshape(prob.shape)
    changes = []
    status = "converged"
    h2 = prob.spacing[1]
    if coupling == "picard" and np.any(prob.coupling[1:-1, 1:-1] != 0):
        status = "smallness violated"
        for _ in range(max_picard):
            rhs = system.rhs.reshape(prob.shape).copy()
            rhs[1:-1, 1:-1] = fv[1:-1, 1:-1] - prob.coupling[1:-1, 1:-1] * _dz2_central(u, h2)[1:-1, 1:-1]
            new, info = solver(rhs.ravel(), x0=u.ravel())
            infos.append(info)
            new = new.reshape(prob.shape)
            change = _hess_change(prob, new, u, 2.0)
            changes.append(change)
            u = new
            if change < picard_tol:
                status = "converged"
                break
            if not np.isfinite(change) or (len(changes) >= 4 and changes[-1] > changes[-2] > changes[-3]
                                           and changes[-1] > 1e-3):
                break
    return ObliqueSolution(values=u, problem=prob, status=status, picard_changes=changes, linear_info=infos)


# ----------------------------------------------------------------------------------
# manufactured solutions


def _sin_cosh(Y):
    x, y = Y[..., 0], Y[..., 1]
    u = np.sin(x) * np.cosh(y)
    du = np.stack([np.cos(x) * np.cosh(y), np.sin(x) * np.sinh(y)], axis=-1)
    d2 = np.empty(Y.shape + (2,))
    d2[..., 0, 0] = -u
    d2[..., 1, 1] = u
    d2[..., 0, 1] = d2[..., 1, 0] = np.cos(x) * np.sinh(y)
    return u, du, d2


def _quadratic(Y):
    x, y = Y[..., 0], Y[..., 1]
    d2 = np.zeros(Y.shape + (2,))
    d2[..., 0, 0] = d2[..., 1, 1] = 2.0
    return x * x + y * y, 2.0 * Y, d2


_MANUFACTURED = {"sin_cosh": _sin_cosh, "quadratic": _quadratic}


def manufactured(name: str, operator: EllipticOperator, bc: ObliqueField):
    """``(exact, f, g)`` callables for a named exact solution: ``f = L u*``, ``g = b.Du* + b0 u*``."""
    try:
        fields = _MANUFACTURED[name]
    except KeyError:
        raise InvalidInputError(f"unknown manufactured solution {name!r}; choose from {sorted(_MANUFACTURED)}")

    def exact(Y):
        return fields(np.asarray(Y, dtype=float))[0]

    def f(Y):
        u, du, d2 = fields(np.asarray(Y, dtype=float))
        A = np.asarray(operator.a(Y), dtype=float)
        return (np.einsum("...ij,...ij->...", A, d2) + np.sum(np.asarray(operator.drift(Y)) * du, axis=-1)
                + np.asarray(operator.a0(Y)) * u)

    def g(Y):
        u, du, _ = fields(np.asarray(Y, dtype=float))
        return np.sum(np.asarray(bc.b(Y), dtype=float) * du, axis=-1) + np.asarray(bc.b0(Y)) * u

    return exact, f, g


# ----------------------------------------------------------------------------------
# probes


def _boundary_trace(sol: ObliqueSolution, values, samples: int | None = None) -> BoundaryTrace:
    prob = sol.problem
    z1 = prob.z1
    interp = PchipInterpolator(z1, values)
    R = prob.cyl.R
    return BoundaryTrace.from_function(lambda yp: interp(yp[..., 0]), prob.cyl.domain, -R, R,
                                       samples or (z1.size - 1))


def _fractional_norm(trace: BoundaryTrace, p: float) -> dict:
    lp = lp_norm_trace(trace, p)
    semi = gagliardo_seminorm(trace, p) if p > 1 else 0.0
    return {"Lp": lp, "seminorm": semi, "W": (lp ** p + semi ** p) ** (1.0 / p)}


def probe_model_problem(cyl: CylNeighborhood, operator: EllipticOperator | None = None, f=1.0,
                        r: float | None = None, p: float = 2.0, n: int = 65,
                        regdist: RegDistField | None = None, coupling: str = "picard",
                        problem: FlattenedProblem | None = None) -> NormReport:
    """Solve the model problem ``Lu = f``, ``D_2 u = 0`` on ``Gamma_R``, ``u = 0`` elsewhere.

    Reports ``ratio = ||D^2 u||_{p, Omega_r/2} / (r^-2 ||u||_{p, Omega_r} + ||f||_{p, Omega_r})``,
    the Hardy term ``||z2^-1 D_z2 u~||_p / ||D^2_z u~||_p`` and the coupling term
    ``||(a_ij D_ij rho0) D_z2 u~||_p / ||D^2_z u~||_p`` (both over the flattened ``Omega_r``).
    """
    operator = operator if operator is not None else EllipticOperator.laplacian()
    r = cyl.R if r is None else float(r)
    if not 0 < r <= cyl.R:
        raise InvalidInputError("r must lie in (0, R]")
    bc = ObliqueField.constant([0.0, 1.0])
    sol = solve_oblique(operator, bc, 0.0, cyl, n=n, f=f, dirichlet=0.0, regdist=regdist, coupling=coupling,
                        check=False, problem=problem)
    prob = sol.problem
    k = r / cyl.R
    fv = _as_nodal(f, prob.y)
    d2y = sol.hess_y()
    num = sol.lp_y(d2y, p, 0.5 * k)
    u_lp = sol.lp_y(sol.values, p, k)
    f_lp = sol.lp_y(fv, p, k)
    den = u_lp / r ** 2 + f_lp
    ratio = num / den if den > 0 else 0.0

    gz = sol.grad_z()
    hz = sol.hess_z()
    zg = prob.grid(sol.values)
    mask = sol.region_mask(k)
    mask[:, 0] = False
    z2 = prob.z2[None, :]
    hardy_field = np.where(mask, gz[..., 1] / np.where(z2 > 0, z2, 1.0), 0.0)
    d2z = lp_norm(zg.with_values(np.nan_to_num(hz)), p, mask)
    hardy = lp_norm(zg.with_values(hardy_field), p, mask)
    coup = lp_norm(zg.with_values(np.where(mask, prob.coupling * gz[..., 1], 0.0)), p, mask)
    rep = NormReport()
    grid = list(prob.shape)
    rep.add("ratio", ratio, grid, "ratio")
    rep.add("D2u_Lp_half", num, grid, "norm")
    rep.add("u_Lp", u_lp, grid, "norm")
    rep.add("f_Lp", f_lp, grid, "norm")
    rep.add("D2z_Lp", d2z, grid, "norm")
    rep.add("hardy_ratio", hardy / d2z if d2z > 0 else 0.0, grid, "ratio")
    rep.add("coupling_ratio", coup / d2z if d2z > 0 else 0.0, grid, "ratio")
    rep.add("coupling_sup_times_z2", float(np.max(np.abs(prob.coupling[:, 1:]) * prob.z2[None, 1:])), grid, "check")
    rep.add("picard_iterations", sol.picard_iterations, grid, "count")
    rep.add("ellipticity_conditioning", prob.ellipticity()["conditioning"], grid, "check")
    rep.metadata.update({"p": p, "r": r, "R": cyl.R, "eps0": cyl.domain.lip_bound, "status": sol.status,
                         "map": prob.map_name, "n": n})
    if sol.status != "converged":
        rep.warn("smallness violated: the coupling iteration did not contract")
    return rep


def probe_main_estimate(cyl: CylNeighborhood, operator: EllipticOperator, bc: ObliqueField, f, g,
                        p: float = 2.0, n: int = 65, dirichlet=0.0, regdist: RegDistField | None = None,
                        theta: float = 0.1, exact: Callable | None = None, bc_order: int = 2,
                        coupling: str = "picard", return_solution: bool = False):
    """Measure ``N_emp = ||u||_{W2p} / (||u||_p + ||f||_p + ||g||_{W^(1-1/p)_p(Gamma)})`` on ``Omega_R``.

    Hypothesis failures are recorded as warnings; the probe still runs.  The
    boundary datum of the frozen-coefficient problem,
    ``h = g - (b - b(x0)).Du - b0 u`` with ``x0`` the boundary point over the
    centre, is formed and its norms are reported.  With ``return_solution`` the
    pair ``(report, solution)`` is returned.
    """
    rep = NormReport()
    R, delta = cyl.R, cyl.delta
    grid_t = np.linspace(-R, R, 201)
    checks = {}
    lip = lipschitz_constant(cyl.domain, grid_t)
    checks["lipschitz"] = {"value": lip, "bound": cyl.domain.eps0, "pass": bool(lip <= cyl.domain.eps0 + 1e-12)}
    obl = check_obliqueness(cyl.domain, bc, grid_t)
    checks["obliqueness"] = {"value": obl["min_abs_ratio"], "bound": delta, "pass": obl["pass_abs"]}

    sol = solve_oblique(operator, bc, g, cyl, n=n, f=f, dirichlet=dirichlet, regdist=regdist,
                        bc_order=bc_order, coupling=coupling, check=False)
    prob = sol.problem
    Y = prob.y
    ell = operator.check_ellipticity(Y)
    checks["ellipticity"] = {"value": ell["min_eig"], "bound": operator.nu, "pass": ell["pass"]}
    A = np.asarray(operator.a(Y), dtype=float)
    h1 = prob.spacing[0]
    bmo = 0.0
    for i, j in ((0, 0), (0, 1), (1, 1)):
        ga = GridFunction(A[..., i, j], (prob.z1[0], 0.0), prob.spacing)
        bmo = max(bmo, bmo_seminorm(ga, max(R / 2, 2 * max(prob.spacing)), max_centers=400))
    checks["bmo"] = {"value": bmo, "bound": delta * theta, "pass": bool(bmo <= delta * theta)}
    yb = Y[:, 0]
    bvals = np.asarray(bc.b(yb), dtype=float)
    hold = max(holder_seminorm(bvals[:, k], bc.alpha, yb) for k in range(2))
    checks["holder"] = {"value": hold, "alpha": bc.alpha, "bound": 1.0 - 1.0 / p,
                        "pass": bool(bc.alpha > 1.0 - 1.0 / p and np.isfinite(hold))}
    for name, c in checks.items():
        if not c["pass"]:
            rep.warn(f"hypothesis {name} fails: {c}")

    fv = _as_nodal(f, Y)
    gv = _as_nodal(g, yb)
    du = sol.grad_y()
    d2u = sol.hess_y()
    n0 = sol.lp_y(sol.values, p)
    n1 = sol.lp_y(du, p)
    n2 = sol.lp_y(d2u, p)
    w2p = (n0 ** p + n1 ** p + n2 ** p) ** (1.0 / p)
    f_lp = sol.lp_y(fv, p)
    gnorm = _fractional_norm(_boundary_trace(sol, gv), p)
    den = n0 + f_lp + gnorm["W"]
    grid = list(prob.shape)
    rep.add("N_emp", w2p / den if den > 0 else 0.0, grid, "ratio")
    rep.add("u_W2p", w2p, grid, "norm")
    rep.add("u_Lp", n0, grid, "norm")
    rep.add("Du_Lp", n1, grid, "norm")
    rep.add("D2u_Lp", n2, grid, "norm")
    rep.add("f_Lp", f_lp, grid, "norm")
    rep.add("g_Lp_Gamma", gnorm["Lp"], grid, "norm")
    rep.add("g_seminorm_Gamma", gnorm["seminorm"], grid, "norm")

    i0 = int(np.argmin(np.abs(prob.z1)))
    b_x0 = bvals[i0]
    b0v = np.broadcast_to(np.asarray(bc.b0(yb), dtype=float), yb.shape[:-1])
    hv = gv - np.sum((bvals - b_x0) * du[:, 0], axis=-1) - b0v * sol.values[:, 0]
    hnorm = _fractional_norm(_boundary_trace(sol, hv), p)
    rep.add("h_Lp_Gamma", hnorm["Lp"], grid, "norm")
    rep.add("h_seminorm_Gamma", hnorm["seminorm"], grid, "norm")
    rep.add("h_W_Gamma", hnorm["W"], grid, "norm")
    rep.add("picard_iterations", sol.picard_iterations, grid, "count")
    if exact is not None:
        err = np.abs(sol.values - np.asarray(exact(Y), dtype=float))
        rep.add("max_error", float(np.max(err)), grid, "norm")
    rep.metadata.update({"p": p, "n": n, "R": R, "delta": delta, "theta": theta, "map": prob.map_name,
                         "status": sol.status, "hypotheses": checks,
                         "hypotheses_pass": all(c["pass"] for c in checks.values())})
    if sol.status != "converged":
        rep.warn("smallness violated: the coupling iteration did not contract")
    return (rep, sol) if return_solution else rep
