"""Quadrature helpers: Gauss-Legendre panels, graded meshes and the bump kernel."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "gauss_legendre",
    "panel_rule",
    "graded_breakpoints",
    "MollifierKernel",
]


@lru_cache(maxsize=32)
def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a, b, n: int = 16):
    """Nodes and weights of the n-point Gauss-Legendre rule on [a, b].

    ``a`` and ``b`` may be arrays of equal shape; the node axis is appended last.
    """
    x, w = _gl(n)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def panel_rule(breaks: NDArray, n: int = 16):
    """Composite Gauss-Legendre rule over consecutive breakpoints (flattened)."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = gauss_legendre(breaks[:-1], breaks[1:], n)
    return x.ravel(), w.ravel()


def graded_breakpoints(a: float, b: float, toward: str = "a", levels: int = 40,
                       ratio: float = 0.5, uniform: int = 1) -> NDArray:
    """Geometrically graded breakpoints on [a, b].

    ``toward`` is ``"a"``, ``"b"`` or ``"both"``.  Each level shrinks the panel
    adjacent to the singular end by ``ratio``; ``uniform`` panels cover the bulk.
    """
    if not b > a:
        raise ValueError("need b > a")
    length = b - a
    if toward == "both":
        mid = 0.5 * (a + b)
        left = graded_breakpoints(a, mid, "a", levels, ratio, max(1, uniform // 2))
        right = graded_breakpoints(mid, b, "b", levels, ratio, max(1, uniform // 2))
        return np.concatenate([left, right[1:]])
    scales = ratio ** np.arange(1, levels + 1)
    bulk = np.linspace(ratio, 1.0, uniform + 1) if uniform > 1 else np.array([ratio, 1.0])
    rel = np.unique(np.concatenate([[0.0], scales[::-1], bulk]))
    if toward == "a":
        return a + length * rel
    if toward == "b":
        return (b - length * rel)[::-1]
    raise ValueError(f"unknown grading direction {toward!r}")


def _bump(r2):
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


@dataclass(frozen=True)
class MollifierKernel:
    """Discrete radial bump kernel supported in the closed unit ball.

    The tensor midpoint rule with ``n`` nodes per axis is masked to the ball and
    normalised so that the weights sum to one.  Because all integrands used with
    this kernel are affine in the last coordinate, the rule is also stored in
    collapsed (marginal) form over the first ``dim - 1`` coordinates.

    Attributes
    ----------
    dim : int
        Ambient dimension.
    nodes : ndarray, shape (Q, dim)
    weights : ndarray, shape (Q,)
        ``phi(w_q) * h**dim`` normalised to unit mass.
    grad_weights : ndarray, shape (Q, dim)
        ``D phi(w_q) * h**dim`` with the same normalisation.
    """

    dim: int
    n: int
    nodes: NDArray
    weights: NDArray
    grad_weights: NDArray
    marginal_nodes: NDArray
    marginal_weights: NDArray
    marginal_grad_weights: NDArray

    @classmethod
    def bump(cls, dim: int, n: int = 33) -> "MollifierKernel":
        if dim < 2:
            raise ValueError("dim must be at least 2")
        h = 2.0 / n
        axis = -1.0 + h * (np.arange(n) + 0.5)
        grids = np.meshgrid(*([axis] * dim), indexing="ij")
        pts = np.stack(grids, axis=-1)
        r2 = np.sum(pts ** 2, axis=-1)
        phi = _bump(r2)
        dphi = np.zeros_like(pts)
        inside = r2 < 1.0
        dphi[inside] = (phi[inside] * (-2.0 / (1.0 - r2[inside]) ** 2))[:, None] * pts[inside]
        mass = phi.sum()
        phi = phi / mass
        dphi = dphi / mass
        m_phi = phi.sum(axis=-1)
        m_dphi = dphi[..., :-1].sum(axis=-2)
        m_pts = np.stack(np.meshgrid(*([axis] * (dim - 1)), indexing="ij"), axis=-1)
        keep = phi > 0
        mkeep = m_phi > 0
        return cls(
            dim=dim,
            n=n,
            nodes=pts[keep],
            weights=phi[keep],
            grad_weights=dphi[keep],
            marginal_nodes=m_pts[mkeep],
            marginal_weights=m_phi[mkeep],
            marginal_grad_weights=m_dphi[mkeep],
        )
