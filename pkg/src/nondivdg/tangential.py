"""Tangential calculus on mesh faces (d = 2).

All functions broadcast: geometric arrays ``n (..., 2)``, ``H (...)``,
``G (..., 2, 2)`` with ``G[i, j] = D_i n_j`` must broadcast against the
trace arrays ``v (...)``, ``grad (..., 2)``, ``hess (..., 2, 2)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fe import FaceQuadrature, rot90


def tangential_gradient(grad, n):
    """``grad v - (grad v . n) n``."""
    grad = np.asarray(grad, dtype=float)
    n = np.asarray(n, dtype=float)
    return grad - np.sum(grad * n, axis=-1, keepdims=True) * n


def normal_derivative(grad, n):
    return np.sum(grad * n, axis=-1)


def _quad(M, a, b):
    return np.einsum("...i,...ij,...j->...", a, M, b)


def laplace_beltrami(lap, grad, hess, n, H, G):
    """``div_T grad_T`` of the trace from ambient derivatives:
    ``Lap v - H dv/dn - d/dn (grad v . n)`` with
    ``d/dn (grad v . n) = n^T D^2v n + grad v . (G^T n)``.
    """
    dn = normal_derivative(grad, n)
    Gn = np.einsum("...ij,...i->...j", G, n)
    return lap - H * dn - _quad(hess, n, n) - np.sum(grad * Gn, axis=-1)


def tangential_of_normal_derivative(grad, hess, n, G):
    """Scalar ``t . grad_T (dv/dn) = t^T D^2v n + (t^T G t)(t . grad v)``
    with ``t`` the normal rotated by +90 degrees."""
    t = rot90(n)
    return _quad(hess, t, n) + _quad(G, t, t) * np.sum(grad * t, axis=-1)


def grad_tangential_of_normal_derivative_vec(grad, hess, n, G):
    t = rot90(n)
    return tangential_of_normal_derivative(grad, hess, n, G)[..., None] * t


@dataclass(frozen=True)
class FaceTraceData:
    """Traces of one or several functions (trailing axis ``m``) at face
    quadrature points.  Side ``K'`` arrays are ``None`` on boundary faces."""
    quad: FaceQuadrature
    val: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    val_other: Optional[np.ndarray] = None
    grad_other: Optional[np.ndarray] = None
    hess_other: Optional[np.ndarray] = None

    @property
    def is_interior(self):
        return self.val_other is not None

    def geometry(self):
        """Normal, tangent, ``H`` and ``G`` expanded over the function axis."""
        q = self.quad
        return q.normal[:, :, None], q.tangent[:, :, None], q.H[:, :, None], q.G[:, :, None]

    def side(self, which):
        if which == "K":
            return self.val, self.grad, self.hess
        if which in ("K'", "Kp"):
            if not self.is_interior:
                raise ValueError("boundary faces have no K' side")
            return self.val_other, self.grad_other, self.hess_other
        raise ValueError(f"unknown side {which!r}")


def _quantity(trace: FaceTraceData, which, quantity):
    n, t, H, G = trace.geometry()
    val, grad, hess = trace.side(which)
    if quantity == "value":
        return val
    if quantity == "gradient":
        return grad
    if quantity == "normal-derivative":
        return normal_derivative(grad, n)
    if quantity == "tangential-gradient":
        return tangential_gradient(grad, n)
    raise ValueError(f"unknown quantity {quantity!r}")


def jump_avg(trace: FaceTraceData, quantity="value"):
    """``(jump, average)``: difference and mean of the two sides on interior
    faces, the one-sided trace for both on boundary faces."""
    a = _quantity(trace, "K", quantity)
    if not trace.is_interior:
        return a, a
    b = _quantity(trace, "K'", quantity)
    return a - b, 0.5 * (a + b)


def _sided(trace, side, fn):
    if side == "average":
        if not trace.is_interior:
            return fn("K")
        return 0.5 * (fn("K") + fn("K'"))
    return fn(side)


def face_laplace_beltrami(trace: FaceTraceData, side="K"):
    n, _, H, G = trace.geometry()

    def fn(which):
        _, grad, hess = trace.side(which)
        return laplace_beltrami(np.trace(hess, axis1=-2, axis2=-1), grad, hess, n, H, G)
    return _sided(trace, side, fn)


def grad_tangential_of_normal_derivative(trace: FaceTraceData, side="K"):
    """``grad_T (dv/dn)`` as a vector field along the face."""
    n, _, _, G = trace.geometry()

    def fn(which):
        _, grad, hess = trace.side(which)
        return grad_tangential_of_normal_derivative_vec(grad, hess, n, G)
    return _sided(trace, side, fn)
