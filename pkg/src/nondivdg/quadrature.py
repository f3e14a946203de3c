"""Gauss rules on the reference triangle and the reference edge."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import ConfigurationError

MAX_ORDER = 40


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (n, dim) reference coordinates
    weights: np.ndarray  # (n,)
    order: int

    def __len__(self):
        return len(self.weights)


def _check_order(order):
    if int(order) != order or order < 1 or order > MAX_ORDER:
        raise ConfigurationError(
            f"quadrature order must be an integer in [1, {MAX_ORDER}], got {order}")
    return int(order)


@lru_cache(maxsize=None)
def edge_rule(order) -> QuadratureRule:
    """Gauss-Legendre on [0, 1], exact for degree ``order``."""
    order = _check_order(order)
    n = (order + 2) // 2
    x, w = roots_legendre(n)
    pts = 0.5 * (x + 1.0)
    rule = QuadratureRule(pts[:, None], 0.5 * w, order)
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


@lru_cache(maxsize=None)
def triangle_rule(order) -> QuadratureRule:
    """Collapsed Gauss rule on the triangle with vertices (0,0), (1,0), (0,1).

    Uses ``xi = u (1 - v)``, ``eta = v``; the Jacobian factor ``1 - v`` is
    absorbed by a Gauss-Jacobi(1, 0) rule in ``v``.
    """
    order = _check_order(order)
    n = (order + 2) // 2
    xu, wu = roots_legendre(n)
    xv, wv = roots_jacobi(n, 1.0, 0.0)
    u = 0.5 * (xu + 1.0)
    v = 0.5 * (xv + 1.0)
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv) * 0.125
    pts = np.stack([(U * (1.0 - V)).ravel(), V.ravel()], axis=-1)
    rule = QuadratureRule(pts, W.ravel(), order)
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


# local edge k joins reference vertex k to vertex k+1 (mod 3)
REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def edge_to_reference(local_edge, s):
    """Reference-triangle points on local edge ``local_edge`` at parameters ``s``.

    ``local_edge`` and ``s`` broadcast against each other; the result has a
    trailing axis of length 2.
    """
    local_edge = np.asarray(local_edge)
    s = np.asarray(s, dtype=float)
    a = REF_VERTICES[local_edge]
    b = REF_VERTICES[(local_edge + 1) % 3]
    return a + s[..., None] * (b - a)


def edge_direction(local_edge):
    local_edge = np.asarray(local_edge)
    return REF_VERTICES[(local_edge + 1) % 3] - REF_VERTICES[local_edge]
