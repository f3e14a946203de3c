"""Discontinuous polynomial spaces on curved triangles.

The local basis is the monomial basis of P_p orthonormalised on the reference
triangle.  Physical derivatives are obtained by the exact chain rule through
the (possibly quadratic) element map.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np

from .errors import ConfigurationError, GeometryError
from .mesh import CurvedMesh, ElementMap, map_eval_batch
from .quadrature import (QuadratureRule, edge_direction, edge_rule, edge_to_reference,
                         triangle_rule)

MIN_DEGREE, MAX_DEGREE = 2, 4


def n_local(p):
    return (p + 1) * (p + 2) // 2


def monomial_exponents(p):
    return [(d - b, b) for d in range(p + 1) for b in range(d + 1)]


def _mono_integral(a, b):
    return Fraction(factorial(a) * factorial(b), factorial(a + b + 2))


@lru_cache(maxsize=None)
def modal_coefficients(p):
    """Rows are the orthonormal basis functions in monomial coordinates."""
    exps = monomial_exponents(p)
    n = len(exps)
    gram = [[_mono_integral(exps[i][0] + exps[j][0], exps[i][1] + exps[j][1])
             for j in range(n)] for i in range(n)]

    def inner(u, v):
        return sum(u[i] * v[j] * gram[i][j] for i in range(n) if u[i] for j in range(n) if v[j])

    basis = []
    for k in range(n):
        v = [Fraction(int(i == k)) for i in range(n)]
        for q in basis:
            c = inner(v, q) / inner(q, q)
            v = [vi - c * qi for vi, qi in zip(v, q)]
        basis.append(v)
    C = np.array([[float(c) for c in q] / np.sqrt(float(inner(q, q))) for q in basis])
    C.setflags(write=False)
    return C


def monomials(p, xhat):
    """Monomial values ``(..., n)``, gradients ``(..., n, 2)`` and Hessians
    ``(..., n, 2, 2)`` at reference points ``xhat (..., 2)``."""
    xhat = np.asarray(xhat, dtype=float)
    xi, eta = xhat[..., 0], xhat[..., 1]
    P = np.stack([xi**k for k in range(p + 1)], axis=-1)
    Q = np.stack([eta**k for k in range(p + 1)], axis=-1)

    def pw(T, k):
        return T[..., k] if k >= 0 else np.zeros_like(xi)

    V, G, H = [], [], []
    for a, b in monomial_exponents(p):
        V.append(pw(P, a) * pw(Q, b))
        G.append(np.stack([a * pw(P, a - 1) * pw(Q, b), b * pw(P, a) * pw(Q, b - 1)], -1))
        hxy = a * b * pw(P, a - 1) * pw(Q, b - 1)
        H.append(np.stack([
            np.stack([a * (a - 1) * pw(P, a - 2) * pw(Q, b), hxy], -1),
            np.stack([hxy, b * (b - 1) * pw(P, a) * pw(Q, b - 2)], -1)], -2))
    return np.stack(V, -1), np.stack(G, -2), np.stack(H, -3)


@dataclass(frozen=True)
class ShapeTable:
    """Reference basis data at a set of points."""
    points: np.ndarray
    values: np.ndarray   # (..., nb)
    grads: np.ndarray    # (..., nb, 2)
    hessians: np.ndarray  # (..., nb, 2, 2)


def shape_table(p, xhat, nodal=False) -> ShapeTable:
    V, G, H = monomials(p, xhat)
    C = nodal_coefficients(p) if nodal else modal_coefficients(p)
    return ShapeTable(np.asarray(xhat, float),
                      np.einsum("...m,bm->...b", V, C),
                      np.einsum("...mi,bm->...bi", G, C),
                      np.einsum("...mij,bm->...bij", H, C))


def nodal_points(p):
    return np.array([[i / p, j / p] for j in range(p + 1) for i in range(p + 1 - j)])


@lru_cache(maxsize=None)
def nodal_coefficients(p):
    """Lagrange basis on equispaced nodes, in monomial coordinates."""
    C = modal_coefficients(p)
    V = np.einsum("km,bm->kb", monomials(p, nodal_points(p))[0], C)
    # row i: sum_b inv(V)[b, i] modal_b
    out = np.linalg.inv(V).T @ C
    out.setflags(write=False)
    return out


def physical_derivatives(emap: ElementMap, shape: ShapeTable, xhat=None):
    """Per-basis ``(value, gradient, Hessian)`` of ``rho o F_K^{-1}``.

    ``shape`` must be tabulated at ``xhat`` (defaults to ``shape.points``),
    given as ``(Q, 2)`` or a single point ``(2,)``.
    """
    xhat = shape.points if xhat is None else np.asarray(xhat, float)
    single = xhat.ndim == 1
    pts = xhat[None] if single else xhat
    _, J, HF = map_eval_batch(emap.B_tilde[None], emap.b_tilde[None],
                              emap.phi_coeffs[None], pts)
    tabs = [shape.values, shape.grads, shape.hessians]
    if single:
        tabs = [t[None] for t in tabs]
    val, grad, hess = chain_rule(J[0], HF, *tabs)
    if single:
        return val[0], grad[0], hess[0]
    return val, grad, hess


def chain_rule(J, HF, values, grads, hessians):
    """Push reference derivatives forward.

    ``J (..., 2, 2)`` per point and ``HF (..., 2, 2, 2)`` broadcastable to the
    point axes; reference tables ``(..., nb, ...)`` broadcastable likewise.
    """
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if np.any(det <= 0.0):
        raise GeometryError("element map has a nonpositive Jacobian determinant")
    Jinv = np.empty_like(J)
    Jinv[..., 0, 0] = J[..., 1, 1] / det
    Jinv[..., 1, 1] = J[..., 0, 0] / det
    Jinv[..., 0, 1] = -J[..., 0, 1] / det
    Jinv[..., 1, 0] = -J[..., 1, 0] / det
    # grad_x v_k = sum_j Jinv[j, k] d_j rho
    g = grads @ Jinv
    HFr = HF.reshape(HF.shape[:-3] + (2, 4))
    M = hessians - (g @ HFr).reshape(g.shape + (2,))
    Ji = Jinv[..., None, :, :]
    H = np.swapaxes(Ji, -1, -2) @ M @ Ji
    return np.broadcast_to(values, g.shape[:-1]), g, H


@dataclass(frozen=True, eq=False)
class DGSpace:
    mesh: CurvedMesh
    p: int

    def __post_init__(self):
        if not (isinstance(self.p, (int, np.integer)) and MIN_DEGREE <= self.p <= MAX_DEGREE):
            raise ConfigurationError(
                f"polynomial degree must be in [{MIN_DEGREE}, {MAX_DEGREE}], got {self.p}")

    @property
    def n_local(self):
        return n_local(self.p)

    @property
    def n_dofs(self):
        return self.mesh.n_elements * self.n_local

    @property
    def offsets(self):
        return np.arange(self.mesh.n_elements + 1) * self.n_local

    def dofs(self, k):
        return np.arange(k * self.n_local, (k + 1) * self.n_local)

    def evaluate(self, elems, xhat):
        """Physical basis data at reference points.

        ``xhat`` is ``(Q, 2)`` (same points on every element) or ``(E, Q, 2)``.
        Returns ``x (E,Q,2)``, ``detJ (E,Q)``, ``val (E,Q,nb)``,
        ``grad (E,Q,nb,2)``, ``hess (E,Q,nb,2,2)`` and ``J (E,Q,2,2)``.
        """
        elems = np.asarray(elems)
        x, J, HF = self.mesh.map(elems, xhat)
        tab = shape_table(self.p, xhat)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        val, grad, hess = chain_rule(J, HF.reshape((HF.shape[0],) + (1,) * (J.ndim - 3)
                                                 + (2, 2, 2)),
                                     tab.values, tab.grads, tab.hessians)
        return x, det, val, grad, hess, J


# ---------------------------------------------------------------------------
# quadrature on physical cells and faces
# ---------------------------------------------------------------------------

def default_order(p):
    return 2 * p + 2


def volume_quadrature(emap: ElementMap, order: int):
    """Physical points and weights ``w |det DF_K|`` of a rule exact to ``order``."""
    rule = triangle_rule(order)
    x, J, _ = map_eval_batch(emap.B_tilde[None], emap.b_tilde[None],
                             emap.phi_coeffs[None], rule.points)
    return x[0], rule.weights * np.abs(np.linalg.det(J[0]))


@dataclass(frozen=True)
class FaceQuadrature:
    """Face quadrature data, batched over faces ``(F, Q, ...)``.

    ``normal`` is the geometric normal used by the forms (chart normal on
    boundary faces, straight-edge normal out of ``K`` on interior faces);
    ``edge_normal`` is the normal of the mesh edge itself.
    """
    points: np.ndarray
    weights: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    H: np.ndarray
    G: np.ndarray
    edge_normal: np.ndarray
    xhat: np.ndarray        # reference points on K
    xhat_other: np.ndarray  # reference points on K' (interior faces only)
    elem: np.ndarray
    elem_other: np.ndarray
    portion: np.ndarray
    local_edge: np.ndarray


def rot90(v):
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def _edge_geometry(mesh, elems, local_edges, s):
    xhat = edge_to_reference(local_edges[:, None], s[None, :])
    x, J, _ = mesh.map(elems, xhat)
    tang = np.einsum("fqij,fj->fqi", J, edge_direction(local_edges))
    speed = np.linalg.norm(tang, axis=-1)
    tau = tang / speed[..., None]
    # outward normal of a counter-clockwise element lies to the right of travel
    nrm = np.stack([tau[..., 1], -tau[..., 0]], axis=-1)
    return xhat, x, speed, nrm


def boundary_face_quadrature(mesh: CurvedMesh, order: int, faces=None) -> FaceQuadrature:
    bf = mesh.boundary_faces if faces is None else mesh.boundary_faces[faces]
    rule = edge_rule(order)
    s = rule.points[:, 0]
    xhat, x, speed, edge_n = _edge_geometry(mesh, bf[:, 0], bf[:, 1], s)
    F, Q = x.shape[:2]
    n = np.empty((F, Q, 2))
    H = np.zeros((F, Q))
    G = np.zeros((F, Q, 2, 2))
    for pid in np.unique(bf[:, 2]):
        sel = bf[:, 2] == pid
        portion = mesh.domain.portion(int(pid))
        n[sel] = portion.normal(x[sel])
        H[sel], G[sel] = portion.curvature(x[sel])
    return FaceQuadrature(x, speed * rule.weights, n, rot90(n), H, G, edge_n, xhat,
                          None, bf[:, 0], None, bf[:, 2], bf[:, 1])


def interior_face_quadrature(mesh: CurvedMesh, order: int, faces=None) -> FaceQuadrature:
    f = mesh.interior_faces if faces is None else mesh.interior_faces[faces]
    rule = edge_rule(order)
    s = rule.points[:, 0]
    xhat, x, speed, edge_n = _edge_geometry(mesh, f[:, 0], f[:, 2], s)
    xhat_o = edge_to_reference(f[:, 3, None], 1.0 - s[None, :])
    F, Q = x.shape[:2]
    return FaceQuadrature(x, speed * rule.weights, edge_n, rot90(edge_n),
                          np.zeros((F, Q)), np.zeros((F, Q, 2, 2)), edge_n, xhat,
                          xhat_o, f[:, 0], f[:, 1], np.zeros(F, dtype=np.int64), f[:, 2])


def face_quadrature(mesh: CurvedMesh, face, order: int) -> FaceQuadrature:
    """Quadrature on a single face ``('interior' | 'boundary', index)``."""
    kind, idx = face
    if kind == "boundary":
        return boundary_face_quadrature(mesh, order, np.array([idx]))
    if kind == "interior":
        return interior_face_quadrature(mesh, order, np.array([idx]))
    raise ConfigurationError(f"unknown face kind '{kind}'")
