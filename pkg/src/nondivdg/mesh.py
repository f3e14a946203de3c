"""Curved triangular meshes with affine-plus-quadratic element maps.

Element ``K`` with vertices ``X0, X1, X2`` (counter-clockwise) and edge
control points ``M01, M12, M20`` is the image of the reference triangle under

    F_K(xi) = X0 + B xi + sum_e 4 lam_a lam_b (M_e - (X_a + X_b)/2),

the quadratic Lagrange interpolant of the six control points.  Only boundary
edges carry a nonzero displacement; interior edges are straight.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import Delaunay

from .coefficients import DomainSpec, point_in_polygon
from .errors import GeometryError, ResolutionError, SnapError
from .quadrature import edge_direction, edge_rule, edge_to_reference, triangle_rule

# local edge e joins vertex EDGE_VERTS[e][0] to EDGE_VERTS[e][1]
EDGE_VERTS = np.array([[0, 1], [1, 2], [2, 0]])
# gradients of the barycentric coordinates lam_0 = 1 - xi - eta, lam_1 = xi, lam_2 = eta
_DLAM = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
# constant Hessians of lam_a lam_b for each edge
_HBUBBLE = np.stack([np.outer(_DLAM[a], _DLAM[b]) + np.outer(_DLAM[b], _DLAM[a])
                     for a, b in EDGE_VERTS])


def _barycentric(xhat):
    xhat = np.asarray(xhat, dtype=float)
    xi, eta = xhat[..., 0], xhat[..., 1]
    return np.stack([1.0 - xi - eta, xi, eta], axis=-1)


def _bubbles(xhat):
    """Values ``(..., 3)`` and gradients ``(..., 3, 2)`` of ``4 lam_a lam_b``."""
    lam = _barycentric(xhat)
    a, b = EDGE_VERTS[:, 0], EDGE_VERTS[:, 1]
    val = 4.0 * lam[..., a] * lam[..., b]
    grad = 4.0 * (lam[..., a, None] * _DLAM[b] + lam[..., b, None] * _DLAM[a])
    return val, grad


@dataclass(frozen=True)
class ElementMap:
    """``F_K = F~_K + Phi_K`` with ``F~_K(xi) = B_tilde xi + b_tilde``.

    ``phi_coeffs[e]`` is the displacement of edge ``e``'s midpoint control
    point from the chord midpoint, so ``Phi_K = sum_e 4 lam_a lam_b phi_coeffs[e]``.
    """
    B_tilde: np.ndarray
    b_tilde: np.ndarray
    phi_coeffs: np.ndarray
    C_K: float

    @property
    def is_affine(self):
        return not np.any(self.phi_coeffs)


def map_eval(emap: ElementMap, xhat):
    """Return ``(x, J, Hess)`` with ``J[i, j] = dF_i/dxi_j`` and
    ``Hess[i, j, k] = d^2 F_i / dxi_j dxi_k`` at reference points ``xhat``."""
    xhat = np.asarray(xhat, float)
    pts = xhat.reshape(1, -1, 2)
    x, J, H = map_eval_batch(emap.B_tilde[None], emap.b_tilde[None],
                             emap.phi_coeffs[None], pts)
    shape = xhat.shape[:-1]
    return x[0].reshape(shape + (2,)), J[0].reshape(shape + (2, 2)), H[0]


def map_eval_batch(B, b, delta, xhat):
    """Vectorised :func:`map_eval` over elements.

    ``B (E,2,2)``, ``b (E,2)``, ``delta (E,3,2)``; ``xhat`` is ``(..., 2)``
    broadcastable against ``(E, ..., 2)``.  Returns ``x (E,...,2)``,
    ``J (E,...,2,2)`` and the constant ``Hess (E,2,2,2)``.
    """
    xhat = np.asarray(xhat, dtype=float)
    E = B.shape[0]
    if xhat.ndim == 2:
        xhat = xhat[None]
    extra = xhat.ndim - 2
    val, grad = _bubbles(xhat)
    Bx = B.reshape((E,) + (1,) * extra + (2, 2))
    bx = b.reshape((E,) + (1,) * extra + (2,))
    dx = delta.reshape((E,) + (1,) * extra + (3, 2))
    x = bx + np.einsum("...ij,...j->...i", Bx, xhat) + np.einsum("...e,...ei->...i", val, dx)
    J = Bx + np.einsum("...ei,...ej->...ij", dx, grad)
    H = 4.0 * np.einsum("eai,ajk->eijk", delta, _HBUBBLE)
    return x, J, H


def compute_C_K(B, delta):
    """``sup ||D Phi_K B^-1||_2`` over the reference triangle.

    ``D Phi_K`` is affine in ``xi`` and the spectral norm is convex, so the
    supremum is attained at a reference vertex.
    """
    Binv = np.linalg.inv(B)
    best = np.zeros(B.shape[0])
    for v in ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)):
        _, grad = _bubbles(np.array(v))
        DPhi = np.einsum("eai,aj->eij", delta, grad)
        best = np.maximum(best, np.linalg.norm(DPhi @ Binv, ord=2, axis=(1, 2)))
    return best


@dataclass(frozen=True, eq=False)
class CurvedMesh:
    """Conforming triangulation with curved boundary edges.

    ``interior_faces`` rows are ``(K, K', e, e')`` with ``K < K'``; the face
    normal points out of ``K`` and the edge parameter ``s`` on ``K`` matches
    ``1 - s`` on ``K'``.  ``boundary_faces`` rows are ``(K, e, portion id)``.
    """
    domain: DomainSpec
    nodes: np.ndarray
    elements: np.ndarray
    midpoints: np.ndarray
    boundary_faces: np.ndarray
    interior_faces: np.ndarray = field(init=False)
    B: np.ndarray = field(init=False)
    b: np.ndarray = field(init=False)
    delta: np.ndarray = field(init=False)
    C_K: np.ndarray = field(init=False)
    h_K: np.ndarray = field(init=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        elems = np.asarray(self.elements, dtype=np.int64).reshape(-1, 3)
        mids = np.asarray(self.midpoints, dtype=float).reshape(-1, 3, 2)
        bf = np.asarray(self.boundary_faces, dtype=np.int64).reshape(-1, 3)
        X = nodes[elems]
        B = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=-1)
        det = np.linalg.det(B)
        if np.any(det <= 0.0):
            bad = int(np.argmin(det))
            raise GeometryError(f"element {bad} is degenerate or clockwise")
        chord = 0.5 * (X[:, EDGE_VERTS[:, 0]] + X[:, EDGE_VERTS[:, 1]])
        delta = mids - chord
        edge_len = np.linalg.norm(X[:, EDGE_VERTS[:, 1]] - X[:, EDGE_VERTS[:, 0]], axis=-1)
        interior = _interior_faces(elems)
        for name, val in (("nodes", nodes), ("elements", elems), ("midpoints", mids),
                          ("boundary_faces", bf), ("interior_faces", interior),
                          ("B", B), ("b", X[:, 0].copy()), ("delta", delta),
                          ("C_K", compute_C_K(B, delta)), ("h_K", edge_len.max(axis=1))):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def h(self):
        return float(self.h_K.max())

    @property
    def h_interior(self):
        """``min(h_K, h_K')`` per interior face."""
        f = self.interior_faces
        return np.minimum(self.h_K[f[:, 0]], self.h_K[f[:, 1]])

    @property
    def h_boundary(self):
        return self.h_K[self.boundary_faces[:, 0]]

    def element_map(self, k) -> ElementMap:
        return ElementMap(self.B[k].copy(), self.b[k].copy(), self.delta[k].copy(),
                          float(self.C_K[k]))

    def map(self, elems, xhat):
        """Batched map evaluation for the element indices ``elems``."""
        elems = np.asarray(elems)
        return map_eval_batch(self.B[elems], self.b[elems], self.delta[elems], xhat)

    def boundary_vertices(self):
        bf = self.boundary_faces
        v = self.elements[bf[:, 0], bf[:, 1]]
        return np.unique(v)


def _interior_faces(elems):
    E = elems.shape[0]
    a = elems[:, EDGE_VERTS[:, 0]].ravel()
    b = elems[:, EDGE_VERTS[:, 1]].ravel()
    key = np.minimum(a, b) * (int(elems.max()) + 1 if E else 1) + np.maximum(a, b)
    order = np.argsort(key, kind="stable")
    ks = key[order]
    same = np.flatnonzero(ks[1:] == ks[:-1])
    if np.any(same[1:] == same[:-1] + 1):
        raise GeometryError("an edge is shared by more than two elements")
    i0, i1 = order[same], order[same + 1]
    K0, e0 = np.divmod(i0, 3)
    K1, e1 = np.divmod(i1, 3)
    swap = K0 > K1
    K = np.where(swap, K1, K0)
    Kp = np.where(swap, K0, K1)
    e = np.where(swap, e1, e0)
    ep = np.where(swap, e0, e1)
    faces = np.stack([K, Kp, e, ep], axis=1).astype(np.int64)
    return faces[np.lexsort((faces[:, 2], faces[:, 0]))]


def _boundary_edge_list(elems):
    """All edges that belong to exactly one element, as ``(K, e)``."""
    a = elems[:, EDGE_VERTS[:, 0]].ravel()
    b = elems[:, EDGE_VERTS[:, 1]].ravel()
    n = int(elems.max()) + 1
    key = np.minimum(a, b) * n + np.maximum(a, b)
    uniq, inv, counts = np.unique(key, return_inverse=True, return_counts=True)
    idx = np.flatnonzero(counts[inv] == 1)
    return np.stack(np.divmod(idx, 3), axis=1)


def _straight_midpoints(nodes, elems):
    X = nodes[elems]
    return 0.5 * (X[:, EDGE_VERTS[:, 0]] + X[:, EDGE_VERTS[:, 1]])


def _tag_boundary(elems, edge_portion):
    """Boundary face table from a map ``frozenset({a, b}) -> portion id``."""
    faces = []
    for K, e in _boundary_edge_list(elems):
        a, b = elems[K, EDGE_VERTS[e]]
        try:
            pid = edge_portion[(min(a, b), max(a, b))]
        except KeyError:
            raise GeometryError(
                f"boundary edge ({a}, {b}) of element {K} is not on the domain boundary") from None
        faces.append((K, e, pid))
    faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
    return faces[np.lexsort((faces[:, 1], faces[:, 0]))]


def _orient(nodes, elems):
    X = nodes[elems]
    u, v = X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]
    area = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
    flip = area < 0
    elems = elems.copy()
    elems[flip, 1], elems[flip, 2] = elems[flip, 2].copy(), elems[flip, 1].copy()
    return elems


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def _disk_rings(domain, target_h):
    portion = domain.portions[0]
    n = int(np.ceil(1.0 / target_h - 1e-9))
    if 6 * n < 2:
        raise ResolutionError("disk boundary needs at least 2 edges")
    c = np.asarray(portion.center, float)
    R = portion.radius
    nodes = [c[None]]
    start = [0]
    for k in range(1, n + 1):
        th = 2 * np.pi * np.arange(6 * k) / (6 * k)
        start.append(sum(len(r) for r in nodes))
        nodes.append(c + R * (k / n) * np.stack([np.cos(th), np.sin(th)], axis=-1))
    nodes = np.concatenate(nodes)
    elems = []
    for k in range(1, n + 1):
        n_in, n_out = 6 * (k - 1), 6 * k
        s_in, s_out = start[k - 1], start[k]
        if k == 1:
            elems.extend((s_in, s_out + j, s_out + (j + 1) % n_out) for j in range(n_out))
            continue
        i = j = 0
        while i < n_in or j < n_out:
            # advance the ring whose next node comes first in angle
            next_in = (i + 1) / n_in
            next_out = (j + 1) / n_out
            if j < n_out and (i >= n_in or next_out <= next_in):
                elems.append((s_in + i % n_in, s_out + j, s_out + (j + 1) % n_out))
                j += 1
            else:
                elems.append((s_in + i % n_in, s_out + j % n_out, s_in + (i + 1) % n_in))
                i += 1
    elems = _orient(nodes, np.array(elems, dtype=np.int64))
    s_out = start[n]
    nb = 6 * n
    edge_portion = {}
    for j in range(nb):
        a, b = s_out + j, s_out + (j + 1) % nb
        edge_portion[(min(a, b), max(a, b))] = portion.id
    return nodes, elems, edge_portion


def _square_grid(domain, target_h):
    pts = np.array([p.start for p in domain.portions], dtype=float)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    nx = int(np.ceil((hi[0] - lo[0]) / target_h - 1e-9))
    ny = int(np.ceil((hi[1] - lo[1]) / target_h - 1e-9))
    if min(nx, ny) < 2:
        raise ResolutionError(f"h = {target_h} resolves a side of '{domain.name}' "
                              "with fewer than 2 edges")
    xs = np.linspace(lo[0], hi[0], nx + 1)
    ys = np.linspace(lo[1], hi[1], ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel()], axis=-1)
    idx = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    elems = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    return nodes, elems, _edge_portions_by_location(domain, nodes, elems)


def _edge_portions_by_location(domain, nodes, elems):
    """Assign straight boundary edges to the segment containing both endpoints."""
    edge_portion = {}
    for K, e in _boundary_edge_list(elems):
        a, b = elems[K, EDGE_VERTS[e]]
        for p in domain.portions:
            if p.is_curved:
                continue
            d = _segment_distance(nodes[[a, b]], np.asarray(p.start, float),
                                  np.asarray(p.end, float))
            if np.all(d < 1e-12):
                edge_portion[(min(a, b), max(a, b))] = p.id
                break
    return edge_portion


def _segment_distance(x, a, b):
    d = b - a
    s = np.clip((x - a) @ d / (d @ d), 0.0, 1.0)
    return np.linalg.norm(x - (a + s[..., None] * d), axis=-1)


def _polyline_distance(x, poly):
    a = poly
    b = np.roll(poly, -1, axis=0)
    d = b - a
    s = np.einsum("pkj,kj->pk", x[:, None, :] - a[None], d) / np.einsum("kj,kj->k", d, d)
    s = np.clip(s, 0.0, 1.0)
    proj = a[None] + s[..., None] * d[None]
    return np.linalg.norm(x[:, None, :] - proj, axis=-1).min(axis=1)


def _delaunay_mesh(domain, target_h, smoothing=3):
    bpts, seg_ids = domain.boundary_polyline(target_h)
    nb = len(bpts)
    fine, _ = domain.boundary_polyline(target_h / 8)
    lo, hi = fine.min(axis=0), fine.max(axis=0)
    dy = target_h * np.sqrt(3.0) / 2
    rows = []
    for r, y in enumerate(np.arange(lo[1], hi[1] + dy, dy)):
        xs = np.arange(lo[0] + (0.5 * target_h if r % 2 else 0.0), hi[0] + target_h, target_h)
        rows.append(np.stack([xs, np.full_like(xs, y)], axis=-1))
    cand = np.concatenate(rows)
    inside = point_in_polygon(cand, fine)
    cand = cand[inside]
    cand = cand[_polyline_distance(cand, fine) >= 0.55 * target_h]

    edge_portion = {}
    for i in range(nb):
        a, b = i, (i + 1) % nb
        edge_portion[(min(a, b), max(a, b))] = int(seg_ids[i])

    def triangulate(pts):
        tri = Delaunay(pts).simplices.astype(np.int64)
        cent = pts[tri].mean(axis=1)
        tri = tri[point_in_polygon(cent, bpts)]
        return _orient(pts, tri)

    nodes = np.concatenate([bpts, cand])
    elems = triangulate(nodes)
    for _ in range(smoothing):
        # Laplacian smoothing of interior nodes, boundary nodes fixed
        n = len(nodes)
        acc = np.zeros_like(nodes)
        cnt = np.zeros(n)
        for e in range(3):
            a, b = elems[:, e], elems[:, (e + 1) % 3]
            np.add.at(acc, a, nodes[b])
            np.add.at(acc, b, nodes[a])
            np.add.at(cnt, a, 1)
            np.add.at(cnt, b, 1)
        new = nodes.copy()
        new[nb:] = acc[nb:] / cnt[nb:, None]
        cand_elems = triangulate(new)
        if _covers_boundary(cand_elems, edge_portion) and len(cand_elems) == len(elems):
            nodes, elems = new, cand_elems
        else:
            break
    if not _covers_boundary(elems, edge_portion):
        raise GeometryError(f"triangulation of '{domain.name}' lost a boundary edge")
    return nodes, elems, edge_portion


def _covers_boundary(elems, edge_portion):
    found = set()
    for K, e in _boundary_edge_list(elems):
        a, b = elems[K, EDGE_VERTS[e]]
        found.add((min(a, b), max(a, b)))
    return found == set(edge_portion)


def generate_affine_mesh(domain: DomainSpec, target_h: float) -> CurvedMesh:
    """Straight-sided triangulation of the polygon through quasi-uniform
    boundary points; every boundary vertex lies on the exact boundary."""
    if not target_h > 0:
        raise ResolutionError("target_h must be positive")
    domain.boundary_polyline(target_h)  # raises if a portion is under-resolved
    if domain.name == "disk":
        nodes, elems, edge_portion = _disk_rings(domain, target_h)
    elif domain.name == "square":
        nodes, elems, edge_portion = _square_grid(domain, target_h)
    else:
        nodes, elems, edge_portion = _delaunay_mesh(domain, target_h)
    faces = _tag_boundary(elems, edge_portion)
    return CurvedMesh(domain, nodes, elems, _straight_midpoints(nodes, elems), faces)


def snap_boundary(mesh: CurvedMesh, domain: Optional[DomainSpec] = None) -> CurvedMesh:
    """Move each boundary-edge midpoint control point onto the exact boundary
    via the chart of its portion; all other control points stay affine."""
    domain = domain or mesh.domain
    mids = _straight_midpoints(mesh.nodes, mesh.elements)
    for pid in np.unique(mesh.boundary_faces[:, 2]):
        portion = domain.portion(int(pid))
        sel = mesh.boundary_faces[mesh.boundary_faces[:, 2] == pid]
        if portion.is_curved:
            mids[sel[:, 0], sel[:, 1]] = portion.project(mids[sel[:, 0], sel[:, 1]])
    snapped = CurvedMesh(domain, mesh.nodes, mesh.elements, mids, mesh.boundary_faces)
    bad = np.flatnonzero(snapped.C_K >= 1.0)
    if bad.size:
        raise SnapError(f"element {bad[0]} has C_K = {snapped.C_K[bad[0]]:.3g} >= 1 "
                        "after snapping; refine the initial mesh", int(bad[0]))
    return snapped


def refine(mesh: CurvedMesh, domain: Optional[DomainSpec] = None) -> CurvedMesh:
    """Uniform quadrisection; new boundary vertices are placed on the exact
    boundary, then the result is re-snapped."""
    domain = domain or mesh.domain
    elems = mesh.elements
    E = len(elems)
    n0 = len(mesh.nodes)
    a = elems[:, EDGE_VERTS[:, 0]]
    b = elems[:, EDGE_VERTS[:, 1]]
    key = np.minimum(a, b) * n0 + np.maximum(a, b)
    uniq, inv = np.unique(key.ravel(), return_inverse=True)
    inv = inv.reshape(E, 3)
    lo, hi = np.divmod(uniq, n0)
    new_nodes = 0.5 * (mesh.nodes[lo] + mesh.nodes[hi])
    bf = mesh.boundary_faces
    bedge = inv[bf[:, 0], bf[:, 1]]
    for pid in np.unique(bf[:, 2]):
        sel = bedge[bf[:, 2] == pid]
        new_nodes[sel] = domain.portion(int(pid)).project(new_nodes[sel])
    nodes = np.concatenate([mesh.nodes, new_nodes])
    m = n0 + inv  # m[:, 0] = m01, m[:, 1] = m12, m[:, 2] = m20
    v0, v1, v2 = elems[:, 0], elems[:, 1], elems[:, 2]
    children = np.stack([
        np.stack([v0, m[:, 0], m[:, 2]], 1),
        np.stack([m[:, 0], v1, m[:, 1]], 1),
        np.stack([m[:, 2], m[:, 1], v2], 1),
        np.stack([m[:, 0], m[:, 1], m[:, 2]], 1),
    ], axis=1).reshape(-1, 3)
    # parent edge e -> (child, child edge) pairs covering it
    split = {0: ((0, 0), (1, 0)), 1: ((1, 1), (2, 1)), 2: ((2, 2), (0, 2))}
    faces = []
    for K, e, pid in bf:
        for c, ce in split[int(e)]:
            faces.append((4 * K + c, ce, pid))
    faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
    faces = faces[np.lexsort((faces[:, 1], faces[:, 0]))]
    affine = CurvedMesh(domain, nodes, children, _straight_midpoints(nodes, children), faces)
    return snap_boundary(affine, domain)


def mesh_sequence(domain: DomainSpec, target_h: float, levels: int):
    """Snapped initial mesh followed by ``levels - 1`` uniform refinements."""
    mesh = snap_boundary(generate_affine_mesh(domain, target_h), domain)
    out = [mesh]
    for _ in range(levels - 1):
        mesh = refine(mesh, domain)
        out.append(mesh)
    return out


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeshReport:
    max_C_K: float
    neighbor_ratio: float
    min_det: float
    max_det: float
    chart_mismatch: float
    n_elements: int
    n_interior_faces: int
    n_boundary_faces: int
    h: float

    def format(self):
        return "\n".join(f"{k}: {getattr(self, k)}" for k in self.__dataclass_fields__)


def validate(mesh: CurvedMesh, domain: Optional[DomainSpec] = None, order=8) -> MeshReport:
    domain = domain or mesh.domain
    rule = triangle_rule(order)
    _, J, _ = mesh.map(np.arange(mesh.n_elements), rule.points)
    det = np.linalg.det(J)
    f = mesh.interior_faces
    if len(f):
        r = mesh.h_K[f[:, 0]] / mesh.h_K[f[:, 1]]
        ratio = float(np.max(np.maximum(r, 1.0 / r)))
    else:
        ratio = 1.0
    mismatch = 0.0
    bf = mesh.boundary_faces
    if len(bf):
        s = edge_rule(order).points[:, 0]
        xhat = edge_to_reference(bf[:, 1, None], s[None, :])
        x, _, _ = mesh.map(bf[:, 0], xhat)
        for pid in np.unique(bf[:, 2]):
            sel = bf[:, 2] == pid
            d = domain.portion(int(pid)).distance(x[sel])
            mismatch = max(mismatch, float(d.max()))
    return MeshReport(
        max_C_K=float(mesh.C_K.max()), neighbor_ratio=ratio,
        min_det=float(det.min()), max_det=float(det.max()),
        chart_mismatch=mismatch, n_elements=mesh.n_elements,
        n_interior_faces=len(f), n_boundary_faces=len(bf), h=mesh.h)


def element_areas(mesh: CurvedMesh, order=8):
    rule = triangle_rule(order)
    _, J, _ = mesh.map(np.arange(mesh.n_elements), rule.points)
    return np.abs(np.linalg.det(J)) @ rule.weights


def boundary_length(mesh: CurvedMesh, order=8):
    rule = edge_rule(order)
    bf = mesh.boundary_faces
    xhat = edge_to_reference(bf[:, 1, None], rule.points[None, :, 0])
    _, J, _ = mesh.map(bf[:, 0], xhat)
    tang = np.einsum("fqij,fj->fqi", J, edge_direction(bf[:, 1]))
    return float(np.sum(np.linalg.norm(tang, axis=-1) * rule.weights))


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

def write_mesh(mesh: CurvedMesh, path):
    lines = ["dgmesh 1",
             f"{len(mesh.nodes)} {mesh.n_elements} {len(mesh.boundary_faces)}"]
    g = "%.17g"
    for i, (x, y) in enumerate(mesh.nodes):
        lines.append(f"{i} {g % x} {g % y}")
    for k in range(mesh.n_elements):
        v = mesh.elements[k]
        c = " ".join(g % t for t in mesh.midpoints[k].ravel())
        lines.append(f"{k} {v[0]} {v[1]} {v[2]} {c}")
    for K, e, pid in mesh.boundary_faces:
        lines.append(f"{K} {e} {pid}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path, domain: DomainSpec) -> CurvedMesh:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    if lines[0] != ["dgmesh", "1"]:
        raise GeometryError(f"{path}: not a dgmesh version 1 file")
    nn, ne, nb = (int(t) for t in lines[1])
    body = lines[2:]
    if len(body) != nn + ne + nb:
        raise GeometryError(f"{path}: expected {nn + ne + nb} records, found {len(body)}")
    nodes = np.array([[float(t) for t in r[1:3]] for r in body[:nn]])
    erows = body[nn:nn + ne]
    elems = np.array([[int(t) for t in r[1:4]] for r in erows], dtype=np.int64)
    mids = np.array([[float(t) for t in r[4:10]] for r in erows]).reshape(-1, 3, 2)
    faces = np.array([[int(t) for t in r] for r in body[nn + ne:]], dtype=np.int64)
    return CurvedMesh(domain, nodes, elems, mids, faces.reshape(-1, 3))
