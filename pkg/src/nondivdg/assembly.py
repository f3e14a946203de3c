"""Penalties, bilinear forms and right-hand side of the DG scheme.

Every form is a weighted sum of named terms evaluated by one engine:

volume
    ``hess``      <D^2u, D^2v>
    ``lap``       <Lap u, Lap v>
    ``gamma_al``  <gamma A:D^2u, Lap v>
interior faces
    ``face_lb``   <div_T grad_T {u}, [grad v.n]> + (u <-> v)
    ``face_gtdn`` -<grad_T {grad u.n}, [grad_T v]> - (u <-> v)   (also boundary)
    ``jump_normal``  mu <[grad u.n], [grad v.n]>
interior and boundary faces
    ``jump_tan``  mu <[grad_T u], [grad_T v]>
    ``jump_val``  eta <[u], [v]>
boundary faces
    ``curv_H``    <H du/dn, dv/dn>
    ``curv_tGt``  <grad_T u, grad n^T grad_T v>
    ``curv_nGt``  <du/dn, n^T grad n^T grad_T v>
    ``rhs_lb``    <div_T grad_T u, dv/dn>
    ``rhs_gtdn``  <grad_T (dv/dn), grad_T u>

In matrices the row index is the test function ``v`` and the column index the
trial function ``u``.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .coefficients import CoefficientField, gamma_of_matrix
from .errors import ConfigurationError, GeometryError
from .fe import (DGSpace, boundary_face_quadrature, default_order,
                 interior_face_quadrature)
from .fields import BASIS, EvalContext, Field
from .quadrature import triangle_rule
from .tangential import laplace_beltrami, normal_derivative, tangential_of_normal_derivative

VOLUME_TERMS = ("hess", "lap", "gamma_al")
FACE_TERMS = ("face_lb", "face_gtdn", "jump_normal", "jump_tan", "jump_val",
              "curv_H", "curv_tGt", "curv_nGt", "rhs_lb", "rhs_gtdn")
TERMS = VOLUME_TERMS + FACE_TERMS
CURVATURE_TERMS = ("curv_H", "curv_tGt", "curv_nGt")

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class PenaltyConfig:
    sigma: float = 1.0
    c_stab: float = 10.0
    c_H: Optional[float] = None
    c_star: float = 1.0
    theta: float = 1.0
    curvature_terms: bool = True
    quad_order: Optional[int] = None

    def __post_init__(self):
        if not self.sigma >= 1.0:
            raise ConfigurationError(f"sigma must be >= 1, got {self.sigma}")
        if not self.c_stab > 0.0:
            raise ConfigurationError(f"c_stab must be positive, got {self.c_stab}")
        if self.c_H is not None and not self.c_H >= 0.0:
            raise ConfigurationError(f"c_H must be nonnegative, got {self.c_H}")
        if not self.c_star > 0.0:
            raise ConfigurationError(f"c_star must be positive, got {self.c_star}")
        if not 0.0 < self.theta <= 1.0:
            raise ConfigurationError(f"theta must lie in (0, 1], got {self.theta}")


@dataclass(frozen=True)
class Penalties:
    mu_interior: np.ndarray
    eta_interior: np.ndarray
    mu_boundary: np.ndarray
    eta_boundary: np.ndarray
    c_H: float


def curvature_bounds(mesh, order=6):
    """``(max ||grad n^T||_2, min H)`` over curved boundary-face quadrature
    points, or ``(0, inf)`` if no boundary portion is curved."""
    bf = mesh.boundary_faces
    curved = np.array([mesh.domain.portion(int(pid)).is_curved for pid in bf[:, 2]],
                      dtype=bool)
    if not curved.any():
        return 0.0, np.inf
    q = boundary_face_quadrature(mesh, order, np.flatnonzero(curved))
    return float(np.linalg.norm(q.G, ord=2, axis=(-2, -1)).max()), float(q.H.min())


def auto_c_H(mesh):
    gmax, hmin = curvature_bounds(mesh)
    if gmax == 0.0 and np.isinf(hmin):
        return 0.0
    if hmin <= 0.0:
        raise GeometryError(
            f"mean curvature {hmin:.3g} <= 0 on a curved boundary portion")
    return gmax * (1.0 + 1.0 / (2.0 * hmin))


def penalties(mesh, config: PenaltyConfig) -> Penalties:
    """``mu_F = sigma (c_stab / h_F + c_H)``, ``eta_F = sigma / h_F^3``."""
    c_H = auto_c_H(mesh) if config.c_H is None else float(config.c_H)
    hi, hb = mesh.h_interior, mesh.h_boundary
    if np.any(hi <= 0) or np.any(hb <= 0):
        raise GeometryError("face size must be positive")
    s = config.sigma
    return Penalties(s * (config.c_stab / hi + c_H), s / hi**3,
                     s * (config.c_stab / hb + c_H), s / hb**3, c_H)


# ---------------------------------------------------------------------------
# term weights of the named forms
# ---------------------------------------------------------------------------

def _w(**kw):
    return {k: float(v) for k, v in kw.items() if v}


def _add(*ws, scale=None):
    out = {}
    for i, w in enumerate(ws):
        c = 1.0 if scale is None else scale[i]
        for k, v in w.items():
            out[k] = out.get(k, 0.0) + c * v
    return {k: v for k, v in out.items() if v}


def b_star_weights(curvature_terms=True):
    c = 1.0 if curvature_terms else 0.0
    return _w(hess=1, face_lb=1, face_gtdn=1, curv_H=c, curv_tGt=c, curv_nGt=c)


def j_weights():
    return _w(jump_tan=1, jump_val=1, jump_normal=1)


def b_theta_weights(theta, curvature_terms=True):
    return _add(b_star_weights(curvature_terms), _w(lap=1), j_weights(),
                scale=(theta, 1 - theta, 1))


def a_weights(curvature_terms=True):
    return _add(_w(gamma_al=1), b_theta_weights(0.5, curvature_terms), _w(lap=-1))


def norm_weights(theta, c_star):
    return _add(_w(hess=theta, lap=1 - theta, curv_H=theta / 2), j_weights(),
                scale=(1, c_star))


def stability_rhs_weights(theta):
    """Right side of the stability inequality: ``theta |v|^2 + (1-theta)
    sum ||Lap v||^2 + J/2 + theta/2 sum ||H^(1/2) dv/dn||^2``."""
    return _add(_w(hess=theta, lap=1 - theta, curv_H=theta / 2), j_weights(),
                scale=(1, 0.5))


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------

def worker_count():
    try:
        n = int(os.environ.get("DG_THREADS", "1"))
    except ValueError:
        raise ConfigurationError("DG_THREADS must be an integer") from None
    if n < 0:
        raise ConfigurationError("DG_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _map_chunks(fn, n, chunk):
    starts = list(range(0, n, chunk))
    workers = min(worker_count(), max(len(starts), 1))
    if workers <= 1:
        return [fn(slice(s, min(s + chunk, n))) for s in starts]
    with ThreadPoolExecutor(workers) as pool:
        # map preserves order, so reductions stay deterministic
        return list(pool.map(lambda s: fn(slice(s, min(s + chunk, n))), starts))


def _contract(w, T, S):
    """``sum_{q,f} w[e,q] T[e,q,a,f] S[e,q,b,f]`` for ``T, S`` lists of
    ``(E, Q, m)`` features."""
    if not T:
        return None
    T = np.stack(T, axis=-1) * w[:, :, None, None]
    S = np.stack(S, axis=-1)
    E, Q, a, f = T.shape
    b = S.shape[2]
    T = T.transpose(0, 2, 1, 3).reshape(E, a, Q * f)
    S = S.transpose(0, 1, 3, 2).reshape(E, Q * f, b)
    return T @ S


def _volume_chunk(space, weights, test, trial, coeffs, rule, sl):
    elems = np.arange(space.mesh.n_elements)[sl]
    ctx = EvalContext.build(space, elems, rule.points)
    w = ctx.detJ * rule.weights
    tv, tg, th = test.traces(ctx)
    uv, ug, uh = trial.traces(ctx) if trial is not test else (tv, tg, th)
    T, S = [], []
    if "hess" in weights:
        c = weights["hess"]
        for (i, j, s) in ((0, 0, 1.0), (0, 1, SQRT2), (1, 1, 1.0)):
            T.append(c * s * th[..., i, j])
            S.append(s * uh[..., i, j])
    if "lap" in weights or "gamma_al" in weights:
        tl = th[..., 0, 0] + th[..., 1, 1]
        if "lap" in weights:
            T.append(weights["lap"] * tl)
            S.append(uh[..., 0, 0] + uh[..., 1, 1])
        if "gamma_al" in weights:
            if coeffs is None:
                raise ConfigurationError("gamma_al term needs a coefficient field")
            A = coeffs.A(ctx.x)
            al = gamma_of_matrix(A)[..., None] * np.einsum("eqij,eqmij->eqm", A, uh)
            T.append(weights["gamma_al"] * tl)
            S.append(al)
    return _contract(w, T, S)


def _side_quantities(val, grad, hess, n, t, H, G):
    lap = hess[..., 0, 0] + hess[..., 1, 1]
    return dict(
        val=val,
        dn=normal_derivative(grad, n),
        dt=np.sum(grad * t, axis=-1),
        lb=laplace_beltrami(lap, grad, hess, n, H, G),
        gtdn=tangential_of_normal_derivative(grad, hess, n, G),
    )


def _combine(a, b, sign, basis):
    """Two-sided quantity: sides concatenated for the basis, summed otherwise."""
    if basis:
        return np.concatenate([a, sign * b], axis=-1)
    return a + sign * b


def _interior_chunk(space, weights, test, trial, pen, order, sl):
    fq = interior_face_quadrature(space.mesh, order, np.arange(len(space.mesh.interior_faces))[sl])
    n, t = fq.normal[:, :, None], fq.tangent[:, :, None]
    H, G = fq.H[:, :, None], fq.G[:, :, None]
    ctxK = EvalContext.build(space, fq.elem, fq.xhat)
    ctxP = EvalContext.build(space, fq.elem_other, fq.xhat_other)

    def quantities(f):
        qK = _side_quantities(*f.traces(ctxK), n, t, H, G)
        qP = _side_quantities(*f.traces(ctxP), n, t, H, G)
        b = f.is_basis
        return dict(
            jval=_combine(qK["val"], qP["val"], -1.0, b),
            jdn=_combine(qK["dn"], qP["dn"], -1.0, b),
            jdt=_combine(qK["dt"], qP["dt"], -1.0, b),
            alb=0.5 * _combine(qK["lb"], qP["lb"], 1.0, b),
            agtdn=0.5 * _combine(qK["gtdn"], qP["gtdn"], 1.0, b),
        )

    qt = quantities(test)
    qu = qt if trial is test else quantities(trial)
    mu = pen.mu_interior[sl][:, None, None]
    eta = pen.eta_interior[sl][:, None, None]
    T, S = [], []
    if "face_lb" in weights:
        c = weights["face_lb"]
        T += [c * qt["alb"], c * qt["jdn"]]
        S += [qu["jdn"], qu["alb"]]
    if "face_gtdn" in weights:
        c = -weights["face_gtdn"]
        T += [c * qt["jdt"], c * qt["agtdn"]]
        S += [qu["agtdn"], qu["jdt"]]
    if "jump_tan" in weights:
        T.append(weights["jump_tan"] * mu * qt["jdt"])
        S.append(qu["jdt"])
    if "jump_normal" in weights:
        T.append(weights["jump_normal"] * mu * qt["jdn"])
        S.append(qu["jdn"])
    if "jump_val" in weights:
        T.append(weights["jump_val"] * eta * qt["jval"])
        S.append(qu["jval"])
    return _contract(fq.weights, T, S)


def _boundary_chunk(space, weights, test, trial, pen, order, sl, curvature_terms):
    fq = boundary_face_quadrature(space.mesh, order, np.arange(len(space.mesh.boundary_faces))[sl])
    n, t = fq.normal[:, :, None], fq.tangent[:, :, None]
    H, G = fq.H[:, :, None], fq.G[:, :, None]
    ctx = EvalContext.build(space, fq.elem, fq.xhat, fq.portion)

    def quantities(f):
        val, grad, hess = f.traces(ctx)
        q = _side_quantities(val, grad, hess, n, t, H, G)
        q["jval"], q["jdt"] = f.boundary_jump(ctx, val, grad, t)
        return q

    qt = quantities(test)
    qu = qt if trial is test else quantities(trial)
    mu = pen.mu_boundary[sl][:, None, None]
    eta = pen.eta_boundary[sl][:, None, None]
    tGt = np.einsum("fqi,fqij,fqj->fq", fq.tangent, fq.G, fq.tangent)[:, :, None]
    nGt = np.einsum("fqi,fqij,fqj->fq", fq.normal, fq.G, fq.tangent)[:, :, None]
    T, S = [], []
    if "face_gtdn" in weights:
        c = -weights["face_gtdn"]
        T += [c * qt["dt"], c * qt["gtdn"]]
        S += [qu["gtdn"], qu["dt"]]
    # on flat faces the curvature terms are exact zeros; skipping them keeps the
    # contraction, and hence the rounding, identical to the polytopal method
    if curvature_terms and (fq.H.any() or fq.G.any()):
        if "curv_H" in weights:
            T.append(weights["curv_H"] * H * qt["dn"])
            S.append(qu["dn"])
        if "curv_tGt" in weights:
            T.append(weights["curv_tGt"] * tGt * qt["dt"])
            S.append(qu["dt"])
        if "curv_nGt" in weights:
            T.append(weights["curv_nGt"] * nGt * qt["dt"])
            S.append(qu["dn"])
    if "jump_tan" in weights:
        T.append(weights["jump_tan"] * mu * qt["jdt"])
        S.append(qu["jdt"])
    if "jump_val" in weights:
        T.append(weights["jump_val"] * eta * qt["jval"])
        S.append(qu["jval"])
    if "rhs_lb" in weights:
        T.append(weights["rhs_lb"] * qt["dn"])
        S.append(qu["lb"])
    if "rhs_gtdn" in weights:
        T.append(weights["rhs_gtdn"] * qt["gtdn"])
        S.append(qu["dt"])
    return _contract(fq.weights, T, S)


@dataclass(frozen=True)
class LocalForms:
    """Local contributions: ``volume (E, a, b)``, ``interior (Fi, a', b')``,
    ``boundary (Fb, a, b)``; ``None`` where no term is active."""
    volume: Optional[np.ndarray]
    interior: Optional[np.ndarray]
    boundary: Optional[np.ndarray]


def _cat(parts):
    parts = [p for p in parts if p is not None]
    return np.concatenate(parts) if parts else None


def local_forms(space: DGSpace, weights, test: Field = BASIS, trial: Field = BASIS,
                coeffs: Optional[CoefficientField] = None,
                config: Optional[PenaltyConfig] = None, pen: Optional[Penalties] = None,
                order: Optional[int] = None, chunk=512) -> LocalForms:
    config = config or PenaltyConfig()
    unknown = set(weights) - set(TERMS)
    if unknown:
        raise ConfigurationError(f"unknown form terms {sorted(unknown)}")
    weights = {k: v for k, v in weights.items() if v}
    order = order or config.quad_order or default_order(space.p)
    mesh = space.mesh
    vol_w = {k: v for k, v in weights.items() if k in VOLUME_TERMS}
    face_w = {k: v for k, v in weights.items() if k in FACE_TERMS}
    if face_w and pen is None:
        pen = penalties(mesh, config)
    rule = triangle_rule(order)
    vol = inter = bdry = None
    if getattr(test, "boundary_only", False) or getattr(trial, "boundary_only", False):
        vol_w = {}
        face_w = {k: v for k, v in face_w.items() if k not in ("face_lb", "jump_normal")}
        interior_ok = False
    else:
        interior_ok = True
    if vol_w:
        vol = _cat(_map_chunks(
            lambda sl: _volume_chunk(space, vol_w, test, trial, coeffs, rule, sl),
            mesh.n_elements, chunk))
    int_w = {k: v for k, v in face_w.items()
             if k in ("face_lb", "face_gtdn", "jump_normal", "jump_tan", "jump_val")}
    if int_w and interior_ok and len(mesh.interior_faces):
        inter = _cat(_map_chunks(
            lambda sl: _interior_chunk(space, int_w, test, trial, pen, order, sl),
            len(mesh.interior_faces), chunk))
    bdry_w = {k: v for k, v in face_w.items() if k not in ("face_lb", "jump_normal")}
    if bdry_w and len(mesh.boundary_faces):
        bdry = _cat(_map_chunks(
            lambda sl: _boundary_chunk(space, bdry_w, test, trial, pen, order, sl,
                                       config.curvature_terms),
            len(mesh.boundary_faces), chunk))
    return LocalForms(vol, inter, bdry)


def assemble_matrix(space: DGSpace, weights, coeffs=None, config=None, pen=None,
                    order=None) -> sp.bsr_matrix:
    """Global block-sparse matrix of a weighted combination of terms."""
    loc = local_forms(space, weights, BASIS, BASIS, coeffs, config, pen, order)
    mesh = space.mesh
    nb = space.n_local
    E = mesh.n_elements
    diag = np.zeros((E, nb, nb))
    if loc.volume is not None:
        diag += loc.volume
    if loc.boundary is not None:
        np.add.at(diag, mesh.boundary_faces[:, 0], loc.boundary)
    rows = [np.arange(E)]
    cols = [np.arange(E)]
    blocks = [diag]
    if loc.interior is not None:
        f = mesh.interior_faces
        M = loc.interior
        np.add.at(diag, f[:, 0], M[:, :nb, :nb])
        np.add.at(diag, f[:, 1], M[:, nb:, nb:])
        rows += [f[:, 0], f[:, 1]]
        cols += [f[:, 1], f[:, 0]]
        blocks += [M[:, :nb, nb:], M[:, nb:, :nb]]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = np.concatenate(blocks)
    order_ = np.lexsort((cols, rows))
    indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=E))])
    return sp.bsr_matrix((data[order_], cols[order_], indptr), shape=(E * nb, E * nb))


def assemble_vector(space: DGSpace, weights, trial: Field, coeffs=None, config=None,
                    pen=None, order=None):
    """``l(v) = form(trial, v)`` for every basis function ``v``."""
    loc = local_forms(space, weights, BASIS, trial, coeffs, config, pen, order)
    mesh = space.mesh
    nb = space.n_local
    out = np.zeros((mesh.n_elements, nb))
    if loc.volume is not None:
        out += loc.volume[..., 0]
    if loc.boundary is not None:
        np.add.at(out, mesh.boundary_faces[:, 0], loc.boundary[..., 0])
    if loc.interior is not None:
        f = mesh.interior_faces
        np.add.at(out, f[:, 0], loc.interior[:, :nb, 0])
        np.add.at(out, f[:, 1], loc.interior[:, nb:, 0])
    return out.ravel()


def evaluate_form(space: DGSpace, weights, u: Field, v: Optional[Field] = None,
                  coeffs=None, config=None, pen=None, order=None):
    """Scalar ``form(u, v)`` for two (non-basis) fields; ``v`` defaults to ``u``."""
    v = u if v is None else v
    loc = local_forms(space, weights, v, u, coeffs, config, pen, order)
    return float(sum(np.sum(part) for part in (loc.volume, loc.interior, loc.boundary)
                     if part is not None))


# ---------------------------------------------------------------------------
# named forms
# ---------------------------------------------------------------------------

def _curv(config):
    return (config or PenaltyConfig()).curvature_terms


def assemble_B_star(space, config=None, pen=None):
    return assemble_matrix(space, b_star_weights(_curv(config)), config=config, pen=pen)


def assemble_J(space, config=None, pen=None):
    return assemble_matrix(space, j_weights(), config=config, pen=pen)


def assemble_B_theta(space, theta, config=None, pen=None):
    return assemble_matrix(space, b_theta_weights(theta, _curv(config)), config=config,
                           pen=pen)


def assemble_A(space, coeffs, config=None, pen=None):
    return assemble_matrix(space, a_weights(_curv(config)), coeffs=coeffs, config=config,
                           pen=pen)


def assemble_rhs(space, coeffs: CoefficientField, config=None, g=None, pen=None,
                 order=None):
    """``sum_K <gamma f, Lap v>``, plus the boundary-data terms when ``g``
    (a :class:`~nondivdg.coefficients.BoundaryData`) is given."""
    config = config or PenaltyConfig()
    order = order or config.quad_order or default_order(space.p)
    mesh = space.mesh
    rule = triangle_rule(order)

    def chunk(sl):
        elems = np.arange(mesh.n_elements)[sl]
        ctx = EvalContext.build(space, elems, rule.points)
        w = ctx.detJ * rule.weights
        _, _, hess = ctx.basis()
        lap = hess[..., 0, 0] + hess[..., 1, 1]
        gf = gamma_of_matrix(coeffs.A(ctx.x)) * coeffs.f(ctx.x)
        return np.einsum("eq,eq,eqb->eb", w, gf, lap)

    b = np.concatenate(_map_chunks(chunk, mesh.n_elements, 512)).ravel()
    if g is not None:
        b = b + assemble_vector(space, _w(jump_tan=1, jump_val=1, rhs_lb=-0.5, rhs_gtdn=-0.5),
                                boundary_data_field(g), config=config, pen=pen, order=order)
    return b


class BoundaryDataField(Field):
    """The boundary data ``g`` as a field on boundary faces (zero off its portions)."""
    boundary_only = True

    def __init__(self, g):
        g.check()
        self.g = g

    def traces(self, ctx):
        val = np.zeros(ctx.x.shape[:-1])
        grad = np.zeros(ctx.x.shape)
        hess = np.zeros(ctx.x.shape + (2,))
        for pid in np.unique(ctx.portion):
            sel = ctx.portion == pid
            val[sel], grad[sel], hess[sel] = self.g.evaluate(ctx.x[sel], int(pid))
        return val[..., None], grad[..., None, :], hess[..., None, :, :]


def boundary_data_field(g) -> BoundaryDataField:
    return BoundaryDataField(g)


# ---------------------------------------------------------------------------
# system
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DGSystem:
    matrix: sp.spmatrix
    rhs: np.ndarray
    space: DGSpace
    penalties: Penalties
    config: PenaltyConfig


def assemble_system(space, coeffs: CoefficientField, config=None) -> DGSystem:
    config = config or PenaltyConfig()
    pen = penalties(space.mesh, config)
    A = assemble_A(space, coeffs, config, pen)
    b = assemble_rhs(space, coeffs, config, coeffs.boundary_data_g, pen)
    return DGSystem(A.tocsc(), b, space, pen, config)


# ---------------------------------------------------------------------------
# stability check used for penalty calibration
# ---------------------------------------------------------------------------

def stability_violations(space, config, thetas=(0.25, 0.5, 1.0), kappa=2.0, n_vectors=100,
                         seed=0, pen=None):
    """Count random vectors violating
    ``kappa B_theta(v, v) >= theta |v|^2 + (1-theta) ||Lap v||^2 + J/2 + theta/2 ||H^.5 dv/dn||^2``."""
    pen = pen or penalties(space.mesh, config)
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((space.n_dofs, n_vectors))
    bad = 0
    for theta in thetas:
        L = assemble_matrix(space, b_theta_weights(theta, config.curvature_terms),
                            config=config, pen=pen)
        R = assemble_matrix(space, stability_rhs_weights(theta), config=config, pen=pen)
        lhs = kappa * np.einsum("ik,ik->k", V, L @ V)
        rhs = np.einsum("ik,ik->k", V, R @ V)
        bad += int(np.count_nonzero(lhs < rhs))
    return bad


def stability_eigenvalue(space, config, thetas=(0.25, 0.5, 1.0), kappa=2.0, pen=None):
    """Smallest generalized eigenvalue of ``(kappa sym B_theta, R_theta)`` over
    ``thetas``, with ``R_theta`` the right side of the stability inequality.
    A value ``>= 1`` means the inequality holds for every ``v``.  Dense, so
    meant for coarse meshes."""
    import scipy.linalg as la
    pen = pen or penalties(space.mesh, config)
    worst = np.inf
    for theta in thetas:
        L = assemble_matrix(space, b_theta_weights(theta, config.curvature_terms),
                            config=config, pen=pen).toarray()
        R = assemble_matrix(space, stability_rhs_weights(theta), config=config,
                            pen=pen).toarray()
        R = 0.5 * (R + R.T)
        lam = la.eigh(kappa * 0.5 * (L + L.T), R, eigvals_only=True,
                      subset_by_index=[0, 0])
        worst = min(worst, float(lam[0]))
    return worst


def calibrate_penalty(space, config: PenaltyConfig, max_factor=8, eigen=True,
                      **kw) -> PenaltyConfig:
    """Double ``c_stab`` (up to ``max_factor`` times the start value) until the
    random-vector stability check passes and, with ``eigen``, the smallest
    generalized eigenvalue of the stability pencil is at least 1."""
    c0 = config.c_stab
    cfg = config
    kappa = kw.get("kappa", 2.0)
    thetas = kw.get("thetas", (0.25, 0.5, 1.0))

    def ok(c):
        if stability_violations(space, c, **kw):
            return False
        return not eigen or stability_eigenvalue(space, c, thetas, kappa) >= 1.0

    while not ok(cfg):
        if cfg.c_stab * 2 > c0 * max_factor:
            break
        cfg = replace(cfg, c_stab=cfg.c_stab * 2)
    return cfg
