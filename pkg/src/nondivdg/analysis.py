"""Solving, error norms, convergence orders and the consistency residual."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (PenaltyConfig, Penalties, assemble_matrix, b_star_weights,
                       evaluate_form, norm_weights, penalties)
from .coefficients import CoefficientField, ExactSolution
from .errors import ConfigurationError, SolverError
from .fe import DGSpace, boundary_face_quadrature, interior_face_quadrature, shape_table
from .fields import (AnalyticFunction, DiscreteFunction, EvalContext, Field, zero_jump)
from .quadrature import edge_direction, triangle_rule

RESIDUAL_TOL = 1e-10


def solve(system, tol=RESIDUAL_TOL):
    """Direct sparse LU with a relative residual check."""
    A = sp.csc_matrix(system.matrix)
    b = np.asarray(system.rhs, dtype=float)
    bn = np.linalg.norm(b)
    if bn == 0.0:
        return np.zeros_like(b)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SolverError(f"sparse factorisation failed: {exc}") from exc
    x = lu.solve(b)
    res = np.linalg.norm(A @ x - b) / bn
    if not np.isfinite(res) or res > tol:
        diag = np.abs(lu.U.diagonal())
        cond = diag.max() / max(diag.min(), np.finfo(float).tiny)
        raise SolverError(f"relative residual {res:.3e} exceeds {tol:.1e} "
                          f"(pivot ratio {cond:.3e})")
    return x


def as_field(space, v) -> Field:
    if isinstance(v, Field):
        return v
    if isinstance(v, ExactSolution):
        return AnalyticFunction.from_exact(v)
    return DiscreteFunction(space, np.asarray(v, dtype=float))


def norm_h_theta(space: DGSpace, v, theta=1.0, config: Optional[PenaltyConfig] = None,
                 pen: Optional[Penalties] = None, order=None):
    """``||v||_{h,theta}`` of a coefficient vector or field."""
    config = config or PenaltyConfig()
    if not 0.0 < theta <= 1.0:
        raise ConfigurationError(f"theta must lie in (0, 1], got {theta}")
    val = evaluate_form(space, norm_weights(theta, config.c_star), as_field(space, v),
                        config=config, pen=pen, order=order)
    return float(np.sqrt(max(val, 0.0)))


def error_order(p):
    return 2 * p + 4


def broken_errors(space: DGSpace, e: Field, order):
    """Broken ``(L2, H1, H2)`` norms of a field by volume quadrature."""
    rule = triangle_rule(order)
    mesh = space.mesh
    tot = np.zeros(3)
    for s in range(0, mesh.n_elements, 512):
        elems = np.arange(s, min(s + 512, mesh.n_elements))
        ctx = EvalContext.build(space, elems, rule.points)
        w = ctx.detJ * rule.weights
        v, g, h = e.traces(ctx)
        l2 = np.einsum("eq,eq->", w, v[..., 0] ** 2)
        h1 = np.einsum("eq,eqi->", w, g[..., 0, :] ** 2)
        h2 = np.einsum("eq,eqij->", w, h[..., 0, :, :] ** 2)
        tot += (l2, h1, h2)
    l2, h1, h2 = tot
    return np.sqrt(l2), np.sqrt(l2 + h1), np.sqrt(l2 + h1 + h2)


@dataclass(frozen=True)
class ErrorReport:
    h: float
    n_dofs: int
    err_L2: float
    err_H1_broken: float
    err_H2_broken: float
    err_h1norm: float
    norm_u_h1: float


def exact_field(coeffs: CoefficientField, jump="data"):
    """The exact solution as a field.

    ``jump='data'``: its boundary jump is the Dirichlet data (zero when the
    problem is homogeneous).  ``jump='zero'``: no boundary jump at all.
    """
    u = coeffs.exact_u
    if u is None:
        raise ConfigurationError(f"problem '{coeffs.name}' has no exact solution")
    g = coeffs.boundary_data_g
    if jump == "zero" or g is None:
        return AnalyticFunction.from_exact(u, zero_jump)
    g.check()

    def data(x, pid):
        val, grad, _ = g.evaluate(x, pid)
        return val, grad
    return AnalyticFunction.from_exact(u, data)


def errors_vs_exact(space: DGSpace, u_h, coeffs: CoefficientField,
                    config: Optional[PenaltyConfig] = None, pen=None, order=None):
    config = config or PenaltyConfig()
    order = order or error_order(space.p)
    pen = pen or penalties(space.mesh, config)
    uh = as_field(space, u_h)
    err = exact_field(coeffs, "data") - uh
    l2, h1, h2 = broken_errors(space, err, order)
    eh = norm_h_theta(space, err, 1.0, config, pen, order)
    nu = norm_h_theta(space, exact_field(coeffs, "zero"), 1.0, config, pen, order)
    return ErrorReport(space.mesh.h, space.n_dofs, l2, h1, h2, eh, nu)


def eoc(errs: Sequence):
    """Observed orders ``log(e_{i-1}/e_i) / log(h_{i-1}/h_i)`` from ``(h, e)`` pairs."""
    out = []
    for (h0, e0), (h1, e1) in zip(errs[:-1], errs[1:]):
        if e0 == e1:
            out.append(0.0)
        else:
            out.append(float(np.log(e0 / e1) / np.log(h0 / h1)))
    return out


@dataclass(frozen=True)
class EOCTable:
    rows: list          # ErrorReport per refinement
    expected_rate: float
    normalized: bool = False

    def errors(self):
        if self.normalized:
            return [r.err_h1norm / r.norm_u_h1 for r in self.rows]
        return [r.err_h1norm for r in self.rows]

    def rates(self):
        return eoc(list(zip([r.h for r in self.rows], self.errors())))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["refinement", "h", "dofs", "err_L2", "err_H1", "err_H2",
                    "err_h1norm", "eoc_h1norm"])
        rates = [""] + ["%.17g" % r for r in self.rates()]
        for i, (r, rate) in enumerate(zip(self.rows, rates)):
            eh = r.err_h1norm / r.norm_u_h1 if self.normalized else r.err_h1norm
            w.writerow([i, "%.17g" % r.h, r.n_dofs, "%.17g" % r.err_L2,
                        "%.17g" % r.err_H1_broken, "%.17g" % r.err_H2_broken,
                        "%.17g" % eh, rate])
        return buf.getvalue()

    def eoc_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["refinement", "h", "error", "eoc", "expected"])
        rates = [""] + ["%.17g" % r for r in self.rates()]
        for i, (r, e, rate) in enumerate(zip(self.rows, self.errors(), rates)):
            w.writerow([i, "%.17g" % r.h, "%.17g" % e, rate, "%.17g" % self.expected_rate])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# interpolation and consistency
# ---------------------------------------------------------------------------

def interpolate(space: DGSpace, fn, order=None):
    """Element-wise L2 projection of a callable ``fn(x) -> value``."""
    order = order or error_order(space.p)
    rule = triangle_rule(order)
    mesh = space.mesh
    out = np.empty((mesh.n_elements, space.n_local))
    for s in range(0, mesh.n_elements, 512):
        elems = np.arange(s, min(s + 512, mesh.n_elements))
        ctx = EvalContext.build(space, elems, rule.points)
        w = ctx.detJ * rule.weights
        phi = shape_table(space.p, rule.points).values
        M = np.einsum("eq,qa,qb->eab", w, phi, phi)
        b = np.einsum("eq,qa,eq->ea", w, phi, fn(ctx.x))
        out[elems] = np.linalg.solve(M, b[..., None])[..., 0]
    return out.ravel()


@dataclass(frozen=True)
class ConsistencyReport:
    residual: float
    h: float
    variant: str


def consistency_residual(space: DGSpace, w: ExactSolution, config=None,
                         curvature_terms=True, mode="interpolant", pen=None):
    """``Res(w) = B_*(w, w) - sum_K ||Lap w||_K^2``.

    ``mode='interpolant'`` evaluates on the element-wise L2 projection of
    ``w``; ``mode='exact'`` evaluates the forms on ``w`` itself.
    """
    config = config or PenaltyConfig()
    weights = dict(b_star_weights(curvature_terms))
    weights["lap"] = -1.0
    if mode == "interpolant":
        f = DiscreteFunction(space, interpolate(space, w.value))
    elif mode == "exact":
        f = AnalyticFunction.from_exact(w)
    else:
        raise ConfigurationError(f"unknown consistency mode '{mode}'")
    cfg = replace(config, curvature_terms=curvature_terms)
    res = evaluate_form(space, weights, f, config=cfg, pen=pen)
    return ConsistencyReport(res, space.mesh.h, "on" if curvature_terms else "off")


def consistency_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "h", "residual"])
    for r in reports:
        w.writerow([r.variant, "%.17g" % r.h, "%.17g" % r.residual])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# trace inverse estimate
# ---------------------------------------------------------------------------

def _face_h2_ratio(space, fq, elems, h_face):
    """``max_v ||v||_{H^2(F)} h_F^2 / ||v||_{L^2(F)}`` per face over basis functions."""
    mesh = space.mesh
    ctx = EvalContext.build(space, elems, fq.xhat)
    val, grad, hess = ctx.basis()
    # arclength derivatives along the mesh edge
    d = edge_direction(fq.local_edge)
    xs = np.einsum("fqij,fj->fqi", ctx.J, d)
    xss = np.einsum("fijk,fj,fk->fi", ctx.HF, d, d)[:, None, :]
    speed = np.linalg.norm(xs, axis=-1)
    tau = xs / speed[..., None]
    kappa = (xss - np.sum(xss * tau, axis=-1, keepdims=True) * tau) / speed[..., None] ** 2
    v1 = np.einsum("fqbi,fqi->fqb", grad, tau)
    v2 = np.einsum("fqi,fqbij,fqj->fqb", tau, hess, tau) + np.einsum("fqbi,fqi->fqb", grad, kappa)
    w = fq.weights[..., None]
    l2 = np.sum(w * val**2, axis=1)
    h2 = l2 + np.sum(w * v1**2, axis=1) + np.sum(w * v2**2, axis=1)
    return np.max(np.sqrt(h2 / l2) * h_face[:, None] ** 2, axis=1)


def trace_inverse_constant(space: DGSpace, order=None):
    """Largest ``||v||_{H^2(F)} h_F^2 / ||v||_{L^2(F)}`` over faces and basis functions."""
    mesh = space.mesh
    order = order or error_order(space.p)
    best = 0.0
    fi = interior_face_quadrature(mesh, order)
    if len(mesh.interior_faces):
        r = _face_h2_ratio(space, fi, fi.elem, mesh.h_interior)
        best = max(best, float(r.max()))
    fb = boundary_face_quadrature(mesh, order)
    if len(mesh.boundary_faces):
        r = _face_h2_ratio(space, fb, fb.elem, mesh.h_boundary)
        best = max(best, float(r.max()))
    return best
