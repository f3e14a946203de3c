"""Problem data: coefficient fields, the Cordes condition, and boundary geometry.

Positions are numpy arrays whose last axis has length ``dim``; every evaluator
broadcasts over the leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (ConfigurationError, CordesError, GeometryError,
                     InvalidCoefficientError, ResolutionError)

Array = np.ndarray
ScalarFn = Callable[[Array], Array]


# ---------------------------------------------------------------------------
# coefficient fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactSolution:
    """A manufactured solution with analytic first and second derivatives."""
    value: ScalarFn
    grad: ScalarFn
    hess: ScalarFn


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet data ``g`` given as the trace of an ambient function.

    ``value``, ``grad`` and ``hess`` are evaluated at mesh boundary points; the
    tangential derivatives of ``g`` are obtained from them together with the
    chart geometry.  ``portions`` restricts the nonzero data to the listed
    boundary portion ids (``None`` means every portion).
    """
    value: ScalarFn
    grad: Optional[ScalarFn] = None
    hess: Optional[ScalarFn] = None
    portions: Optional[frozenset] = None

    def check(self):
        if self.grad is None or self.hess is None:
            raise ConfigurationError(
                "boundary data needs gradient and Hessian evaluators for its "
                "tangential derivatives")

    def evaluate(self, x, portion_id):
        """Return ``(g, grad g, D^2 g)`` at points ``x`` on portion ``portion_id``."""
        self.check()
        x = np.asarray(x, dtype=float)
        if self.portions is not None and portion_id not in self.portions:
            shape = x.shape[:-1]
            d = x.shape[-1]
            return np.zeros(shape), np.zeros(shape + (d,)), np.zeros(shape + (d, d))
        return self.value(x), self.grad(x), self.hess(x)


@dataclass(frozen=True)
class CoefficientField:
    """Operator data for ``A : D^2 u = f``.

    ``A`` maps positions ``(..., d)`` to matrices ``(..., d, d)``.
    """
    dim: int
    A: Callable[[Array], Array]
    f: ScalarFn
    exact_u: Optional[ExactSolution] = None
    boundary_data_g: Optional[BoundaryData] = None
    name: str = "custom"

    def check(self, samples):
        """Check symmetry, ellipticity and (if available) the manufactured
        solution at ``samples``.  Returns the max residual of ``A:D^2u - f``."""
        samples = np.asarray(samples, dtype=float)
        A = self.A(samples)
        if not np.allclose(A, np.swapaxes(A, -1, -2), atol=1e-13):
            raise InvalidCoefficientError("coefficient matrix is not symmetric")
        if np.linalg.eigvalsh(A).min() <= 0.0:
            raise InvalidCoefficientError("coefficient matrix is not elliptic")
        if self.exact_u is None:
            return 0.0
        lhs = np.einsum("...ij,...ij->...", A, self.exact_u.hess(samples))
        return float(np.max(np.abs(lhs - self.f(samples))))


@dataclass(frozen=True)
class CordesReport:
    epsilon: float
    worst_ratio: float
    worst_point: Array


def frobenius_sq(A):
    return np.einsum("...ij,...ij->...", A, A)


def gamma_of_matrix(A):
    """``Tr A / |A|^2`` for a stack of matrices."""
    A = np.asarray(A, dtype=float)
    tr = np.trace(A, axis1=-2, axis2=-1)
    if np.any(tr <= 0.0):
        raise InvalidCoefficientError("coefficient matrix has nonpositive trace")
    return tr / frobenius_sq(A)


def gamma(coeffs: CoefficientField, x):
    """Renormalisation weight ``Tr A(x) / |A(x)|^2``."""
    return gamma_of_matrix(coeffs.A(np.asarray(x, dtype=float)))


def cordes_ratio(A):
    A = np.asarray(A, dtype=float)
    tr = np.trace(A, axis1=-2, axis2=-1)
    if np.any(tr <= 0.0):
        raise InvalidCoefficientError("coefficient matrix has nonpositive trace")
    return frobenius_sq(A) / tr**2


def check_cordes(coeffs: CoefficientField, samples) -> CordesReport:
    """Largest ``eps`` in (0, 1] with ``|A|^2/(Tr A)^2 <= 1/(d-1+eps)`` at all samples.

    Raises :class:`CordesError` (carrying the report) when no such ``eps`` exists.
    """
    samples = np.asarray(samples, dtype=float).reshape(-1, coeffs.dim)
    if samples.shape[0] == 0:
        raise ConfigurationError("check_cordes needs at least one sample point")
    ratio = cordes_ratio(coeffs.A(samples))
    k = int(np.argmax(ratio))
    worst = float(ratio[k])
    eps = 1.0 / worst - (coeffs.dim - 1)
    report = CordesReport(epsilon=min(eps, 1.0), worst_ratio=worst,
                          worst_point=samples[k].copy())
    if eps <= 0.0:
        raise CordesError(
            f"Cordes condition violated at {samples[k]}: ratio {worst:.6g} "
            f"exceeds 1/(d-1) = {1.0 / (coeffs.dim - 1):.6g}", report)
    return report


# ---------------------------------------------------------------------------
# boundary portions
# ---------------------------------------------------------------------------

def _rot90(v):
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


@dataclass(frozen=True)
class BoundaryPortion:
    """One smooth piece of the boundary, traversed counter-clockwise."""
    id: int

    kind = "flat"

    @property
    def is_curved(self):
        return self.kind == "curved"

    def project(self, x):  # pragma: no cover - interface
        raise NotImplementedError

    def normal(self, x):  # pragma: no cover - interface
        raise NotImplementedError

    def curvature(self, x):  # pragma: no cover - interface
        raise NotImplementedError

    def distance(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.project(x), axis=-1)

    def sample(self, n):  # pragma: no cover - interface
        raise NotImplementedError

    @property
    def length(self):  # pragma: no cover - interface
        raise NotImplementedError


@dataclass(frozen=True)
class Segment(BoundaryPortion):
    """Straight portion from ``start`` to ``end``; the outward normal points to
    the right of the direction of travel."""
    start: tuple = (0.0, 0.0)
    end: tuple = (1.0, 0.0)

    kind = "flat"

    @property
    def _dir(self):
        d = np.subtract(self.end, self.start).astype(float)
        return d / np.linalg.norm(d)

    @property
    def length(self):
        return float(np.linalg.norm(np.subtract(self.end, self.start)))

    def project(self, x):
        x = np.asarray(x, dtype=float)
        a = np.asarray(self.start, dtype=float)
        d = self._dir
        s = (x - a) @ d
        return a + s[..., None] * d

    def normal(self, x):
        x = np.asarray(x, dtype=float)
        d = self._dir
        n = np.array([d[1], -d[0]])
        return np.broadcast_to(n, x.shape).copy()

    def curvature(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        return np.zeros(shape), np.zeros(shape + (2, 2))

    def sample(self, n):
        s = np.linspace(0.0, 1.0, n + 1)[:, None]
        return (1 - s) * np.asarray(self.start, float) + s * np.asarray(self.end, float)


@dataclass(frozen=True)
class CircularArc(BoundaryPortion):
    """Arc of the circle ``|x - center| = radius`` from angle ``theta0`` to
    ``theta1`` (counter-clockwise), described by the convex level set
    ``phi(x) = |x - center|^2 - radius^2``."""
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    theta0: float = 0.0
    theta1: float = 2 * np.pi

    kind = "curved"

    @property
    def length(self):
        return self.radius * (self.theta1 - self.theta0)

    @property
    def closed(self):
        return np.isclose(self.theta1 - self.theta0, 2 * np.pi)

    def levelset(self, x):
        y = np.asarray(x, dtype=float) - np.asarray(self.center, float)
        return np.sum(y * y, axis=-1) - self.radius**2

    def levelset_grad(self, x):
        return 2.0 * (np.asarray(x, dtype=float) - np.asarray(self.center, float))

    def levelset_hess(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(2.0 * np.eye(2), x.shape[:-1] + (2, 2)).copy()

    def project(self, x):
        x = np.asarray(x, dtype=float)
        c = np.asarray(self.center, float)
        y = x - c
        r = np.linalg.norm(y, axis=-1, keepdims=True)
        if np.any(r < 1e-14):
            raise GeometryError("cannot project the arc centre onto the arc")
        return c + self.radius * y / r

    def normal(self, x):
        p = self.project(x)
        return levelset_normal(self.levelset_grad(p))

    def curvature(self, x):
        p = self.project(x)
        return levelset_curvature(self.levelset_grad(p), self.levelset_hess(p))

    def sample(self, n):
        th = np.linspace(self.theta0, self.theta1, n + 1)
        c = np.asarray(self.center, float)
        return c + self.radius * np.stack([np.cos(th), np.sin(th)], axis=-1)


def levelset_normal(grad_phi, tol=1e-12):
    g = np.asarray(grad_phi, dtype=float)
    norm = np.linalg.norm(g, axis=-1, keepdims=True)
    if np.any(norm < tol):
        raise GeometryError("level-set gradient vanishes on the boundary")
    return g / norm


def levelset_curvature(grad_phi, hess_phi, tol=1e-12):
    """Mean curvature and ``grad n^T`` of the normal field ``grad phi/|grad phi|``.

    ``G[i, j] = D_i n_j = (|g|^2 phi_ij - g_j sum_k g_k phi_ik) / |g|^3``.
    """
    g = np.asarray(grad_phi, dtype=float)
    P = np.asarray(hess_phi, dtype=float)
    gn = np.linalg.norm(g, axis=-1)
    if np.any(gn < tol):
        raise GeometryError("level-set gradient vanishes on the boundary")
    Pg = np.einsum("...ik,...k->...i", P, g)
    G = (gn[..., None, None] ** 2 * P - Pg[..., :, None] * g[..., None, :]) \
        / gn[..., None, None] ** 3
    return np.trace(G, axis1=-2, axis2=-1), G


def portion_normal(portion: BoundaryPortion, x):
    """Outward unit normal of ``portion`` at (or near) ``x``."""
    return portion.normal(x)


def portion_curvature(portion: BoundaryPortion, x):
    """``(H, grad n^T)`` of ``portion`` at ``x``; ``H = Tr(grad n^T)``."""
    return portion.curvature(x)


@dataclass(frozen=True)
class DomainSpec:
    """A piecewise smooth domain; ``portions`` traverse the boundary
    counter-clockwise and consecutive portions share endpoints."""
    name: str
    portions: tuple

    def portion(self, pid) -> BoundaryPortion:
        for p in self.portions:
            if p.id == pid:
                return p
        raise KeyError(pid)

    @property
    def is_polytopal(self):
        return not any(p.is_curved for p in self.portions)

    def boundary_polyline(self, h):
        """Quasi-uniform boundary points.  Returns ``(points, seg_portion)`` where
        segment ``i`` joins ``points[i]`` and ``points[(i+1) % len]``."""
        pts, ids = [], []
        for p in self.portions:
            n = int(np.ceil(p.length / h - 1e-9))
            if n < 2:
                raise ResolutionError(
                    f"h = {h} resolves portion {p.id} of '{self.name}' with "
                    f"fewer than 2 edges")
            s = p.sample(n)
            pts.append(s[:-1])
            ids.extend([p.id] * n)
        return np.concatenate(pts), np.asarray(ids)


def point_in_polygon(points, polygon):
    """Crossing-number test; ``polygon`` is an (m, 2) closed loop (no repeat)."""
    points = np.asarray(points, dtype=float)
    x, y = points[..., 0][..., None], points[..., 1][..., None]
    a = polygon
    b = np.roll(polygon, -1, axis=0)
    cond = (a[:, 1] > y) != (b[:, 1] > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = a[:, 0] + (y - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
    return np.count_nonzero(cond & (x < xc), axis=-1) % 2 == 1


# ---------------------------------------------------------------------------
# built-in domains and problems
# ---------------------------------------------------------------------------

KEYHOLE_HALF_WIDTH = 1.0 / np.sqrt(2.0)


def disk_domain():
    return DomainSpec("disk", (CircularArc(1),))


def keyhole_domain():
    a = KEYHOLE_HALF_WIDTH
    return DomainSpec("keyhole", (
        CircularArc(1, theta0=-np.pi / 4, theta1=5 * np.pi / 4),
        Segment(2, start=(-a, -a), end=(-a, -3.0)),
        Segment(3, start=(-a, -3.0), end=(a, -3.0)),
        Segment(4, start=(a, -3.0), end=(a, -a)),
    ))


def square_domain():
    return DomainSpec("square", (
        Segment(1, start=(0.0, 0.0), end=(1.0, 0.0)),
        Segment(2, start=(1.0, 0.0), end=(1.0, 1.0)),
        Segment(3, start=(1.0, 1.0), end=(0.0, 1.0)),
        Segment(4, start=(0.0, 1.0), end=(0.0, 0.0)),
    ))


DOMAINS = {"disk": disk_domain, "keyhole": keyhole_domain, "square": square_domain}


def get_domain(name) -> DomainSpec:
    try:
        return DOMAINS[name]()
    except KeyError:
        raise ConfigurationError(f"unknown domain '{name}'") from None


def sine_bump():
    """``u = sin(pi (x^2 + y^2)) / 4``, which vanishes on the unit circle."""
    def value(x):
        q = np.pi * np.sum(x * x, axis=-1)
        return 0.25 * np.sin(q)

    def grad(x):
        q = np.pi * np.sum(x * x, axis=-1)
        return (0.5 * np.pi * np.cos(q))[..., None] * x

    def hess(x):
        q = np.pi * np.sum(x * x, axis=-1)
        eye = np.eye(x.shape[-1])
        return (0.5 * np.pi * np.cos(q))[..., None, None] * eye \
            - (np.pi**2 * np.sin(q))[..., None, None] * x[..., :, None] * x[..., None, :]

    return ExactSolution(value, grad, hess)


def _sgn(t):
    # sgn(0) := 1 so the coefficients are defined on the axes
    return np.where(t >= 0.0, 1.0, -1.0)


def sign_coefficients(x):
    """``A_ij = (1 + delta_ij) sgn(x_i) sgn(x_j)``."""
    x = np.asarray(x, dtype=float)
    s = _sgn(x)
    A = s[..., :, None] * s[..., None, :]
    return A + np.eye(x.shape[-1]) * A


def identity_coefficients(x):
    x = np.asarray(x, dtype=float)
    return np.broadcast_to(np.eye(x.shape[-1]), x.shape + (x.shape[-1],)).copy()


def manufactured_rhs(A, exact):
    def f(x):
        return np.einsum("...ij,...ij->...", A(x), exact.hess(x))
    return f


def laplace_problem(exact=None, name="exp1"):
    exact = exact or sine_bump()
    return CoefficientField(2, identity_coefficients,
                            manufactured_rhs(identity_coefficients, exact),
                            exact_u=exact, name=name)


def sign_problem(exact=None, boundary_data=None, name="exp2"):
    exact = exact or sine_bump()
    return CoefficientField(2, sign_coefficients,
                            manufactured_rhs(sign_coefficients, exact),
                            exact_u=exact, boundary_data_g=boundary_data, name=name)


def keyhole_problem():
    """Sign coefficients on the key-hole with the bump as exact solution; the
    data is the trace of the bump on the straight sides and zero on the arc."""
    u = sine_bump()
    g = BoundaryData(u.value, u.grad, u.hess, portions=frozenset({2, 3, 4}))
    return sign_problem(exact=u, boundary_data=g, name="exp3")


PROBLEMS = {
    "exp1": ("disk", laplace_problem),
    "exp2": ("disk", sign_problem),
    "exp3": ("keyhole", keyhole_problem),
}


def get_problem(name):
    """Return ``(domain, coefficients)`` for a built-in problem id."""
    try:
        dom, make = PROBLEMS[name]
    except KeyError:
        raise ConfigurationError(f"unknown problem '{name}'") from None
    return get_domain(dom), make()
