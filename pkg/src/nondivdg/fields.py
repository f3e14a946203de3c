"""Things that can be traced at quadrature points: the local basis, discrete
functions, analytic functions and linear combinations of those.

Every provider returns ``(val, grad, hess)`` with a trailing function axis
``m`` (``m = n_local`` for the basis, ``m = 1`` otherwise).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .fe import DGSpace, chain_rule, shape_table


@dataclass
class EvalContext:
    """Geometry of a batch of points: ``xhat`` on elements ``elems``."""
    space: DGSpace
    elems: np.ndarray
    xhat: np.ndarray
    x: np.ndarray
    J: np.ndarray
    HF: np.ndarray
    portion: Optional[np.ndarray] = None
    _basis: Optional[tuple] = field(default=None, repr=False)

    @classmethod
    def build(cls, space, elems, xhat, portion=None):
        x, J, HF = space.mesh.map(elems, xhat)
        return cls(space, np.asarray(elems), np.asarray(xhat), x, J, HF, portion)

    @property
    def detJ(self):
        J = self.J
        return J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]

    def basis(self):
        if self._basis is None:
            tab = shape_table(self.space.p, self.xhat)
            HF = self.HF.reshape((self.HF.shape[0],) + (1,) * (self.J.ndim - 3) + (2, 2, 2))
            self._basis = chain_rule(self.J, HF, tab.values, tab.grads, tab.hessians)
        return self._basis


class Field:
    is_basis = False

    def traces(self, ctx: EvalContext):  # pragma: no cover - interface
        raise NotImplementedError

    def boundary_jump(self, ctx: EvalContext, val, grad, t):
        """Jump of value and tangential derivative on boundary faces."""
        return val, np.sum(grad * t, axis=-1)

    def __sub__(self, other):
        return Combination(((1.0, self), (-1.0, other)))

    def __add__(self, other):
        return Combination(((1.0, self), (1.0, other)))

    def __rmul__(self, c):
        return Combination(((float(c), self),))


class Basis(Field):
    is_basis = True

    def traces(self, ctx):
        return ctx.basis()


BASIS = Basis()


@dataclass(eq=False)
class DiscreteFunction(Field):
    space: DGSpace
    coeffs: np.ndarray

    def traces(self, ctx):
        val, grad, hess = ctx.basis()
        c = np.asarray(self.coeffs, float).reshape(-1, self.space.n_local)[ctx.elems]
        c = c.reshape(c.shape[:1] + (1,) * (val.ndim - 2) + c.shape[1:])
        v = np.sum(val * c, axis=-1)
        g = np.einsum("...bi,...b->...i", grad, c)
        h = np.einsum("...bij,...b->...ij", hess, c)
        return v[..., None], g[..., None, :], h[..., None, :, :]


@dataclass(eq=False)
class AnalyticFunction(Field):
    """Smooth function given by value, gradient and Hessian callables.

    ``boundary_jump(x, portion_id) -> (value, gradient)`` replaces the trace
    in the boundary jump terms (``None`` keeps the trace itself).
    """
    value: Callable
    grad: Callable
    hess: Callable
    boundary_jump_fn: Optional[Callable] = None

    def traces(self, ctx):
        x = ctx.x
        return (self.value(x)[..., None], self.grad(x)[..., None, :],
                self.hess(x)[..., None, :, :])

    def boundary_jump(self, ctx, val, grad, t):
        if self.boundary_jump_fn is None:
            return super().boundary_jump(ctx, val, grad, t)
        jv = np.zeros(ctx.x.shape[:-1])
        jg = np.zeros(ctx.x.shape)
        for pid in np.unique(ctx.portion):
            sel = ctx.portion == pid
            jv[sel], jg[sel] = self.boundary_jump_fn(ctx.x[sel], int(pid))
        return jv[..., None], np.sum(jg[..., None, :] * t, axis=-1)

    @classmethod
    def from_exact(cls, exact, boundary_jump=None):
        return cls(exact.value, exact.grad, exact.hess, boundary_jump)


def zero_jump(x, pid):
    return np.zeros(x.shape[:-1]), np.zeros(x.shape)


@dataclass(eq=False)
class Combination(Field):
    terms: Sequence

    def traces(self, ctx):
        out = None
        for c, f in self.terms:
            tr = f.traces(ctx)
            out = [c * a for a in tr] if out is None else [o + c * a for o, a in zip(out, tr)]
        return tuple(out)

    def boundary_jump(self, ctx, val, grad, t):
        jv = jt = 0.0
        for c, f in self.terms:
            v, g, _ = f.traces(ctx)
            a, b = f.boundary_jump(ctx, v, g, t)
            jv = jv + c * a
            jt = jt + c * b
        return jv, jt
