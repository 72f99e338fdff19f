"""Differentiable line quadrature.

Integrals appear inside field rules (the displacement h(mu, nu), the
antiderivative of lambda(mu)), so they must propagate dual numbers.  The rule
is Gauss-Legendre on the segment [nu0, nu] with the node count doubled until
the primal value settles; the accepted rule is then applied once more to the
dual-valued integrand.  Differentiating a fixed quadrature rule is exact for
the rule, so derivatives with respect to the endpoint and to parameters come
out to the same accuracy as the value, to every nesting order.
"""

from __future__ import annotations

import warnings
from functools import lru_cache
from typing import Callable

import numpy as np

from . import dual as dn

ATOL = 1e-14
RTOL = 1e-13
START_NODES = 8
MAX_NODES = 256
GRADE_RATIO = 0.2
GRADE_PANELS = 18


@lru_cache(maxsize=None)
def _rule(n: int, graded: bool = False):
    """Nodes and weights on [0, 1]; graded rules refine geometrically toward 0."""
    t, w = np.polynomial.legendre.leggauss(n)
    t, w = 0.5 * (t + 1.0), 0.5 * w
    if not graded:
        return t, w
    edges = np.concatenate([[0.0], GRADE_RATIO ** np.arange(GRADE_PANELS, -1, -1)])
    lo, width = edges[:-1, None], np.diff(edges)[:, None]
    return (lo + width * t).ravel(), (width * w).ravel()


def _contract(w, v, shape):
    if isinstance(v, dn.Dual):
        return dn.Dual(v.tag, _contract(w, v.val, shape), tuple(_contract(w, d, shape) for d in v.der))
    return np.tensordot(w, np.broadcast_to(np.asarray(v, float), shape), axes=(0, 0))


def _apply(g, mu, nu, nu0, n, graded=False):
    t, w = _rule(n, graded)
    ax = (slice(None),) + (None,) * np.ndim(dn.primal(nu))
    span = nu - nu0
    s = nu0 + t[ax] * span
    v = g(mu, s) * span
    shape = (len(t),) + np.broadcast_shapes(np.shape(dn.primal(mu)), np.shape(dn.primal(nu)))
    return _contract(w, v, shape)


class QuadratureWarning(RuntimeWarning):
    pass


def _order(g, mu, nu, nu0, graded) -> int:
    m, s = dn.primal(mu), dn.primal(nu)
    n = START_NODES
    prev = _apply(g, m, s, nu0, n, graded)
    while n < MAX_NODES:
        n *= 2
        cur = _apply(g, m, s, nu0, n, graded)
        if np.all(np.abs(cur - prev) <= ATOL + RTOL * np.abs(cur)):
            return n
        prev = cur
    warnings.warn(f"line quadrature did not settle at {MAX_NODES} nodes", QuadratureWarning, stacklevel=3)
    return n


def nu_integral(g: Callable, mu, nu, nu0: float, graded: bool = False):
    """I(mu, nu) = int_{nu0}^{nu} g(mu, s) ds at fixed mu.

    ``g(mu, s)`` must accept arrays and duals.  Arguments broadcast; every
    sample integrates along its own segment.  ``graded`` clusters nodes near
    nu0 for integrands with a square-root type endpoint singularity there.
    """
    n = _order(g, dn.primal(mu), dn.primal(nu), nu0, graded)
    return _apply(g, mu, nu, nu0, n, graded)


def integral_1d(g: Callable, x, x0: float):
    """int_{x0}^{x} g(s) ds for a dual-compatible rule g."""
    return nu_integral(lambda _m, s: g(s), 0.0, x, x0)


def antiderivative(g: Callable, x0: float) -> Callable:
    return lambda x: integral_1d(g, x, x0)
