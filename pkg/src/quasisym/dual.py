"""Nested forward-mode dual numbers.

A :class:`Dual` carries a value and a tuple of first partials with respect to
the variables seeded at one differentiation *level* (its ``tag``).  Values and
partials may themselves be duals of an older level, so a gradient taken inside
a function that is being differentiated yields exact second derivatives.

Levels are ordered: a newer seed always wraps older ones.  An operation between
duals of different levels treats the older one as a constant at the newer
level, which keeps nested gradients free of perturbation confusion.

The elementary functions in this module accept plain floats / numpy arrays and
duals alike, so field rules written against them can be evaluated on raw
points or differentiated to any order.
"""

from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np

_tag_counter = itertools.count(1)


def new_tag() -> int:
    return next(_tag_counter)


class Dual:
    __slots__ = ("tag", "val", "der")
    # Defer to our reflected operators when numpy arrays sit on the left.
    __array_ufunc__ = None

    def __init__(self, tag: int, val, der: tuple):
        self.tag = tag
        self.val = val
        self.der = der

    def __repr__(self) -> str:
        return f"Dual(tag={self.tag}, val={self.val!r}, der={self.der!r})"

    def _chain(self, val, dval) -> "Dual":
        return Dual(self.tag, val, tuple(dval * d for d in self.der))

    # arithmetic ---------------------------------------------------------
    def __neg__(self):
        return Dual(self.tag, -self.val, tuple(-d for d in self.der))

    def __pos__(self):
        return self

    def __add__(self, other):
        return _add(self, other)

    def __radd__(self, other):
        return _add(other, self)

    def __sub__(self, other):
        return _add(self, -other)

    def __rsub__(self, other):
        return _add(other, -self)

    def __mul__(self, other):
        return _mul(self, other)

    def __rmul__(self, other):
        return _mul(other, self)

    def __truediv__(self, other):
        return _div(self, other)

    def __rtruediv__(self, other):
        return _div(other, self)

    def __pow__(self, other):
        if isinstance(other, Dual):
            return exp(other * log(self))
        if other == 0:
            return 1.0 + 0.0 * self
        if other == 1:
            return self
        if other == 2:
            return self * self
        return self._chain(self.val ** other, other * self.val ** (other - 1))

    def __rpow__(self, other):
        return exp(self * np.log(other))


def _level(*xs) -> int:
    return max((x.tag for x in xs if isinstance(x, Dual)), default=0)


def _parts(x, tag):
    if isinstance(x, Dual) and x.tag == tag:
        return x.val, x.der
    return x, None


def _add(a, b):
    t = _level(a, b)
    av, ad = _parts(a, t)
    bv, bd = _parts(b, t)
    if ad is None:
        der = bd
    elif bd is None:
        der = ad
    else:
        der = tuple(x + y for x, y in zip(ad, bd))
    return Dual(t, av + bv, der)


def _mul(a, b):
    t = _level(a, b)
    av, ad = _parts(a, t)
    bv, bd = _parts(b, t)
    if ad is None:
        der = tuple(av * d for d in bd)
    elif bd is None:
        der = tuple(d * bv for d in ad)
    else:
        der = tuple(x * bv + av * y for x, y in zip(ad, bd))
    return Dual(t, av * bv, der)


def _div(a, b):
    t = _level(a, b)
    av, ad = _parts(a, t)
    bv, bd = _parts(b, t)
    val = av / bv
    if bd is None:
        der = tuple(d / bv for d in ad)
    elif ad is None:
        der = tuple(-val * d / bv for d in bd)
    else:
        der = tuple((x - val * y) / bv for x, y in zip(ad, bd))
    return Dual(t, val, der)


# elementary functions -----------------------------------------------------

def primal(x):
    """Strip every differentiation level and return the underlying value."""
    while isinstance(x, Dual):
        x = x.val
    return x


def sin(x):
    if isinstance(x, Dual):
        return x._chain(sin(x.val), cos(x.val))
    return np.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return x._chain(cos(x.val), -sin(x.val))
    return np.cos(x)


def tan(x):
    if isinstance(x, Dual):
        c = cos(x.val)
        return x._chain(tan(x.val), 1.0 / (c * c))
    return np.tan(x)


def exp(x):
    if isinstance(x, Dual):
        e = exp(x.val)
        return x._chain(e, e)
    return np.exp(x)


def log(x):
    if isinstance(x, Dual):
        return x._chain(log(x.val), 1.0 / x.val)
    return np.log(x)


def sqrt(x):
    if isinstance(x, Dual):
        s = sqrt(x.val)
        return x._chain(s, 0.5 / s)
    return np.sqrt(x)


def sinh(x):
    if isinstance(x, Dual):
        return x._chain(sinh(x.val), cosh(x.val))
    return np.sinh(x)


def cosh(x):
    if isinstance(x, Dual):
        return x._chain(cosh(x.val), sinh(x.val))
    return np.cosh(x)


def tanh(x):
    if isinstance(x, Dual):
        th = tanh(x.val)
        return x._chain(th, 1.0 - th * th)
    return np.tanh(x)


def arcsinh(x):
    if isinstance(x, Dual):
        return x._chain(arcsinh(x.val), 1.0 / sqrt(1.0 + x.val * x.val))
    return np.arcsinh(x)


def arcsin(x):
    if isinstance(x, Dual):
        return x._chain(arcsin(x.val), 1.0 / sqrt(1.0 - x.val * x.val))
    return np.arcsin(x)


def arctan(x):
    if isinstance(x, Dual):
        return x._chain(arctan(x.val), 1.0 / (1.0 + x.val * x.val))
    return np.arctan(x)


def arctan2(y, x):
    t = _level(y, x)
    if t == 0:
        return np.arctan2(y, x)
    yv, yd = _parts(y, t)
    xv, xd = _parts(x, t)
    r2 = xv * xv + yv * yv
    n = len(yd if yd is not None else xd)
    yd = yd if yd is not None else (0.0,) * n
    xd = xd if xd is not None else (0.0,) * n
    der = tuple((xv * dy - yv * dx) / r2 for dy, dx in zip(yd, xd))
    return Dual(t, arctan2(yv, xv), der)


def square(x):
    return x * x


def hypot(x, y):
    return sqrt(x * x + y * y)


def where(cond, a, b):
    """Branch selection; ``cond`` must be a plain boolean (array)."""
    t = _level(a, b)
    if t == 0:
        return np.where(cond, a, b)
    av, ad = _parts(a, t)
    bv, bd = _parts(b, t)
    n = len(ad if ad is not None else bd)
    ad = ad if ad is not None else (0.0,) * n
    bd = bd if bd is not None else (0.0,) * n
    return Dual(t, where(cond, av, bv), tuple(where(cond, x, y) for x, y in zip(ad, bd)))


def absolute(x):
    return where(np.asarray(primal(x)) < 0, -x, x)


def wrap_2pi(x):
    """Map an angle into [0, 2*pi); derivatives are unaffected."""
    v = np.asarray(primal(x))
    twopi = 2.0 * np.pi
    shifted = where(v < 0, x + twopi, x)
    v2 = np.asarray(primal(shifted))
    return where(v2 >= twopi, shifted - twopi, shifted)


# differentiation drivers -------------------------------------------------

def lift(x, tag: int, n: int) -> Dual:
    """View ``x`` as a dual at level ``tag`` (zero partials if it is older)."""
    if isinstance(x, Dual) and x.tag == tag:
        return x
    return Dual(tag, x, (0.0,) * n)


def seed(values: Sequence) -> tuple[int, list[Dual]]:
    t = new_tag()
    n = len(values)
    out = []
    for i, v in enumerate(values):
        der = tuple(1.0 if j == i else 0.0 for j in range(n))
        out.append(Dual(t, v, der))
    return t, out


def value_at(out, tag: int):
    return out.val if isinstance(out, Dual) and out.tag == tag else out


def partials_at(out, tag: int, n: int) -> tuple:
    if isinstance(out, Dual) and out.tag == tag:
        return out.der
    return (0.0,) * n


def gradient(fn: Callable, *args):
    """Value and partials of ``fn`` with respect to each positional argument.

    Arguments may be plain values or duals; the result is then correspondingly
    differentiable at the outer levels.
    """
    t, seeded = seed(args)
    out = fn(*seeded)
    return value_at(out, t), partials_at(out, t, len(args))


def grad(fn: Callable, *args) -> tuple:
    return gradient(fn, *args)[1]


def derivative(fn: Callable, x):
    """d fn / dx for a scalar-argument rule, nestable."""
    return grad(fn, x)[0]


def vector_jacobian(fn: Callable, *args):
    """Values and Jacobian rows of a rule returning a sequence of components."""
    t, seeded = seed(args)
    outs = fn(*seeded)
    n = len(args)
    vals = tuple(value_at(o, t) for o in outs)
    jac = tuple(partials_at(o, t, n) for o in outs)
    return vals, jac


# small vector algebra on component tuples --------------------------------

def cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def scale(s, a):
    return (s * a[0], s * a[1], s * a[2])


def add(a, b):
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def sub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])
