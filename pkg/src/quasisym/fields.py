"""Field descriptors and differential operators.

A field wraps a *rule*: a function of Cartesian components ``(x, y, z)`` that
is written with :mod:`quasisym.dual` functions.  Operators evaluate rules at
sample arrays of shape ``(N, 3)`` by one of two independent paths:

``"dual"``
    forward-mode dual numbers (exact to rounding),
``"fd"``
    central finite differences with step ``h = 1e-5 * max(1, |p|)`` unless
    given explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import dual as dn
from .errors import MissingDerivativeRule, ZeroField

FD_REL_STEP = 1e-5
ZERO_FIELD_EPS = 1e-12


@dataclass(frozen=True)
class ScalarField:
    rule: Callable
    name: str = ""
    differentiable: bool = True

    def at(self, x, y, z):
        return self.rule(x, y, z)

    def __call__(self, p) -> np.ndarray:
        p = np.asarray(p, float)
        out = self.rule(p[..., 0], p[..., 1], p[..., 2])
        return np.broadcast_to(np.asarray(dn.primal(out), float), p.shape[:-1]).copy()

    def compose(self, g: Callable, name: str = "") -> "ScalarField":
        """g(f(x)) for a dual-compatible scalar rule g."""
        rule = self.rule
        return ScalarField(lambda x, y, z: g(rule(x, y, z)), name or f"g({self.name})",
                           self.differentiable)


@dataclass(frozen=True)
class VectorField:
    rule: Callable  # returns a 3-tuple of components
    name: str = ""
    differentiable: bool = True

    def at(self, x, y, z):
        return self.rule(x, y, z)

    def __call__(self, p) -> np.ndarray:
        p = np.asarray(p, float)
        comps = self.rule(p[..., 0], p[..., 1], p[..., 2])
        shape = p.shape[:-1]
        return np.stack([np.broadcast_to(np.asarray(dn.primal(c), float), shape) for c in comps], axis=-1)

    def __add__(self, other: "VectorField") -> "VectorField":
        a, b = self.rule, other.rule
        return VectorField(lambda x, y, z: dn.add(a(x, y, z), b(x, y, z)),
                           f"{self.name}+{other.name}", self.differentiable and other.differentiable)

    def scaled(self, s: float) -> "VectorField":
        a = self.rule
        return VectorField(lambda x, y, z: dn.scale(s, a(x, y, z)), f"{s}*{self.name}", self.differentiable)


def constant_vector(v, name: str = "const") -> VectorField:
    v = tuple(float(c) for c in v)
    return VectorField(lambda x, y, z: (v[0] + 0.0 * x, v[1] + 0.0 * x, v[2] + 0.0 * x), name)


def gradient_field(f: ScalarField) -> VectorField:
    rule = f.rule
    return VectorField(lambda x, y, z: dn.grad(rule, x, y, z), f"grad {f.name}", f.differentiable)


# evaluation helpers ----------------------------------------------------------

def _pts(p):
    p = np.asarray(p, float)
    return p if p.ndim > 1 else p[None, :]


def fd_steps(p, h=None):
    p = _pts(p)
    if h is not None:
        return np.full(p.shape[0], float(h))
    return FD_REL_STEP * np.maximum(1.0, np.linalg.norm(p, axis=-1))


def _as(shape, v):
    return np.broadcast_to(np.asarray(v, float), shape)


def _need_dual(field):
    if not field.differentiable:
        raise MissingDerivativeRule(f"field {field.name!r} has no exact derivative rule")


def _central(fn, p, h):
    """Central differences of fn (values shape (N, ...)) along each axis: (N, ..., 3)."""
    cols = []
    for j in range(3):
        step = np.zeros_like(p)
        step[:, j] = h
        d = fn(p + step) - fn(p - step)
        cols.append(d / (2.0 * h.reshape((-1,) + (1,) * (d.ndim - 1))))
    return np.stack(cols, axis=-1)


def grad(f: ScalarField, p, method: str = "dual", h=None) -> np.ndarray:
    p = _pts(p)
    if method == "dual":
        _need_dual(f)
        _, g = dn.gradient(f.rule, p[:, 0], p[:, 1], p[:, 2])
        return np.stack([_as(p.shape[0], c) for c in g], axis=-1)
    return _central(f, p, fd_steps(p, h))


def hessian(f: ScalarField, p, method: str = "dual", h=None) -> np.ndarray:
    p = _pts(p)
    if method == "dual":
        _need_dual(f)
        gf = gradient_field(f)
        return jacobian(gf, p, "dual")
    hs = fd_steps(p, h)
    return _central(lambda q: grad(f, q, "fd", h=None if h is None else h), p, hs)


def jacobian(V: VectorField, p, method: str = "dual", h=None) -> np.ndarray:
    """J[n, i, j] = d V_i / d x_j."""
    p = _pts(p)
    n = p.shape[0]
    if method == "dual":
        _need_dual(V)
        _, jac = dn.vector_jacobian(V.rule, p[:, 0], p[:, 1], p[:, 2])
        return np.stack([np.stack([_as(n, d) for d in row], axis=-1) for row in jac], axis=-2)
    return _central(V, p, fd_steps(p, h))


def values_and_jacobian(V: VectorField, p, method: str = "dual", h=None):
    p = _pts(p)
    n = p.shape[0]
    if method == "dual":
        _need_dual(V)
        vals, jac = dn.vector_jacobian(V.rule, p[:, 0], p[:, 1], p[:, 2])
        v = np.stack([_as(n, dn.primal(c)) for c in vals], axis=-1)
        J = np.stack([np.stack([_as(n, d) for d in row], axis=-1) for row in jac], axis=-2)
        return v, J
    return V(p), _central(V, p, fd_steps(p, h))


def div(V: VectorField, p, method: str = "dual", h=None) -> np.ndarray:
    J = jacobian(V, p, method, h)
    return np.trace(J, axis1=-2, axis2=-1)


def curl_from_jacobian(J) -> np.ndarray:
    return np.stack([J[:, 2, 1] - J[:, 1, 2], J[:, 0, 2] - J[:, 2, 0], J[:, 1, 0] - J[:, 0, 1]], axis=-1)


def curl(V: VectorField, p, method: str = "dual", h=None) -> np.ndarray:
    return curl_from_jacobian(jacobian(V, p, method, h))


def curl_field(V: VectorField) -> VectorField:
    """Curl as a field; exact derivatives of it need one more dual level."""
    rule = V.rule

    def c(x, y, z):
        _, J = dn.vector_jacobian(rule, x, y, z)
        return (J[2][1] - J[1][2], J[0][2] - J[2][0], J[1][0] - J[0][1])

    return VectorField(c, f"curl {V.name}", V.differentiable)


def dir_deriv(V: VectorField, f: ScalarField, p, method: str = "dual", h=None) -> np.ndarray:
    """V . grad f."""
    p = _pts(p)
    return np.einsum("ni,ni->n", V(p), grad(f, p, method, h))


def laplacian(f: ScalarField, p, method: str = "fd", h=None) -> np.ndarray:
    p = _pts(p)
    if method == "dual":
        return np.trace(hessian(f, p, "dual"), axis1=-2, axis2=-1)
    hs = fd_steps(p, h)
    f0 = f(p)
    out = np.zeros(p.shape[0])
    for j in range(3):
        e = np.zeros(3)
        e[j] = 1.0
        step = hs[:, None] * e
        out += (f(p + step) - 2.0 * f0 + f(p - step)) / hs ** 2
    return out


def lie_derivative_vec(u: VectorField, B: VectorField, p, method: str = "dual", h=None) -> np.ndarray:
    """(u . grad) B - (B . grad) u."""
    p = _pts(p)
    ub, Ju = values_and_jacobian(u, p, method, h)
    bb, Jb = values_and_jacobian(B, p, method, h)
    return np.einsum("nij,nj->ni", Jb, ub) - np.einsum("nij,nj->ni", Ju, bb)


def clebsch(alpha: ScalarField, beta: ScalarField, scale: Optional[ScalarField] = None,
            name: str = "") -> VectorField:
    """scale * (grad alpha x grad beta)."""
    ar, br = alpha.rule, beta.rule
    sr = scale.rule if scale is not None else None

    def rule(x, y, z):
        ga = dn.grad(ar, x, y, z)
        gb = dn.grad(br, x, y, z)
        c = dn.cross(ga, gb)
        if sr is None:
            return c
        return dn.scale(sr(x, y, z), c)

    return VectorField(rule, name or f"clebsch({alpha.name},{beta.name})")


# anisotropic pressure ------------------------------------------------------------

class PressurePair(NamedTuple):
    p_perp: np.ndarray
    p_par: np.ndarray
    p0: float


def anisotropic_pressures(b2, p0: float) -> PressurePair:
    """Closure P_perp = (P0 - B^2)/2, P_par = (P0 + B^2)/2.

    Negative pressures are returned as-is; callers flag p0 < B^2.
    """
    return PressurePair(0.5 * (p0 - b2), 0.5 * (p0 + b2), p0)


@dataclass(frozen=True)
class PressureClosure:
    """P_perp = P - sigma B^2 / 2, P_par = P + sigma B^2 / 2 with constant P and sigma.

    ``sigma = 1`` with ``P = P0/2`` is the closure under which every solenoidal
    field is in anisotropic force balance.
    """

    p0: float = 4.0
    sigma: float = 1.0

    def __call__(self, b2) -> PressurePair:
        ref = 0.5 * self.p0
        return PressurePair(ref - 0.5 * self.sigma * b2, ref + 0.5 * self.sigma * b2, self.p0)


def _tensor_components(Bc, p_perp, p_par):
    b2 = dn.dot(Bc, Bc)
    small = np.asarray(dn.primal(b2)) <= ZERO_FIELD_EPS ** 2
    if np.any(small):
        diff = np.broadcast_to(np.asarray(dn.primal(p_par - p_perp)), small.shape)
        if np.any(np.abs(diff[small]) > 0):
            raise ZeroField("|B| vanishes where P_par != P_perp")
        # isotropic there: the anisotropic part is absent
        c = dn.where(small, 0.0, (p_par - p_perp) / dn.where(small, 1.0, b2))
    else:
        c = (p_par - p_perp) / b2
    return [[(p_perp if i == j else 0.0) + c * Bc[i] * Bc[j] for j in range(3)] for i in range(3)]


def pressure_tensor(B, pair: PressurePair) -> np.ndarray:
    """Pi^{ij} = P_perp delta^{ij} + (P_par - P_perp) B^i B^j / B^2; B shape (..., 3)."""
    B = np.asarray(B, float)
    Bc = (B[..., 0], B[..., 1], B[..., 2])
    b2 = B[..., 0] ** 2 + B[..., 1] ** 2 + B[..., 2] ** 2
    small = b2 <= ZERO_FIELD_EPS ** 2
    p_perp = np.broadcast_to(np.asarray(pair.p_perp, float), b2.shape)
    p_par = np.broadcast_to(np.asarray(pair.p_par, float), b2.shape)
    if np.any(small & (p_par != p_perp)):
        raise ZeroField("|B| vanishes where P_par != P_perp")
    safe = np.where(small, 1.0, b2)
    c = np.where(small, 0.0, (p_par - p_perp) / safe)
    T = c[..., None, None] * np.einsum("...i,...j->...ij", B, B)
    T = T + p_perp[..., None, None] * np.eye(3)
    return T


def pressure_tensor_field(B: VectorField, closure: Callable) -> Callable:
    """Rule (x, y, z) -> 3x3 nested components of Pi built from B and a closure of B^2."""
    rule = B.rule

    def Pi(x, y, z):
        Bc = rule(x, y, z)
        pair = closure(dn.dot(Bc, Bc))
        return _tensor_components(Bc, pair.p_perp, pair.p_par)

    return Pi


def tensor_divergence(Pi_rule: Callable, p, method: str = "fd", h=None) -> np.ndarray:
    """(div Pi)^j = sum_i d_i Pi^{ij} at points p."""
    p = _pts(p)
    n = p.shape[0]
    if method == "dual":
        t, (X, Y, Z) = dn.seed([p[:, 0], p[:, 1], p[:, 2]])
        comps = Pi_rule(X, Y, Z)
        out = np.zeros((n, 3))
        for i in range(3):
            for j in range(3):
                out[:, j] += _as(n, dn.partials_at(comps[i][j], t, 3)[i])
        return out

    def T(q):
        c = Pi_rule(q[:, 0], q[:, 1], q[:, 2])
        m = q.shape[0]
        return np.stack([np.stack([_as(m, dn.primal(c[i][j])) for j in range(3)], -1) for i in range(3)], -2)

    hs = fd_steps(p, h)
    out = np.zeros((n, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        step = hs[:, None] * e
        out += (T(p + step)[:, i, :] - T(p - step)[:, i, :]) / (2.0 * hs[:, None])
    return out
