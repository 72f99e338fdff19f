"""Closed-form coordinate charts and toroidal flux functions.

Every chart exposes its coordinates as rules built on :mod:`quasisym.dual`, so
gradients and Hessians come from forward-mode differentiation rather than from
hand-written formulas.  The explicit elliptic gradient formulas are kept as
independent references (:func:`grad_mu`, :func:`grad_nu`).

Points are numpy arrays with a trailing axis of length 3; the ``Vec3``,
``CylPoint`` and ``EllipticPoint`` tuples work for scalars and arrays alike.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import dual as dn
from .errors import FocalSegment

TWO_PI = 2.0 * np.pi
FOCAL_EPS = 1e-14


class Vec3(NamedTuple):
    x: float
    y: float
    z: float


class CylPoint(NamedTuple):
    r: float
    phi: float
    z: float


class EllipticPoint(NamedTuple):
    mu: float
    nu: float
    z: float


def _xyz(p):
    p = np.asarray(p, dtype=float)
    return p[..., 0], p[..., 1], p[..., 2]


def stack(x, y, z) -> np.ndarray:
    x, y, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(z, float))
    return np.stack([x, y, z], axis=-1)


# cylindrical ---------------------------------------------------------------

def radius(x, y, z=None):
    return dn.hypot(x, y)


def azimuth(x, y, z=None):
    """Principal toroidal angle on [0, 2*pi); the cut is the half plane phi = 0."""
    return dn.wrap_2pi(dn.arctan2(y, x))


def cyl_from_cart(p) -> CylPoint:
    x, y, z = _xyz(p)
    r = np.hypot(x, y)
    phi = np.mod(np.arctan2(y, x), TWO_PI)
    phi = np.where(phi >= TWO_PI, 0.0, phi)
    if np.ndim(phi) == 0:
        return CylPoint(float(r), float(phi), float(z))
    return CylPoint(r, phi, z)


def cart_from_cyl(q: CylPoint) -> np.ndarray:
    r, phi, z = q
    return stack(r * np.cos(phi), r * np.sin(phi), z)


# elliptic cylindrical --------------------------------------------------------

def _elliptic_primal(x, y, a):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = (x * x + y * y) / (a * a)
    big = s - 1.0
    delta = np.hypot(big, 2.0 * y / a)
    w = 4.0 * y * y / (a * a)
    # 2 sinh^2(mu) = big + delta, rearranged where that sum cancels
    with np.errstate(divide="ignore", invalid="ignore"):
        two_sinh2 = np.where(big >= 0.0, big + delta, np.where(delta - big > 0, w / (delta - big), 0.0))
    mu = np.arcsinh(np.sqrt(0.5 * np.maximum(two_sinh2, 0.0)))
    # first-quadrant nu from x = a cosh(mu) cos(nu), y = a sinh(mu) sin(nu);
    # equal to the arcsin form but well conditioned near nu = pi/2
    with np.errstate(divide="ignore", invalid="ignore"):
        sn = np.where(mu > 0, np.abs(y) / (a * np.sinh(mu)), 0.0)
    cn = np.abs(x) / (a * np.cosh(mu))
    nu1 = np.arctan2(sn, cn)
    nu = np.where(x >= 0.0, np.where(y >= 0.0, nu1, TWO_PI - nu1), np.where(y >= 0.0, np.pi - nu1, np.pi + nu1))
    nu = np.where(nu >= TWO_PI, nu - TWO_PI, nu)
    return mu, nu


def elliptic_mu_nu(x, y, a: float):
    """Elliptic coordinates (mu, nu) of (x, y) as a differentiable primitive."""
    t = dn._level(x, y)
    if t == 0:
        return _elliptic_primal(x, y, a)
    n = len(x.der if isinstance(x, dn.Dual) and x.tag == t else y.der)
    X, Y = dn.lift(x, t, n), dn.lift(y, t, n)
    mu0, nu0 = elliptic_mu_nu(X.val, Y.val, a)
    sm, cm = dn.sinh(mu0), dn.cosh(mu0)
    sn, cn = dn.sin(nu0), dn.cos(nu0)
    d = sn * sn + sm * sm
    if np.any(np.asarray(dn.primal(d)) < FOCAL_EPS):
        raise FocalSegment("elliptic coordinates are not differentiable at the foci")
    d = a * d
    mux, muy = sm * cn / d, cm * sn / d
    nux, nuy = -cm * sn / d, sm * cn / d
    mu = dn.Dual(t, mu0, tuple(mux * dx + muy * dy for dx, dy in zip(X.der, Y.der)))
    nu = dn.Dual(t, nu0, tuple(nux * dx + nuy * dy for dx, dy in zip(X.der, Y.der)))
    return mu, nu


class Chart:
    """Orthogonal planar chart (mu, nu) completed by z.

    Subclasses provide dual-compatible rules for the coordinates and for the
    squared gradient norms written in chart coordinates.
    """

    conformal = True
    name = "chart"

    def mu(self, x, y, z=None):
        raise NotImplementedError

    def nu(self, x, y, z=None):
        raise NotImplementedError

    def grad_mu_norm2(self, mu, nu):
        raise NotImplementedError

    def grad_nu_norm2(self, mu, nu):
        return self.grad_mu_norm2(mu, nu)

    def to_cart(self, mu, nu, z=0.0) -> np.ndarray:
        raise NotImplementedError

    def from_cart(self, p):
        x, y, z = _xyz(p)
        return self.mu(x, y), self.nu(x, y), z

    def nu_cut_distance(self, p):
        """Distance from p to the branch cut of the angle-like coordinate nu."""
        x, y, _ = _xyz(p)
        return np.where(x >= 0.0, np.abs(y), np.hypot(x, y))

    def singular(self, p):
        return np.zeros(np.shape(p)[:-1], dtype=bool)


@dataclass(frozen=True)
class CylindricalChart(Chart):
    """(log r, phi, z): the reference harmonic orthogonal chart."""

    name = "cylindrical"

    def mu(self, x, y, z=None):
        return 0.5 * dn.log(x * x + y * y)

    def nu(self, x, y, z=None):
        return azimuth(x, y)

    def grad_mu_norm2(self, mu, nu):
        return dn.exp(-2.0 * mu)

    def to_cart(self, mu, nu, z=0.0):
        r = np.exp(mu)
        return stack(r * np.cos(nu), r * np.sin(nu), z)

    def singular(self, p):
        x, y, _ = _xyz(p)
        return np.hypot(x, y) < FOCAL_EPS


@dataclass(frozen=True)
class PolarChart(Chart):
    """(r, phi, z): orthogonal but not conformal, |grad r| = 1, |grad phi| = 1/r."""

    conformal = False
    name = "polar"

    def mu(self, x, y, z=None):
        return radius(x, y)

    def nu(self, x, y, z=None):
        return azimuth(x, y)

    def grad_mu_norm2(self, mu, nu):
        return 1.0 + 0.0 * mu

    def grad_nu_norm2(self, mu, nu):
        return 1.0 / (mu * mu)

    def to_cart(self, mu, nu, z=0.0):
        return stack(mu * np.cos(nu), mu * np.sin(nu), z)

    def singular(self, p):
        x, y, _ = _xyz(p)
        return np.hypot(x, y) < FOCAL_EPS


@dataclass(frozen=True)
class EllipticChart(Chart):
    """Elliptic cylindrical coordinates with foci at (+-a, 0)."""

    a: float = 2.0
    name = "elliptic"

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("focal half-distance a must be positive")

    def mu(self, x, y, z=None):
        return elliptic_mu_nu(x, y, self.a)[0]

    def nu(self, x, y, z=None):
        return elliptic_mu_nu(x, y, self.a)[1]

    def grad_mu_norm2(self, mu, nu):
        s = dn.sin(nu)
        sh = dn.sinh(mu)
        return 1.0 / (self.a * self.a * (s * s + sh * sh))

    def to_cart(self, mu, nu, z=0.0):
        return stack(self.a * np.cosh(mu) * np.cos(nu), self.a * np.sinh(mu) * np.sin(nu), z)

    def nu_cut_distance(self, p):
        x, y, _ = _xyz(p)
        return np.where(x >= self.a, np.abs(y), np.hypot(x - self.a, y))

    def singular(self, p):
        return elliptic_delta(p, self) < FOCAL_EPS


def elliptic_delta(p, chart: EllipticChart):
    """delta = 1/(a^2 |grad mu|^2) = sin^2(nu) + sinh^2(mu), from Cartesian input."""
    x, y, _ = _xyz(p)
    a = chart.a
    return np.hypot(1.0 - (x * x + y * y) / (a * a), 2.0 * y / a)


def elliptic_from_cart(p, chart: EllipticChart) -> EllipticPoint:
    x, y, z = _xyz(p)
    on_segment = (np.abs(x) < chart.a) & (y == 0.0)
    if np.any(on_segment):
        raise FocalSegment("nu is ill-defined on the open focal segment |x| < a, y = 0")
    mu, nu = _elliptic_primal(x, y, chart.a)
    if np.ndim(mu) == 0:
        return EllipticPoint(float(mu), float(nu), float(z))
    return EllipticPoint(mu, nu, z)


def cart_from_elliptic(q: EllipticPoint, chart: EllipticChart) -> np.ndarray:
    mu, nu, z = q
    return chart.to_cart(np.asarray(mu, float), np.asarray(nu, float), z)


def _elliptic_grads(p, chart: EllipticChart):
    x, y, _ = _xyz(p)
    delta = elliptic_delta(p, chart)
    if np.any(delta < FOCAL_EPS):
        raise FocalSegment("gradients of elliptic coordinates blow up at the foci")
    mu, nu = _elliptic_primal(x, y, chart.a)
    sm, cm, sn, cn = np.sinh(mu), np.cosh(mu), np.sin(nu), np.cos(nu)
    d = chart.a * (sn * sn + sm * sm)
    zero = np.zeros_like(d)
    gmu = np.stack([sm * cn / d, cm * sn / d, zero], axis=-1)
    gnu = np.stack([-cm * sn / d, sm * cn / d, zero], axis=-1)
    return gmu, gnu


def grad_mu(p, chart: EllipticChart) -> np.ndarray:
    """Closed-form gradient of mu; reference for the differentiated chart."""
    return _elliptic_grads(p, chart)[0]


def grad_nu(p, chart: EllipticChart) -> np.ndarray:
    return _elliptic_grads(p, chart)[1]


# toroidal flux functions -------------------------------------------------------

Rule = Callable  # rule(x, y, z) built from quasisym.dual functions


def _zero(x, y, z):
    return 0.0


@dataclass(frozen=True)
class TorusSpec:
    """Flux function Psi = ((mu - mu0)^2 + (z - h)^2) / 2 with boundary Psi = level.

    ``mu`` and ``h`` are rules of (x, y, z).  ``chart`` is set when mu comes
    from a chart whose inverse is known in closed form.
    """

    kind: str
    mu: Rule
    mu0: float
    level: float
    h: Rule = _zero
    chart: Optional[Chart] = None
    radial: bool = False  # mu is the cylindrical radius
    label: str = ""
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ValueError("mu0 must be positive")
        if not self.level > 0:
            raise ValueError("level must be positive")

    @classmethod
    def axisymmetric(cls, r0: float = 1.0, level: float = 0.1) -> "TorusSpec":
        return cls("axisymmetric", radius, r0, level, radial=True, label="Psi_ax")

    @classmethod
    def elliptic(cls, chart: EllipticChart, mu0: float = 1.0, level: float = 0.1) -> "TorusSpec":
        return cls("elliptic", chart.mu, mu0, level, chart=chart, label="Psi_el")

    @classmethod
    def displaced(cls, h: Rule, r0: float = 1.0, level: float = 0.1) -> "TorusSpec":
        return cls("displaced", radius, r0, level, h=h, radial=True, label="Psi_T")

    @classmethod
    def general(cls, mu: Rule, mu0: float = 1.0, h: Rule = _zero, level: float = 0.1,
                chart: Optional[Chart] = None) -> "TorusSpec":
        return cls("general", mu, mu0, level, h=h, chart=chart, label="Psi_T")

    @property
    def minor_radius(self) -> float:
        return float(np.sqrt(2.0 * self.level))

    def psi(self, x, y, z):
        dm = self.mu(x, y, z) - self.mu0
        dz = z - self.h(x, y, z)
        return 0.5 * (dm * dm + dz * dz)

    def mu_inverse(self, target, angle):
        """(x, y) on the curve mu = target at polar angle (or chart angle) ``angle``."""
        target = np.asarray(target, float)
        angle = np.asarray(angle, float)
        if self.radial:
            return target * np.cos(angle), target * np.sin(angle)
        if self.chart is not None:
            pts = self.chart.to_cart(target, angle)
            return pts[..., 0], pts[..., 1]
        return _radial_bisection(self.mu, target, angle)

    def surface(self, value: float, n_theta: int = 32, n_phi: int = 64, phi_max: float = TWO_PI,
                include_end: bool = False) -> np.ndarray:
        """Points on the level set Psi = value, shape (n_phi, n_theta, 3).

        The toroidal parameter is the polar angle (or the chart angle nu); the
        poloidal parameter theta is measured around the displaced axis.
        """
        rho = np.sqrt(2.0 * value)
        theta = np.linspace(0.0, TWO_PI, n_theta, endpoint=False)
        if include_end:
            phi = np.linspace(0.0, phi_max, n_phi)
            phi[-1] = phi_max - 1e-9  # stay on the 2 pi side of the cut
        else:
            phi = np.linspace(0.0, phi_max, n_phi, endpoint=False)
        P, T = np.meshgrid(phi, theta, indexing="ij")
        x, y = self.mu_inverse(self.mu0 + rho * np.cos(T), P)
        h = np.asarray(self.h(x, y, 0.0 * x), float) + 0.0 * x
        z = h + rho * np.sin(T)
        return stack(x, y, z)

    def outer_radius(self, value: Optional[float] = None) -> float:
        """Largest cylindrical radius reached by {Psi <= value} (value defaults to level)."""
        rho = np.sqrt(2.0 * (self.level if value is None else value))
        ang = np.linspace(0.0, TWO_PI, 361)
        x, y = self.mu_inverse(np.full_like(ang, self.mu0 + rho), ang)
        return float(np.max(np.hypot(x, y)))


def _radial_bisection(mu: Rule, target, angle, iters: int = 200):
    target, angle = np.broadcast_arrays(np.asarray(target, float), np.asarray(angle, float))
    c, s = np.cos(angle), np.sin(angle)

    def m(r):
        return np.asarray(mu(r * c, r * s, 0.0 * r), float)

    lo = np.full(target.shape, 1e-12)
    hi = np.ones(target.shape)
    for _ in range(200):
        grow = m(hi) < target
        if not np.any(grow):
            break
        hi = np.where(grow, 2.0 * hi, hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = m(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4e-16 * hi):
            break
    r = 0.5 * (lo + hi)
    return r * c, r * s


def flux(spec: TorusSpec, p):
    """Psi and its exact gradient at points p (shape (..., 3))."""
    x, y, z = _xyz(p)
    val, (gx, gy, gz) = dn.gradient(spec.psi, x, y, z)
    shape = np.shape(x)
    g = np.stack([np.broadcast_to(np.asarray(c, float), shape) for c in (gx, gy, gz)], axis=-1)
    return np.broadcast_to(np.asarray(val, float), shape), g


def quartic_mu(power: float = 0.5) -> Rule:
    """mu = (x^4 + y^4)^power; 1/2 gives the squarish torus, 1/4 the degree-one variant."""

    def mu(x, y, z=None):
        return (x ** 4 + y ** 4) ** power

    return mu


def sin2_3phi_displacement(x, y, z=None):
    """h = r sin^2(3 phi)."""
    r = radius(x, y)
    s = dn.sin(3.0 * azimuth(x, y))
    return r * s * s
