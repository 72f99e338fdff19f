"""Named magnetic field families bundled for verification.

Each constructor returns a :class:`QsSolution`.  Besides the fields, a bundle
records which identities hold by construction (``claims``) and any closed-form
expressions the constructed fields must reproduce (``formulas``); the verify
module checks exactly that set.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import dual as dn
from .coordinates import TWO_PI, Chart, EllipticChart, TorusSpec, azimuth, radius
from .errors import NegativeE, NegativeRadicand
from .fields import ScalarField, VectorField, clebsch
from .quadrature import integral_1d, nu_integral

# identity names shared with verify
DIV_B = "div_B"
DIV_U = "div_u"
B_CROSS_U = "B_cross_u"
U_GRAD_B2 = "u_grad_B2"
B_GRAD_PSI = "B_grad_psi"
U_GRAD_PSI = "u_grad_psi"
B_GRAD_B2 = "B_grad_B2"
B2_ON_SURFACES = "B2_on_surfaces"

QS_CLAIMS = frozenset({DIV_B, DIV_U, B_CROSS_U, U_GRAD_B2, B_GRAD_PSI})


def half_plane_cut(p):
    """Distance to the half plane {y = 0, x >= 0} where phi jumps from 2 pi to 0."""
    p = np.asarray(p, float)
    x, y = p[..., 0], p[..., 1]
    return np.where(x >= 0.0, np.abs(y), np.hypot(x, y))


@dataclass(frozen=True)
class Domain:
    """Where a bundle may be sampled.

    ``kind`` is ``"torus"`` (interior of ``QsSolution.torus``) or ``"annulus"``.
    ``angle`` is the admissible toroidal-parameter window (phi, or the chart
    angle nu for chart tori); ``rho_fraction`` caps the poloidal radius.
    """

    kind: str = "torus"
    angle: tuple = (0.0, TWO_PI)
    r_range: tuple = (0.5, 1.5)
    z_range: tuple = (-1.0, 1.0)
    rho_fraction: float = 0.95


@dataclass(frozen=True)
class QsSolution:
    B: VectorField
    descriptor: str
    u: Optional[VectorField] = None
    zeta: Optional[ScalarField] = None
    dg_dzeta: Optional[Callable] = None  # rule of the zeta value; None means 1
    psi: Optional[ScalarField] = None
    torus: Optional[TorusSpec] = None
    h: Optional[ScalarField] = None
    k: Optional[float] = None
    claims: frozenset = frozenset()
    formulas: dict = field(default_factory=dict)
    cut: Optional[Callable] = None
    domain: Domain = Domain()
    params: dict = field(default_factory=dict)

    def with_u(self, u: VectorField, descriptor: Optional[str] = None) -> "QsSolution":
        return replace(self, u=u, descriptor=descriptor or self.descriptor)


def _gphi(x, y, z):
    return dn.grad(azimuth, x, y, z)


def _gr(x, y, z):
    return dn.grad(radius, x, y, z)


EZ = (0.0, 0.0, 1.0)


def _vec(a, b, c, like):
    zero = 0.0 * like
    return (a + zero, b + zero, c + zero)


# self-quasisymmetric ---------------------------------------------------------

def helical_selfqs(f: Optional[Callable] = None, r_range=(0.5, 1.5), z_range=(-1.0, 1.0)) -> QsSolution:
    """B = f(r, w) grad r x grad w with w = z/r - phi.

    The default profile is f = exp(-r) sin(w).  The field is tangent to the
    cylinders r = const and self-quasisymmetric for every f.
    """
    if f is None:
        f = lambda r, w: dn.exp(-r) * dn.sin(w)

    def w(x, y, z):
        return z / radius(x, y) - azimuth(x, y)

    r_field = ScalarField(radius, "r")
    w_field = ScalarField(w, "z/r-phi")
    scale = ScalarField(lambda x, y, z: f(radius(x, y), w(x, y, z)), "f")
    B = clebsch(r_field, w_field, scale, name="B_helical")
    return QsSolution(
        B=B,
        descriptor="helical_selfqs",
        psi=r_field,
        claims=frozenset({DIV_B, B_GRAD_B2, B_GRAD_PSI}),
        domain=Domain(kind="annulus", angle=(0.0, TWO_PI), r_range=tuple(r_range), z_range=tuple(z_range)),
    )


def axisym_torus_field(E: Optional[Callable] = None, r0: float = 1.0, level: float = 0.1) -> QsSolution:
    """B = r sqrt(E(Psi_ax)) grad phi, so that B^2 = E(Psi_ax) on every flux surface."""
    if E is None:
        E = lambda s: 1.0 + 0.0 * s
    torus = TorusSpec.axisymmetric(r0, level)

    def rule(x, y, z):
        e = E(torus.psi(x, y, z))
        if np.any(np.asarray(dn.primal(e)) < 0):
            raise NegativeE("E(Psi) < 0 at a sampled point")
        return dn.scale(radius(x, y) * dn.sqrt(e), _gphi(x, y, z))

    B = VectorField(rule, "B_ax")
    u = VectorField(lambda x, y, z: _vec(-y, x, 0.0, x), "d_phi")
    zero = ScalarField(lambda x, y, z: 0.0 * x, "const")
    return QsSolution(
        B=B,
        descriptor="axisym_torus_field",
        u=u,
        zeta=zero,
        psi=ScalarField(torus.psi, "Psi_ax"),
        torus=torus,
        claims=QS_CLAIMS | {B_GRAD_B2, B2_ON_SURFACES},
        formulas={"B2": ScalarField(lambda x, y, z: E(torus.psi(x, y, z)), "E(Psi)")},
    )


# symmetric field in an elliptic torus -------------------------------------------

def elliptic_translational(lam: Optional[Callable] = None, chart: Optional[EllipticChart] = None,
                           mu0: float = 1.0, level: float = 0.1) -> QsSolution:
    """B = lambda(mu) grad nu with translational symmetry u = grad z.

    zeta is the antiderivative of lambda, integrated numerically from mu0.
    Default lambda = -exp(-mu).
    """
    chart = chart or EllipticChart(2.0)
    if lam is None:
        lam = lambda m: -dn.exp(-m)
    torus = TorusSpec.elliptic(chart, mu0, level)

    def Brule(x, y, z):
        return dn.scale(lam(chart.mu(x, y)), dn.grad(chart.nu, x, y, z))

    def zeta(x, y, z):
        return integral_1d(lam, chart.mu(x, y), mu0)

    def curl_closed(x, y, z):
        m = chart.mu(x, y)
        gm = dn.grad(chart.mu, x, y, z)
        return dn.scale(dn.derivative(lam, m) * dn.dot(gm, gm), _vec(0.0, 0.0, 1.0, x))

    return QsSolution(
        B=VectorField(Brule, "B_el"),
        descriptor="elliptic_translational",
        u=VectorField(lambda x, y, z: _vec(0.0, 0.0, 1.0, x), "grad z"),
        zeta=ScalarField(zeta, "int lambda dmu"),
        psi=ScalarField(torus.psi, "Psi_el"),
        torus=torus,
        claims=QS_CLAIMS,
        formulas={"curl_B": VectorField(curl_closed, "lambda' |grad mu|^2 grad z")},
        params={"a": chart.a, "mu0": mu0},
    )


# quasisymmetric families with a displaced axis ------------------------------------

def _zero1(r):
    return 0.0 * r


def local_qs(k: float = 0.18, alpha: Optional[Callable] = None, beta: Optional[Callable] = None,
             f: Callable = dn.sin, r0: float = 1.0, level: float = 0.1, guard: float = 0.05) -> QsSolution:
    """Local quasisymmetric field with displacement h = k r phi (alpha - r phi / 2) + beta.

    ``alpha`` and ``beta`` are rules of r (default 0), ``f`` a rule of
    zeta = z - h (default sin).  With alpha = beta = 0 this is the explicit
    example whose B x u = -grad cos(z + k r^2 phi^2 / 2).
    """
    alpha = alpha or _zero1
    beta = beta or _zero1

    def h(x, y, z):
        r, ph = radius(x, y), azimuth(x, y)
        return k * r * ph * (alpha(r) - 0.5 * r * ph) + beta(r)

    def zeta(x, y, z):
        return z - h(x, y, z)

    def rho(x, y, z):
        return alpha(radius(x, y)) - radius(x, y) * azimuth(x, y)

    def Brule(x, y, z):
        r, ph = radius(x, y), azimuth(x, y)
        s = -f(zeta(x, y, z))
        v = dn.add(dn.scale(r, _gphi(x, y, z)), dn.scale(k * (alpha(r) - r * ph), EZ))
        return dn.scale(s, v)

    def urule(x, y, z):
        r, ph = radius(x, y), azimuth(x, y)
        da = dn.derivative(alpha, r)
        dc = dn.derivative(lambda rr: 0.5 * k * alpha(rr) * alpha(rr) + beta(rr), r)
        v = dn.add(dn.scale(r * (da - ph), _gphi(x, y, z)), _gr(x, y, z))
        return dn.add(v, dn.scale(dc, EZ))

    def B2(x, y, z):
        r, ph = radius(x, y), azimuth(x, y)
        s = f(zeta(x, y, z))
        eta = k * (alpha(r) - r * ph)
        return s * s * (1.0 + eta * eta)

    torus = TorusSpec.displaced(h, r0, level)
    zeta_f = ScalarField(zeta, "z-h")
    formulas = {
        "B_clebsch": clebsch(ScalarField(radius, "r"), zeta_f, zeta_f.compose(f, "f(z-h)")),
        "u_clebsch": clebsch(zeta_f, ScalarField(rho, "rho")),
        "B2": ScalarField(B2, "f^2 (1 + eta^2)"),
    }
    return QsSolution(
        B=VectorField(Brule, "B_local"),
        descriptor="local_qs",
        u=VectorField(urule, "u_local"),
        zeta=zeta_f,
        dg_dzeta=f,
        psi=ScalarField(torus.psi, "Psi_T"),
        torus=torus,
        h=ScalarField(h, "h"),
        k=k,
        claims=QS_CLAIMS,
        formulas=formulas,
        cut=half_plane_cut if k != 0 else None,
        domain=Domain(angle=(guard, TWO_PI - guard)),
        params={"k": k, "r0": r0, "level": level},
    )


def flux_aligned_qs(k: float = 0.18, f: Optional[Callable] = None, r0: float = 1.0, level: float = 0.1,
                    guard: float = 0.05) -> QsSolution:
    """Family with both B and u tangent to the flux surfaces of Psi_T.

    ``f`` is a rule of Psi_T (default 1); B x u = f(Psi_T) grad Psi_T.
    """
    if f is None:
        f = lambda s: 1.0 + 0.0 * s

    def h(x, y, z):
        r, ph = radius(x, y), azimuth(x, y)
        return -0.5 * k * r * r * ph * ph

    torus = TorusSpec.displaced(h, r0, level)
    psi = torus.psi

    def Brule(x, y, z):
        r, ph = radius(x, y), azimuth(x, y)
        v = dn.sub(dn.scale(r, _gphi(x, y, z)), dn.scale(k * r * ph, EZ))
        return dn.scale(-f(psi(x, y, z)), v)

    def urule(x, y, z):
        r, ph = radius(x, y), azimuth(x, y)
        w = z + 0.5 * k * r * r * ph * ph
        v = dn.sub(_gr(x, y, z), dn.scale(r * ph, _gphi(x, y, z)))
        return dn.add(dn.scale(-(r - r0), EZ), dn.scale(w, v))

    def B2(x, y, z):
        r, ph = radius(x, y), azimuth(x, y)
        s = f(psi(x, y, z))
        return s * s * (1.0 + k * k * r * r * ph * ph)

    psi_f = ScalarField(psi, "Psi_T")
    zeta5 = ScalarField(lambda x, y, z: z - h(x, y, z), "z-h")
    rho = ScalarField(lambda x, y, z: -radius(x, y) * azimuth(x, y), "rho")
    formulas = {
        "B_clebsch": clebsch(ScalarField(radius, "r"), zeta5, psi_f.compose(f, "f(Psi)")),
        "u_clebsch": clebsch(psi_f, rho),
        "B2": ScalarField(B2, "f^2 (1 + k^2 r^2 phi^2)"),
    }
    return QsSolution(
        B=VectorField(Brule, "B_flux_aligned"),
        descriptor="flux_aligned_qs",
        u=VectorField(urule, "u_flux_aligned"),
        zeta=psi_f,
        dg_dzeta=f,
        psi=psi_f,
        torus=torus,
        h=ScalarField(h, "h"),
        k=k,
        claims=QS_CLAIMS | {U_GRAD_PSI},
        formulas=formulas,
        cut=half_plane_cut if k != 0 else None,
        domain=Domain(angle=(guard, TWO_PI - guard)),
        params={"k": k, "r0": r0, "level": level},
    )


# displacement in a general orthogonal chart -----------------------------------------

@dataclass(frozen=True)
class RhoProfile:
    """Invertible Clebsch profile rho(eta) for the displacement equation."""

    forward: Callable
    inverse: Callable
    name: str = "rho"

    @classmethod
    def linear(cls, k: float) -> "RhoProfile":
        return cls(lambda e: e / k, lambda p: k * p, f"eta/{k}")


RADICAND_EPS = 1e-6


def chart_qs_displacement(chart: Chart, k: float = 0.1, mu0: float = 1.0, level: float = 0.02,
                          rho: Optional[RhoProfile] = None, nu0: float = 0.5 * np.pi,
                          eta0: Optional[Callable] = None, h0: Optional[Callable] = None,
                          f: Optional[Callable] = None, branch: int = 1, arc: float = 0.5,
                          guard: float = 0.02):
    """Solve for the displacement h(mu, nu) of a flux-aligned quasisymmetric torus.

    Along each mu-line, rho(eta) obeys d rho / d nu = -1 / (|grad mu| |grad nu|);
    for the linear profile this is d eta / d nu = -k / |grad mu|^2 on a
    conformal chart.  eta is then inverted for the slope

        dh/dnu = branch * sqrt(eta / |grad mu|^2 - 1) / |grad nu|,

    which is integrated again from h(nu0) = h0(mu).  Both integrals are
    adaptive quadratures evaluated lazily per sample, and they carry dual
    numbers so the assembled fields have exact derivatives.

    Default data start just inside the real-radicand region:
    eta0(mu) = |grad mu|^2(mu, nu0) (1 + 1e-6).  Returns ``(h, solution)``;
    ``solution.u`` is None when k = 0 (eta is then constant).
    """
    if f is None:
        f = lambda s: 1.0 + 0.0 * s
    if h0 is None:
        h0 = _zero1
    if eta0 is None:
        eta0 = lambda m: chart.grad_mu_norm2(m, nu0 + 0.0 * m) * (1.0 + RADICAND_EPS)
    if rho is None and k != 0:
        rho = RhoProfile.linear(k)

    def g_rho(m, s):
        return -1.0 / dn.sqrt(chart.grad_mu_norm2(m, s) * chart.grad_nu_norm2(m, s))

    def rho_chart(m, s):
        return rho.forward(eta0(m)) + nu_integral(g_rho, m, s, nu0)

    def eta_chart(m, s):
        if rho is None:
            return eta0(m) + 0.0 * s
        return rho.inverse(rho_chart(m, s))

    def slope(m, s):
        gm2 = chart.grad_mu_norm2(m, s)
        rad = eta_chart(m, s) / gm2 - 1.0
        prad = np.asarray(dn.primal(rad))
        if np.any(prad < 0):
            bad = np.asarray(dn.primal(s)) + 0.0 * prad
            at = float(np.ravel(bad)[np.argmin(np.ravel(prad))])
            raise NegativeRadicand(f"eta/|grad mu|^2 < 1 at nu = {at:.6g}", nu=at)
        return branch * dn.sqrt(rad) / dn.sqrt(chart.grad_nu_norm2(m, s))

    def h_chart(m, s):
        return h0(m) + nu_integral(slope, m, s, nu0, graded=True)

    def h_rule(x, y, z):
        return h_chart(chart.mu(x, y), chart.nu(x, y))

    def mu_rule(x, y, z):
        return chart.mu(x, y)

    torus = TorusSpec.general(mu_rule, mu0, h_rule, level, chart=chart)
    psi_f = ScalarField(torus.psi, "Psi_T")
    zeta5 = ScalarField(lambda x, y, z: z - h_rule(x, y, z), "z-h")
    B = clebsch(ScalarField(mu_rule, "mu"), zeta5, psi_f.compose(f, "f(Psi)"), name="B_chart")

    def B2(x, y, z):
        s = f(torus.psi(x, y, z))
        return s * s * eta_chart(chart.mu(x, y), chart.nu(x, y))

    u = None
    claims = {DIV_B, B_GRAD_PSI}
    if rho is not None:
        rho_f = ScalarField(lambda x, y, z: rho_chart(chart.mu(x, y), chart.nu(x, y)), "rho")
        u = clebsch(psi_f, rho_f, name="u_chart")
        claims |= {DIV_U, B_CROSS_U, U_GRAD_B2, U_GRAD_PSI}
    h_field = ScalarField(h_rule, "h")
    sol = QsSolution(
        B=B,
        descriptor=f"chart_qs_displacement[{chart.name}]",
        u=u,
        zeta=psi_f,
        dg_dzeta=f,
        psi=psi_f,
        torus=torus,
        h=h_field,
        k=k,
        claims=frozenset(claims),
        formulas={"B2": ScalarField(B2, "f^2 eta")},
        cut=chart.nu_cut_distance,
        domain=Domain(angle=(nu0 - arc, nu0 - guard) if k >= 0 else (nu0 + guard, nu0 + arc)),
        params={"k": k, "mu0": mu0, "nu0": nu0, "level": level, "chart": chart.name},
    )
    return h_field, sol
