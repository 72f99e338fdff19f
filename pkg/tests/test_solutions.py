import numpy as np
import pytest

from quasisym import dual as dn
from quasisym import fields as fl
from quasisym import solutions as S
from quasisym import verify as V
from quasisym.coordinates import CylindricalChart, EllipticChart, PolarChart, azimuth, radius
from quasisym.errors import NegativeE, NegativeRadicand
from quasisym.sampling import sample_interior

K = 0.18


def _pts(sol, n=300, seed=0):
    return sample_interior(sol, n, seed=seed)


def _claimed_pass(rep):
    failed = [e.name for e in rep.entries if e.claimed and not e.passed]
    assert not failed, rep.table()


# helical self-quasisymmetric field -------------------------------------------------

def test_helical_unit_profile_tangent_to_cylinders():
    sol = S.helical_selfqs(lambda r, w: 1.0 + 0.0 * r)
    p = _pts(sol)
    gr = fl.grad(fl.ScalarField(lambda x, y, z: radius(x, y)), p)
    assert np.max(np.abs(np.einsum("ni,ni->n", sol.B(p), gr))) < 1e-14


def test_helical_default_is_self_quasisymmetric():
    sol = S.helical_selfqs()
    rep = V.selfqs_residual(sol, _pts(sol, 1000))
    assert rep[S.B_GRAD_B2].max < 1e-8 and rep[S.DIV_B].max < 1e-8


def test_helical_matches_closed_form():
    sol = S.helical_selfqs()
    p = _pts(sol, 50)
    x, y, z = p.T
    r, ph = np.hypot(x, y), np.arctan2(y, x) % (2 * np.pi)
    w = z / r - ph
    # grad r x grad w = r_hat x (-z/r^2 r_hat + z_hat / r - phi_hat / r) = (-z_hat - phi_hat) / r ... expanded
    rhat = np.stack([x / r, y / r, 0 * r], -1)
    phat = np.stack([-y / r, x / r, 0 * r], -1)
    zhat = np.tile([0, 0, 1.0], (len(p), 1))
    gw = -(z / r ** 2)[:, None] * rhat + zhat / r[:, None] - phat / r[:, None]
    ref = (np.exp(-r) * np.sin(w))[:, None] * np.cross(rhat, gw)
    np.testing.assert_allclose(sol.B(p), ref, atol=1e-14)


# axisymmetric ---------------------------------------------------------------------

def test_axisym_unit_profile():
    sol = S.axisym_torus_field()
    p = _pts(sol)
    B = sol.B(p)
    np.testing.assert_allclose(np.einsum("ni,ni->n", B, B), 1.0, atol=1e-14)
    r = np.hypot(p[:, 0], p[:, 1])
    np.testing.assert_allclose(B, np.stack([-p[:, 1] / r, p[:, 0] / r, 0 * r], -1), atol=1e-15)


def test_axisym_rotation_invariance():
    sol = S.axisym_torus_field(lambda s: 1.0 + s)
    rot = fl.VectorField(lambda x, y, z: (-y, x, 0.0 * z))
    assert np.max(np.abs(fl.lie_derivative_vec(rot, sol.B, _pts(sol)))) < 1e-14


def test_axisym_b2_constant_per_level():
    sol = S.axisym_torus_field(lambda s: 1.0 + s)
    spread = V.level_spread(sol.B, sol.torus, [0.02, 0.05, 0.08])
    assert np.all(spread < 1e-10)
    rep = V.selfqs_residual(sol, _pts(sol))
    _claimed_pass(rep)


def test_axisym_negative_profile():
    sol = S.axisym_torus_field(lambda s: 0.01 - s)
    sol.B(np.array([1.1, 0.0, 0.0]))  # Psi = 0.005, E > 0
    with pytest.raises(NegativeE):
        sol.B(np.array([1.2, 0.0, 0.0]))  # Psi = 0.02


# elliptic translational -----------------------------------------------------------

def test_elliptic_current_formula():
    sol = S.elliptic_translational()  # lambda = -exp(-mu)
    p = _pts(sol)
    ell = sol.torus.chart
    gm = fl.grad(fl.ScalarField(ell.mu), p)
    mu = ell.mu(p[:, 0], p[:, 1])
    ref = np.zeros_like(p)
    ref[:, 2] = np.exp(-mu) * np.einsum("ni,ni->n", gm, gm)
    np.testing.assert_allclose(fl.curl(sol.B, p), ref, atol=1e-12)


def test_elliptic_translational_is_qs():
    sol = S.elliptic_translational()
    rep = V.qs_residuals(sol, _pts(sol))
    _claimed_pass(rep)
    assert rep[S.U_GRAD_B2].max < 1e-12


def test_elliptic_unit_lambda_gives_zeta_mu():
    sol = S.elliptic_translational(lambda m: 1.0 + 0.0 * m)
    p = _pts(sol)
    mu = sol.torus.chart.mu(p[:, 0], p[:, 1])
    np.testing.assert_allclose(sol.zeta(p), mu - 1.0, atol=1e-13)  # antiderivative from mu0 = 1
    gm = fl.grad(fl.ScalarField(sol.torus.chart.mu), p)
    np.testing.assert_allclose(np.cross(sol.B(p), sol.u(p)), gm, atol=1e-13)


# local and flux-aligned families -------------------------------------------------------

def test_local_qs_identities(bqs, bqs_pts):
    rep = V.qs_residuals(bqs, bqs_pts)
    _claimed_pass(rep)
    x, y, z = bqs_pts.T
    r, ph = np.hypot(x, y), np.arctan2(y, x) % (2 * np.pi)
    # B x u = -grad cos(z + k r^2 phi^2 / 2)
    c = fl.ScalarField(lambda x, y, z: dn.cos(z + 0.5 * K * radius(x, y) ** 2 * azimuth(x, y) ** 2))
    np.testing.assert_allclose(np.cross(bqs.B(bqs_pts), bqs.u(bqs_pts)), -fl.grad(c, bqs_pts), atol=1e-12)


def test_local_qs_with_integration_factors():
    sol = S.local_qs(k=K, alpha=lambda r: 0.3 * r, beta=lambda r: 0.1 * r * r)
    _claimed_pass(V.qs_residuals(sol, _pts(sol)))


def test_local_qs_h_formula():
    a, b = (lambda r: 0.3 * r), (lambda r: 0.1 * r * r)
    sol = S.local_qs(k=K, alpha=a, beta=b)
    p = _pts(sol, 20)
    r, ph = np.hypot(p[:, 0], p[:, 1]), np.arctan2(p[:, 1], p[:, 0]) % (2 * np.pi)
    np.testing.assert_allclose(sol.h(p), K * r * ph * (a(r) - 0.5 * r * ph) + b(r), atol=1e-14)


def test_local_qs_k0_is_axisymmetric():
    sol = S.local_qs(k=0.0)
    p = _pts(sol)
    _claimed_pass(V.qs_residuals(sol, p))
    assert V.isometry_scan(sol.B, p[:64]).s < 1e-8


def test_flux_aligned_identities(flux_aligned, flux_aligned_pts):
    rep = V.qs_residuals(flux_aligned, flux_aligned_pts)
    _claimed_pass(rep)
    assert rep[S.U_GRAD_PSI].max < 1e-8


def test_flux_aligned_b2(flux_aligned, flux_aligned_pts):
    x, y, _ = flux_aligned_pts.T
    r, ph = np.hypot(x, y), np.arctan2(y, x) % (2 * np.pi)
    B = flux_aligned.B(flux_aligned_pts)
    np.testing.assert_allclose(np.einsum("ni,ni->n", B, B), 1 + K ** 2 * r ** 2 * ph ** 2, rtol=1e-14)


def test_flux_aligned_profile_one_plus_psi():
    sol = S.flux_aligned_qs(K, lambda s: 1.0 + s)
    rep = V.qs_residuals(sol, _pts(sol))
    _claimed_pass(rep)


def test_flux_aligned_k0_reduction():
    # poloidal rotation -(r - r0) grad z + z grad r, plus the k-free toroidal term -z phi (r grad phi)
    sol = S.flux_aligned_qs(0.0)
    p = _pts(sol)
    x, y, z = p.T
    r, ph = np.hypot(x, y), np.arctan2(y, x) % (2 * np.pi)
    rhat = np.stack([x / r, y / r, 0 * r], -1)
    phat = np.stack([-y / r, x / r, 0 * r], -1)
    poloidal = -(r - 1.0)[:, None] * np.array([0, 0, 1.0]) + z[:, None] * rhat
    np.testing.assert_allclose(sol.u(p), poloidal - (z * ph)[:, None] * phat, atol=1e-14)
    # the poloidal part alone is tangent to the circular cross-sections
    gpsi = fl.grad(sol.psi, p)
    assert np.max(np.abs(np.einsum("ni,ni->n", poloidal, gpsi))) < 1e-14


def test_with_u_replaces_only_u(flux_aligned):
    s2 = flux_aligned.with_u(fl.constant_vector((1, 0, 0)), "x")
    assert s2.B is flux_aligned.B and s2.descriptor == "x"


@pytest.mark.parametrize("make", [
    lambda: S.helical_selfqs(), lambda: S.axisym_torus_field(lambda s: 1 + s),
    lambda: S.elliptic_translational(), lambda: S.local_qs(K), lambda: S.flux_aligned_qs(K),
])
def test_every_constructor_is_solenoidal(make):
    sol = make()
    assert np.max(np.abs(fl.div(sol.B, _pts(sol, 500)))) < 1e-8


@pytest.mark.parametrize("make, name", [
    (lambda: S.local_qs(K), S.U_GRAD_PSI),
    (lambda: S.local_qs(K), S.B_GRAD_B2),
    (lambda: S.elliptic_translational(), S.U_GRAD_PSI),
    (lambda: S.elliptic_translational(), S.B_GRAD_B2),
    (lambda: S.flux_aligned_qs(K), S.B_GRAD_B2),
])
def test_unclaimed_identities_fail(make, name):
    sol = make()
    assert name not in sol.claims
    e = V.counterexample_identity(sol, _pts(sol), name)
    assert not e.passed and e.max > 1e-3


# displacement solved in a general chart --------------------------------------------------

def test_cylindrical_chart_matches_closed_form():
    k, mu0, nu0 = 0.1, 0.1, np.pi / 2
    h, sol = S.chart_qs_displacement(CylindricalChart(), k=k, mu0=mu0, nu0=nu0)
    p = _pts(sol, 30)
    r = np.hypot(p[:, 0], p[:, 1])
    nu = np.arctan2(p[:, 1], p[:, 0]) % (2 * np.pi)
    eps, Kr = S.RADICAND_EPS, k * r ** 4
    ref = -(2 * r / (3 * Kr)) * ((eps + Kr * (nu0 - nu)) ** 1.5 - eps ** 1.5)
    np.testing.assert_allclose(h(p), ref, atol=1e-12)


def test_polar_chart_reproduces_flux_aligned_family():
    k = K
    fa = S.flux_aligned_qs(k)
    rho = S.RhoProfile(lambda e: -dn.sqrt(e - 1.0) / k, lambda q: 1.0 + k * k * q * q, "sqrt")
    h, sol = S.chart_qs_displacement(PolarChart(), k=k, mu0=1.0, level=0.1, rho=rho, nu0=1.0,
                                     eta0=lambda m: 1.0 + k * k * m * m, h0=lambda m: -0.5 * k * m * m,
                                     branch=-1)
    p = _pts(fa, 100)
    p = p[np.arctan2(p[:, 1], p[:, 0]) % (2 * np.pi) > 1.05]  # away from the radicand zero at nu0
    np.testing.assert_allclose(h(p), fa.h(p), atol=1e-12)
    np.testing.assert_allclose(sol.B(p), fa.B(p), atol=1e-12)
    np.testing.assert_allclose(sol.u(p), fa.u(p), atol=1e-12)
    np.testing.assert_allclose(fl.jacobian(sol.B, p), fl.jacobian(fa.B, p), atol=1e-10)


def test_k0_unit_eta_gives_constant_h():
    h, sol = S.chart_qs_displacement(CylindricalChart(), k=0.0, mu0=0.1,
                                     eta0=lambda m: dn.exp(-2.0 * m), h0=lambda m: 0.25 + 0.0 * m)
    assert sol.u is None
    p = _pts(sol, 30)
    np.testing.assert_allclose(h(p), 0.25, atol=1e-15)


def test_negative_radicand_reports_nu():
    ell = EllipticChart(2.0)
    # eta0 below |grad mu|^2 at nu0
    _, sol = S.chart_qs_displacement(ell, k=0.1, eta0=lambda m: 0.5 * ell.grad_mu_norm2(m, 0.5 * np.pi + 0 * m))
    p = ell.to_cart(np.array([1.0]), np.array([1.2]))
    with pytest.raises(NegativeRadicand) as exc:
        sol.h(p)
    assert exc.value.nu is not None and np.isfinite(exc.value.nu)


def test_elliptic_chart_bundle_passes_on_short_arc():
    _, sol = S.chart_qs_displacement(EllipticChart(2.0), k=0.05, mu0=1.0, level=0.02, arc=0.3)
    rep = V.qs_residuals(sol, _pts(sol, 60))
    _claimed_pass(rep)
