import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasisym import dual as dn
from quasisym import fields as fl
from quasisym import solutions as S
from quasisym import verify as V
from quasisym.coordinates import CylindricalChart, EllipticChart, PolarChart, azimuth, radius
from quasisym.errors import CutSurface, FocalSegment, RankDeficientSamples, TangentialDegeneracy, ZeroField
from quasisym.sampling import sample_interior

K = 0.18


# report plumbing ---------------------------------------------------------------------

def test_report_invariants(flux_aligned, flux_aligned_pts):
    rep = V.qs_residuals(flux_aligned, flux_aligned_pts[:200])
    pts = {tuple(p) for p in flux_aligned_pts[:200]}
    for e in rep.entries:
        assert e.max >= e.mean >= 0
        assert tuple(e.worst_point) in pts
    d = json.loads(rep.to_json())
    assert d["schema_version"] == V.SCHEMA_VERSION and d["passed"] is True
    assert {"name", "max", "mean", "n_samples", "method", "worst_point"} <= set(d["entries"][0])
    assert "div_B" in rep.table()


def test_merge_keeps_all_entries(flux_aligned, flux_aligned_pts):
    a = V.qs_residuals(flux_aligned, flux_aligned_pts[:20])
    b = V.force_balance_residual(flux_aligned.B, fl.PressureClosure(), flux_aligned_pts[:20])
    m = a.merge(b)
    assert len(m.entries) == len(a.entries) + len(b.entries) and "force_balance" in m


# quasisymmetry residuals -----------------------------------------------------------------

def test_injected_fault_is_flagged(flux_aligned, flux_aligned_pts):
    p = flux_aligned_pts[:300]
    bad = flux_aligned.with_u(flux_aligned.u + fl.gradient_field(flux_aligned.psi).scaled(1e-3))
    rep = V.qs_residuals(bad, p)
    assert not rep.passed
    g = fl.grad(flux_aligned.psi, p)
    want = 1e-3 * np.einsum("ni,ni->n", g, g)
    np.testing.assert_allclose(rep[S.U_GRAD_PSI].max, np.max(want), rtol=1e-8)


def test_fd_near_cut_raises(bqs):
    p = np.array([[np.cos(1e-6), np.sin(1e-6), 0.0]])
    with pytest.raises(CutSurface):
        V.qs_residuals(bqs, p, method="fd")
    V.qs_residuals(bqs, p, method="dual")


def test_dual_and_fd_agree_to_second_order(flux_aligned, flux_aligned_pts):
    p = flux_aligned_pts[:100]
    errs = []
    for h in (4e-3, 2e-3):
        fd = V.qs_residuals(flux_aligned, p, "fd", h=h)
        errs.append(fd[S.DIV_B].max + fd[S.U_GRAD_B2].max)
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_reparametrization_invariance(flux_aligned, flux_aligned_pts):
    p = flux_aligned_pts[:300]
    base = V.qs_residuals(flux_aligned, p)[S.B_CROSS_U]
    expz = flux_aligned.psi.compose(dn.exp, "exp Psi")
    alt = replace(flux_aligned, zeta=expz, dg_dzeta=lambda s: 1.0 / s)
    e = V.qs_residuals(alt, p)[S.B_CROSS_U]
    assert e.passed and abs(e.max - base.max) < 1e-13


# force balance -------------------------------------------------------------------------

def test_force_balance_bqs(bqs, bqs_pts):
    rep = V.force_balance_residual(bqs.B, fl.PressureClosure(4.0, 1.0), bqs_pts[:300], h=1e-5, cut=bqs.cut)
    assert rep["force_balance"].max < 1e-6


def test_force_balance_sigma_perturbation_oracle(flux_aligned, flux_aligned_pts):
    # with sigma constant, div Pi = sigma (curl B) x B, so the residual is |1 - sigma| |J x B|
    p = flux_aligned_pts[:200]
    rep = V.force_balance_residual(flux_aligned.B, fl.PressureClosure(4.0, 1.01), p, method="dual")
    JxB = np.linalg.norm(np.cross(fl.curl(flux_aligned.B, p), flux_aligned.B(p)), axis=1)
    np.testing.assert_allclose(rep["force_balance"].max, 0.01 * JxB.max(), rtol=1e-8)


def test_force_balance_zero_field():
    zero = fl.constant_vector((0, 0, 0))
    with pytest.raises(ZeroField):
        V.force_balance_residual(zero, fl.PressureClosure(), np.array([[0.1, 0.2, 0.3]]))


def test_negative_pressure_flagged(flux_aligned, flux_aligned_pts):
    rep = V.force_balance_residual(flux_aligned.B, fl.PressureClosure(0.5, 1.0), flux_aligned_pts[:20])
    assert rep.notes["negative_pressure"] is True


# self-quasisymmetry ---------------------------------------------------------------------------

def test_selfqs_helical():
    sol = S.helical_selfqs()
    rep = V.selfqs_residual(sol.B, sample_interior(sol, 300))
    assert rep.passed and rep[S.B_GRAD_B2].max < 1e-8


def test_selfqs_generic_clebsch_reported_not_asserted(bqs, bqs_pts):
    theta = fl.ScalarField(lambda x, y, z: dn.arctan2(z - bqs.h.rule(x, y, z), radius(x, y) - 1.0))
    scale = fl.ScalarField(lambda x, y, z: bqs.psi.rule(x, y, z) * theta.rule(x, y, z))
    B = fl.clebsch(bqs.psi, theta, scale)
    p = bqs_pts[:200]
    p = p[np.abs(p[:, 2] - bqs.h(p)) > 1e-2]  # off the theta cut when r < 1
    rep = V.selfqs_residual(B, p)
    e = rep[S.B_GRAD_B2]
    assert e.max > 1e-6


# second-order form ----------------------------------------------------------------------------

def _gsqs_pair():
    sol = S.flux_aligned_qs(K)
    theta = fl.ScalarField(lambda x, y, z: dn.arctan2(z - sol.h.rule(x, y, z), radius(x, y) - 1.0), "theta")
    drho = lambda zeta, b2: -1.0 / (2.0 * K * np.sqrt(b2 - 1.0))
    p = sample_interior(sol, 300)
    p = p[(np.arctan2(p[:, 1], p[:, 0]) % (2 * np.pi) > 0.2) & (np.hypot(p[:, 0], p[:, 1]) > 1.0 + 1e-2)]
    return sol, theta, drho, p


def test_gsqs_known_pair():
    sol, theta, drho, p = _gsqs_pair()
    rep = V.gsqs_residual(sol.psi, theta, drho, p)
    assert rep.passed and rep["gsqs"].max < 1e-6


def test_gsqs_degenerate_theta_shift():
    sol, theta, drho, p = _gsqs_pair()
    psi = sol.psi.rule
    shifted = fl.ScalarField(lambda x, y, z: theta.rule(x, y, z) + psi(x, y, z) ** 2)
    a = V.gsqs_residual(sol.psi, theta, drho, p)["gsqs"]
    b = V.gsqs_residual(sol.psi, shifted, drho, p)["gsqs"]
    assert abs(a.max - b.max) < 1e-9


def test_gsqs_tangential_degeneracy():
    X = fl.ScalarField(lambda x, y, z: x)
    Y = fl.ScalarField(lambda x, y, z: y)
    with pytest.raises(TangentialDegeneracy):
        V.gsqs_residual(X, Y, lambda a, b: 1.0 + 0 * b, np.array([[0.1, 0.2, 0.3]] * 3))


# charts -------------------------------------------------------------------------------------------

def _annulus(n, rng):
    r = rng.uniform(0.3, 3, n)
    ph = rng.uniform(0.1, 2 * np.pi - 0.1, n)
    return np.stack([r * np.cos(ph), r * np.sin(ph), rng.normal(size=n)], -1)


def test_cylindrical_chart_harmonic(rng):
    rep = V.chart_harmonic_check(CylindricalChart(), _annulus(300, rng), tol=1e-10)
    assert rep.passed


def _elliptic_samples(rng, n, mu_lo):
    from quasisym.coordinates import EllipticPoint, cart_from_elliptic
    q = EllipticPoint(rng.uniform(mu_lo, 3, n), rng.uniform(0.0, 2 * np.pi, n), rng.normal(size=n))
    return cart_from_elliptic(q, EllipticChart(2.0))


def test_elliptic_chart_harmonic(rng):
    rep = V.chart_harmonic_check(EllipticChart(2.0), _elliptic_samples(rng, 1000, 0.3), h_fd=1e-4)
    assert rep["orthogonality"].max < 1e-12 and rep["norm_equality"].max < 1e-12
    assert rep["laplacian_mu"].max < 1e-5 and rep["laplacian_nu"].max < 1e-5
    assert rep.passed


def test_elliptic_analytic_residuals_hold_down_to_mu_01(rng):
    rep = V.chart_harmonic_check(EllipticChart(2.0), _elliptic_samples(rng, 1000, 0.1), h_fd=1e-4)
    assert rep["orthogonality"].max < 1e-12 and rep["norm_equality"].max < 1e-12


def test_fd_laplacian_is_second_order_near_focus():
    from quasisym.coordinates import EllipticPoint, cart_from_elliptic
    ell = EllipticChart(2.0)
    p = cart_from_elliptic(EllipticPoint(np.array([0.1]), np.array([0.05]), np.array([0.0])), ell)
    errs = [abs(fl.laplacian(fl.ScalarField(ell.mu), p, "fd", h=h)[0]) for h in (1e-4, 1e-5)]
    assert 70 < errs[0] / errs[1] < 130


def test_polar_chart_is_not_conformal(rng):
    rep = V.chart_harmonic_check(PolarChart(), _annulus(50, rng))
    assert not rep["norm_equality"].claimed and rep["norm_equality"].max > 0.1
    assert rep["orthogonality"].passed


def test_chart_check_focal():
    with pytest.raises(FocalSegment):
        V.chart_harmonic_check(EllipticChart(2.0), np.array([[2.0, 0.0, 0.0]]))


# isometry scan -----------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def control():
    sol = S.axisym_torus_field(lambda s: 1.0 + s)
    return V.isometry_scan(sol.B, sample_interior(sol, 64))


def test_axisymmetric_control(control):
    assert control.s < 1e-8
    assert np.isclose(abs(control.b[2]), 1.0, atol=1e-6) or control.multiplicity > 1
    assert np.isclose(np.linalg.norm(control.generator), 1.0)


def test_axisymmetric_generator_is_rotation():
    sol = S.axisym_torus_field(lambda s: 1.0 + s)
    # lambda depends on (r, z): only the rotation about z survives
    r = V.isometry_scan(sol.B, sample_interior(sol, 64))
    assert r.multiplicity == 1
    np.testing.assert_allclose(np.abs(r.generator), [0, 0, 0, 0, 0, 1.0], atol=1e-6)


def test_constant_field_null_space():
    pts = np.random.default_rng(0).normal(size=(20, 3))
    r = V.isometry_scan(fl.constant_vector((0.0, 0.0, 1.0)), pts)
    assert r.s == 0.0 and r.multiplicity == 4


@pytest.mark.parametrize("make", [lambda: S.local_qs(K), lambda: S.helical_selfqs()])
def test_asymmetric_fields_exceed_threshold(make, control):
    sol = make()
    r = V.isometry_scan(sol.B, sample_interior(sol, 64))
    assert r.s > V.calibrated_threshold(control)
    assert r.multiplicity == 0


def test_scan_scale_invariant(bqs, bqs_pts):
    a = V.isometry_scan(bqs.B, bqs_pts[:64])
    b = V.isometry_scan(bqs.B.scaled(7.0), bqs_pts[:64])
    assert np.isclose(a.s, b.s, rtol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(-1, 1), st.floats(0, 2 * np.pi))
def test_scan_rotation_equivariance(a1, c2, a3):
    from scipy.spatial.transform import Rotation
    R = Rotation.from_euler("zyz", [a1, np.arccos(c2), a3]).as_matrix()
    sol = S.local_qs(K)
    p = sample_interior(sol, 64)
    base = V.isometry_scan(sol.B, p).s

    def rot_rule(x, y, z):
        q = [sum(R[i, j] * c for i, c in enumerate((x, y, z))) for j in range(3)]  # R^T x
        v = sol.B.rule(*q)
        return tuple(sum(R[i, j] * v[j] for j in range(3)) for i in range(3))

    turned = V.isometry_scan(fl.VectorField(rot_rule), p @ R.T).s
    assert np.isclose(base, turned, rtol=1e-8)


def test_rank_deficient_samples(bqs):
    with pytest.raises(RankDeficientSamples):
        V.isometry_scan(bqs.B, np.ones((5, 3)))
    line = np.outer(np.linspace(0.5, 1.0, 10), [1.0, 0.2, 0.1])
    with pytest.raises(RankDeficientSamples):
        V.isometry_scan(bqs.B, line)


def test_b2_scan_is_reported(control, bqs_pts, bqs):
    assert control.b2_scan < 1e-8
    assert V.isometry_scan(bqs.B, bqs_pts[:64]).b2_scan > 1e-6


# single-valuedness -----------------------------------------------------------------------------------

R1, Z = np.array([1.0]), np.linspace(-0.2, 0.2, 9)


def test_gap_k0():
    rep = V.singlevalued_gap(S.local_qs(0.0), R1, Z)
    assert rep["B_gap"].max < 1e-12 and rep["psi_gap"].max < 1e-12


def test_gap_twisted():
    rep = V.singlevalued_gap(S.local_qs(K), R1, Z)
    assert rep["B_gap"].max > 1e-3


def test_gap_helical():
    assert V.singlevalued_gap(S.helical_selfqs(), R1, Z)["B_gap"].max < 1e-12
