"""Acceptance criteria 1-8.

Every sub-check records a PASS/FAIL line through the ``acceptance`` fixture;
the terminal summary then prints one line per criterion.  Sub-checks that the
implementation cannot meet are kept at their stated tolerance and marked
``xfail(strict=True)``.
"""

import filecmp
import json
import time

import numpy as np
import pytest

from quasisym import charpit as cp
from quasisym import cli
from quasisym import fields as fl
from quasisym import solutions as S
from quasisym import verify as V
from quasisym.coordinates import EllipticChart, EllipticPoint, cart_from_elliptic, elliptic_from_cart
from quasisym.sampling import sample_interior

K = 0.18
TOL = 1e-8


def _wrap(d):
    return np.abs((d + np.pi) % (2 * np.pi) - np.pi)


# 1. chart fidelity ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def chart_run():
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    ell = EllipticChart(2.0)
    n = 10_000
    q0 = EllipticPoint(rng.uniform(0.1, 3.0, n), rng.uniform(0.0, 2 * np.pi, n), rng.normal(size=n))
    p = cart_from_elliptic(q0, ell)
    q = elliptic_from_cart(p, ell)
    rt = max(np.max(np.abs(q.mu - q0.mu)), np.max(_wrap(q.nu - q0.nu)))
    quadrants = {(bool(a), bool(b)) for a, b in zip(p[:, 0] > 0, p[:, 1] > 0)}
    full = V.chart_harmonic_check(ell, p[:1000], h_fd=1e-4)
    inner = p[q0.mu >= 0.3][:1000]
    away = V.chart_harmonic_check(ell, inner, h_fd=1e-4)
    return dict(rt=rt, quadrants=quadrants, full=full, away=away, elapsed=time.perf_counter() - t0)


def test_c1_round_trip(chart_run, acceptance):
    ok = chart_run["rt"] < 1e-10 and len(chart_run["quadrants"]) == 4
    acceptance(1, "round trip", ok, f"max err {chart_run['rt']:.2e} over 1e4 points")
    assert ok


def test_c1_analytic_residuals(chart_run, acceptance):
    r = chart_run["full"]
    m = max(r["orthogonality"].max, r["norm_equality"].max)
    acceptance(1, "orthogonality and norm equality", m < 1e-12, f"max {m:.2e}")
    assert m < 1e-12


def test_c1_fd_laplacian_away_from_foci(chart_run, acceptance):
    r = chart_run["away"]
    m = max(r["laplacian_mu"].max, r["laplacian_nu"].max)
    acceptance(1, "FD Laplacian, mu >= 0.3", m < 1e-5, f"max {m:.2e}")
    assert m < 1e-5


@pytest.mark.xfail(strict=True, reason="O(h^2) truncation near the foci exceeds 1e-5 at h = 1e-4; see ledger")
def test_c1_fd_laplacian_full_range(chart_run, acceptance):
    r = chart_run["full"]
    m = max(r["laplacian_mu"].max, r["laplacian_nu"].max)
    acceptance(1, "FD Laplacian, mu >= 0.1", m < 1e-5, f"max {m:.2e}")
    assert m < 1e-5


def test_c1_runtime(chart_run, acceptance):
    t = chart_run["elapsed"]
    acceptance(1, "runtime", t < 5.0, f"{t:.2f} s")
    assert t < 5.0


# 2. twisted-field identity suite -------------------------------------------------------

def test_c2_local_qs_suite(acceptance):
    t0 = time.perf_counter()
    sol = S.local_qs(K)
    p = sample_interior(sol, 1000)
    rep = V.qs_residuals(sol, p, "dual")
    elapsed = time.perf_counter() - t0
    core = [S.DIV_B, S.DIV_U, S.B_CROSS_U, S.U_GRAD_B2, S.B_GRAD_PSI]
    worst = max(rep[n].max for n in core)
    claimed = [e for e in rep.entries if e.claimed]
    ok = len(p) == 1000 and worst < TOL and all(e.max < TOL for e in claimed)
    acceptance(2, "five identities", ok, f"max {worst:.2e}, {len(claimed)} claimed entries")
    acceptance(2, "runtime", elapsed < 5.0, f"{elapsed:.2f} s")
    assert ok and elapsed < 5.0


# 3. flux-aligned identity suite --------------------------------------------------------

@pytest.mark.parametrize("label,f", [("f = 1", None), ("f = 1 + Psi", lambda s: 1.0 + s)])
def test_c3_flux_aligned_suite(label, f, acceptance):
    sol = S.flux_aligned_qs(K, f=f)
    rep = V.qs_residuals(sol, sample_interior(sol, 1000), "dual")
    claimed = [e for e in rep.entries if e.claimed]
    worst = max(e.max for e in claimed)
    ok = len(claimed) == 9 and S.U_GRAD_PSI in {e.name for e in claimed} and worst < TOL
    acceptance(3, label, ok, f"{len(claimed)} identities, max {worst:.2e}")
    assert ok


# 4. anisotropic force balance ----------------------------------------------------------

@pytest.mark.parametrize("kind", ["local_qs", "flux_aligned_qs"])
def test_c4_force_balance(kind, acceptance):
    sol = S.local_qs(K) if kind == "local_qs" else S.flux_aligned_qs(K)
    p = sample_interior(sol, 1000)
    base = V.force_balance_residual(sol.B, fl.PressureClosure(4.0, 1.0), p, h=1e-5, cut=sol.cut)
    pert = V.force_balance_residual(sol.B, fl.PressureClosure(4.0, 1.01), p, h=1e-5, cut=sol.cut)
    r0, r1 = base["force_balance"].max, pert["force_balance"].max
    ok = r0 < 1e-5
    sane = r1 >= 1e3 * r0
    acceptance(4, f"{kind} residual", ok, f"max {r0:.2e}")
    acceptance(4, f"{kind} sigma = 1.01", sane, f"ratio {r1 / r0:.2e}")
    assert ok and sane


# 5. characteristic integration ---------------------------------------------------------

PROB = cp.SurfaceProblem(2.0, 1.0, 0.2)


@pytest.fixture(scope="module")
def charpit_run():
    t0 = time.perf_counter()
    default = cp.local_solution(PROB, tol=1e-10)
    t_default = time.perf_counter() - t0
    halved = cp.local_solution(PROB, tol=5e-11)
    fd = []
    for n in (11, 21, 41):
        g = np.linspace(0.8, 1.3, n), np.linspace(0.0, 0.5, n)
        fd.append(float(np.max(cp.local_solution(PROB, *g, tol=1e-10).fd_residual)))
    return dict(default=default, halved=halved, fd=fd, t_default=t_default,
                elapsed=time.perf_counter() - t0)


def test_c5_default_patch(charpit_run, acceptance):
    m = charpit_run["default"].max_F
    acceptance(5, "max |F| at defaults", m < 1e-8, f"{m:.2e}")
    assert m < 1e-8


@pytest.mark.xfail(strict=True, reason="max |F| tracks the step controller, not tol^p; see ledger")
def test_c5_halving_tol(charpit_run, acceptance):
    ratio = charpit_run["default"].max_F / charpit_run["halved"].max_F
    acceptance(5, "halving tol", ratio >= 4.0, f"reduction {ratio:.2f}x (need 4x)")
    assert ratio >= 4.0


def test_c5_second_order_eikonal(charpit_run, acceptance):
    e = np.array(charpit_run["fd"])
    rates = np.log2(e[:-1] / e[1:])
    ok = bool(np.all(rates > 1.7) and rates[-1] > 1.9)
    acceptance(5, "second-order FD eikonal", ok, "rates " + ", ".join(f"{r:.2f}" for r in rates))
    assert ok


def test_c5_runtime(charpit_run, acceptance):
    t = charpit_run["elapsed"]
    acceptance(5, "runtime", t < 30.0, f"{t:.1f} s total ({charpit_run['t_default']:.1f} s at defaults)")
    assert t < 30.0


# 6. asymmetry certification ------------------------------------------------------------

def _scan(sol, n=64):
    return V.isometry_scan(sol.B, sample_interior(sol, n))


def test_c6_asymmetry(acceptance):
    control = _scan(S.axisym_torus_field())
    thr = V.calibrated_threshold(control)
    ok = acceptance(6, "control", control.s < 1e-8, f"s = {control.s:.2e}, threshold {thr:.2e}")
    for name, sol in (("twisted", S.local_qs(K)), ("helical", S.helical_selfqs())):
        s = _scan(sol).s
        ok &= acceptance(6, name, s >= thr, f"s = {s:.2e}, {s / max(control.s, 1e-300):.1e}x control")
    assert ok


# 7. locality obstruction ---------------------------------------------------------------

def test_c7_gap(acceptance):
    r, z = np.array([1.0]), np.linspace(-0.3, 0.3, 13)
    g0 = V.singlevalued_gap(S.local_qs(0.0), r, z)
    gk = V.singlevalued_gap(S.local_qs(K), r, z)
    a = max(g0["B_gap"].max, g0["psi_gap"].max)
    b = gk["B_gap"].max
    acceptance(7, "k = 0", a < 1e-12, f"gap {a:.2e}")
    acceptance(7, "k = 0.18", b > 1e-3, f"gap {b:.2e}")
    assert a < 1e-12 and b > 1e-3


# 8. figure data ------------------------------------------------------------------------

def test_c8_figures(tmp_path, acceptance, capsys):
    dirs = [tmp_path / "a", tmp_path / "b"]
    codes = [cli.main(["figures", "--out", str(d), "--seed", "5"]) for d in dirs]
    capsys.readouterr()
    resid = {}
    for n in range(1, 6):
        idx = json.loads((dirs[0] / f"figure{n}.json").read_text())
        assert all(f["file"] for f in idx["files"])
        resid.update({f"{n}/{k}": v for k, v in idx["psi_residual"].items()})
    worst = max(resid.values())
    names = sorted(p.name for p in dirs[0].iterdir())
    _, mismatch, errors = filecmp.cmpfiles(*dirs, names, shallow=False)
    ok_resid = codes == [0, 0] and worst < 1e-8
    ok_det = not mismatch and not errors and names == sorted(p.name for p in dirs[1].iterdir())
    acceptance(8, "mesh Psi residual", ok_resid, f"max {worst:.2e} over {len(resid)} meshes")
    acceptance(8, "byte-exact determinism", ok_det, f"{len(names)} files compared")
    assert ok_resid and ok_det
