"""Residual suites for solution bundles and the Euclidean-isometry scan."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import dual as dn
from . import fields as fl
from .coordinates import TWO_PI, Chart
from .errors import (CutSurface, FocalSegment, RankDeficientSamples, TangentialDegeneracy,
                     ZeroField)
from .fields import ScalarField, VectorField
from .solutions import (B2_ON_SURFACES, B_CROSS_U, B_GRAD_B2, B_GRAD_PSI, DIV_B, DIV_U,
                        U_GRAD_B2, U_GRAD_PSI, QsSolution)

SCHEMA_VERSION = 1
TOL_DUAL = 1e-8
TOL_FD = 1e-5
STENCIL_REACH = 4.0  # FD stencils must stay this many steps away from a cut


def default_tol(method: str) -> float:
    return TOL_DUAL if method == "dual" else TOL_FD


@dataclass
class ResidualEntry:
    name: str
    max: float
    mean: float
    n_samples: int
    method: str
    worst_point: list
    tol: Optional[float] = None
    claimed: bool = True

    @property
    def passed(self) -> bool:
        return self.tol is None or self.max < self.tol

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def entry(name: str, values, points, method: str, tol: Optional[float], claimed: bool = True) -> ResidualEntry:
    v = np.abs(np.asarray(values, float)).reshape(-1)
    pts = np.asarray(points, float).reshape(-1, 3)
    if v.size == 0:
        return ResidualEntry(name, 0.0, 0.0, 0, method, [], tol if claimed else None, claimed)
    i = int(np.argmax(v))
    return ResidualEntry(name, float(v[i]), float(np.mean(v)), int(v.size), method,
                         [float(c) for c in pts[min(i, len(pts) - 1)]], tol if claimed else None, claimed)


@dataclass
class ResidualReport:
    title: str
    entries: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> ResidualEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(e.name == name for e in self.entries)

    def add(self, e: ResidualEntry) -> ResidualEntry:
        self.entries.append(e)
        return e

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries if e.claimed)

    def merge(self, other: "ResidualReport") -> "ResidualReport":
        return ResidualReport(f"{self.title}+{other.title}", self.entries + other.entries,
                              {**self.notes, **other.notes})

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "title": self.title, "passed": self.passed,
                "entries": [e.to_dict() for e in self.entries], "notes": self.notes}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        head = f"{'identity':<22}{'max':>12}{'mean':>12}{'n':>7}  {'method':<6}{'tol':>10}  status"
        lines = [self.title, head, "-" * len(head)]
        for e in self.entries:
            tol = "-" if e.tol is None else f"{e.tol:.1e}"
            status = ("pass" if e.passed else "FAIL") if e.claimed else "info"
            lines.append(f"{e.name:<22}{e.max:>12.3e}{e.mean:>12.3e}{e.n_samples:>7}  {e.method:<6}{tol:>10}  {status}")
        return "\n".join(lines)


# helpers -----------------------------------------------------------------------

def _pts(samples) -> np.ndarray:
    p = np.asarray(samples, float)
    return p.reshape(-1, 3)


def b2_field(B: VectorField) -> ScalarField:
    rule = B.rule

    def b2(x, y, z):
        v = rule(x, y, z)
        return dn.dot(v, v)

    return ScalarField(b2, f"|{B.name}|^2", B.differentiable)


def _check_cut(cut: Optional[Callable], p, method: str, h=None):
    if method == "dual" or cut is None:
        return
    reach = STENCIL_REACH * fl.fd_steps(p, h)
    close = cut(p) <= reach
    if np.any(close):
        i = int(np.argmax(close))
        raise CutSurface(f"finite-difference stencil at {p[i].tolist()} straddles the cut")


def _norm(v) -> np.ndarray:
    return np.linalg.norm(v, axis=-1)


# quasisymmetry -------------------------------------------------------------------

def qs_residuals(sol: QsSolution, samples, method: str = "dual", tol: Optional[float] = None,
                 h=None, formulas: bool = True) -> ResidualReport:
    """Residuals of the quasisymmetry system for a bundle.

    Identities in ``sol.claims`` are asserted against ``tol``; the rest are
    reported for information.  Closed-form comparisons in ``sol.formulas`` are
    always asserted (they are how the bundle was derived).
    """
    p = _pts(samples)
    tol = default_tol(method) if tol is None else tol
    _check_cut(sol.cut, p, method, h)
    rep = ResidualReport(f"qs_residuals[{sol.descriptor}]", notes={"method": method, "n_samples": len(p)})
    claims = sol.claims
    Bv, JB = fl.values_and_jacobian(sol.B, p, method, h)
    rep.add(entry(DIV_B, np.trace(JB, axis1=1, axis2=2), p, method, tol, DIV_B in claims))
    B2 = b2_field(sol.B)
    gB2 = fl.grad(B2, p, method, h)
    psi_grad = fl.grad(sol.psi, p, method, h) if sol.psi is not None else None
    if psi_grad is not None:
        rep.add(entry(B_GRAD_PSI, np.einsum("ni,ni->n", Bv, psi_grad), p, method, tol, B_GRAD_PSI in claims))
    rep.add(entry(B_GRAD_B2, np.einsum("ni,ni->n", Bv, gB2), p, method, tol, B_GRAD_B2 in claims))
    if sol.u is not None:
        uv, Ju = fl.values_and_jacobian(sol.u, p, method, h)
        rep.add(entry(DIV_U, np.trace(Ju, axis1=1, axis2=2), p, method, tol, DIV_U in claims))
        if sol.zeta is not None:
            gz = fl.grad(sol.zeta, p, method, h)
            zval = sol.zeta(p)
            dg = np.ones(len(p)) if sol.dg_dzeta is None else np.broadcast_to(
                np.asarray(dn.primal(sol.dg_dzeta(zval)), float), zval.shape)
            rep.add(entry(B_CROSS_U, _norm(np.cross(Bv, uv) - dg[:, None] * gz), p, method, tol,
                          B_CROSS_U in claims))
        rep.add(entry(U_GRAD_B2, np.einsum("ni,ni->n", uv, gB2), p, method, tol, U_GRAD_B2 in claims))
        if psi_grad is not None:
            rep.add(entry(U_GRAD_PSI, np.einsum("ni,ni->n", uv, psi_grad), p, method, tol, U_GRAD_PSI in claims))
    if formulas:
        for name, ref in sol.formulas.items():
            if name == "curl_B":
                got = fl.curl_from_jacobian(JB)
                rep.add(entry(name, _norm(got - ref(p)), p, method, tol))
            elif name == "B_clebsch":
                rep.add(entry(name, _norm(Bv - ref(p)), p, "value", tol))
            elif name == "u_clebsch" and sol.u is not None:
                rep.add(entry(name, _norm(sol.u(p) - ref(p)), p, "value", tol))
            elif isinstance(ref, ScalarField):
                got = np.einsum("ni,ni->n", Bv, Bv)
                rep.add(entry(name, got - ref(p), p, "value", tol))
    return rep


def counterexample_identity(sol: QsSolution, samples, name: str, method: str = "dual") -> ResidualEntry:
    """Residual of an identity the bundle does *not* claim, asserted as if it did."""
    rep = qs_residuals(sol, samples, method, formulas=False)
    e = rep[name]
    e.claimed, e.tol = True, default_tol(method)
    return e


# force balance ---------------------------------------------------------------------

def force_balance_residual(B: VectorField, closure: Callable, samples, method: str = "fd",
                           h=None, tol: Optional[float] = None, curl_method: str = "dual",
                           cut: Optional[Callable] = None) -> ResidualReport:
    """|(curl B) x B - div Pi| with Pi built from ``closure`` (a map B^2 -> PressurePair)."""
    p = _pts(samples)
    tol = (TOL_FD if method == "fd" else TOL_DUAL) if tol is None else tol
    _check_cut(cut, p, method, h)
    Bv = B(p)
    if np.any(_norm(Bv) <= fl.ZERO_FIELD_EPS):
        raise ZeroField("|B| <= 1e-12 at a force-balance sample")
    JxB = np.cross(fl.curl(B, p, curl_method, h), Bv)
    divPi = fl.tensor_divergence(fl.pressure_tensor_field(B, closure), p, method, h)
    rep = ResidualReport("force_balance", notes={"method": method, "n_samples": len(p)})
    rep.add(entry("force_balance", _norm(JxB - divPi), p, method, tol))
    rep.add(entry("lorentz_force", _norm(JxB), p, curl_method, None, claimed=False))
    pairs = closure(np.einsum("ni,ni->n", Bv, Bv))
    rep.notes["negative_pressure"] = bool(np.any(np.asarray(pairs.p_perp) < 0))
    return rep


# self-quasisymmetry ------------------------------------------------------------------

def level_spread(B: VectorField, torus, values, n_theta: int = 24, n_phi: int = 24,
                 phi_range=(0.0, TWO_PI)) -> np.ndarray:
    """max - min of B^2 over points of each level set Psi = value."""
    out = []
    lo, hi = phi_range
    for v in values:
        pts = torus.surface(v, n_theta=n_theta, n_phi=n_phi, phi_max=hi - lo)
        pts = pts.reshape(-1, 3)
        if lo != 0.0:
            c, s = np.cos(lo), np.sin(lo)
            pts = np.stack([c * pts[:, 0] - s * pts[:, 1], s * pts[:, 0] + c * pts[:, 1], pts[:, 2]], -1)
        b2 = np.einsum("ni,ni->n", B(pts), B(pts))
        out.append(float(np.max(b2) - np.min(b2)))
    return np.array(out)


def selfqs_residual(sol, samples, method: str = "dual", tol: Optional[float] = None, h=None,
                    levels=None, spread_tol: float = 1e-10) -> ResidualReport:
    """|div B|, |B . grad B^2| and the per-level spread of B^2.

    ``sol`` is a QsSolution or a bare VectorField.  The spread is computed on
    surface meshes of ``sol.torus`` (levels default to quarter, half and
    three quarters of the boundary value) and asserted only when the bundle
    claims constancy of B^2 on flux surfaces.
    """
    if isinstance(sol, VectorField):
        sol = QsSolution(B=sol, descriptor=sol.name, claims=frozenset({DIV_B, B_GRAD_B2}))
    p = _pts(samples)
    tol = default_tol(method) if tol is None else tol
    _check_cut(sol.cut, p, method, h)
    rep = ResidualReport(f"selfqs[{sol.descriptor}]", notes={"method": method, "n_samples": len(p)})
    Bv, JB = fl.values_and_jacobian(sol.B, p, method, h)
    rep.add(entry(DIV_B, np.trace(JB, axis1=1, axis2=2), p, method, tol, DIV_B in sol.claims))
    gB2 = fl.grad(b2_field(sol.B), p, method, h)
    rep.add(entry(B_GRAD_B2, np.einsum("ni,ni->n", Bv, gB2), p, method, tol, B_GRAD_B2 in sol.claims))
    if sol.torus is not None:
        if levels is None:
            levels = [f * sol.torus.level for f in (0.25, 0.5, 0.75)]
        spread = level_spread(sol.B, sol.torus, levels, phi_range=sol.domain.angle)
        rep.add(ResidualEntry(B2_ON_SURFACES, float(np.max(spread)), float(np.mean(spread)), len(levels),
                                  "value", [], spread_tol if B2_ON_SURFACES in sol.claims else None,
                                  B2_ON_SURFACES in sol.claims))
        rep.notes["level_spread"] = {f"{v:.6g}": float(s) for v, s in zip(levels, spread)}
    return rep


# second-order form ---------------------------------------------------------------------

DEGENERACY_RTOL = 1e-10


def gsqs_residual(zeta: ScalarField, theta: ScalarField, drho_dB2: Callable, samples,
                  tol: float = 1e-6) -> ResidualReport:
    """Residual of grad zeta x grad theta . grad |grad zeta x grad theta|^2 = 1 / (d rho / d B^2).

    ``drho_dB2(zeta, B2)`` is a rule of the two values.  Samples where
    grad zeta x grad B^2 vanishes are outside the region where the reduction
    holds and raise TangentialDegeneracy.
    """
    p = _pts(samples)
    B = fl.clebsch(zeta, theta, name="grad zeta x grad theta")
    B2 = b2_field(B)
    Bv = B(p)
    gB2 = fl.grad(B2, p, "dual")
    gz = fl.grad(zeta, p, "dual")
    cross = _norm(np.cross(gz, gB2))
    scale = np.maximum(1.0, _norm(gz) * _norm(gB2))
    bad = cross <= DEGENERACY_RTOL * scale
    if np.any(bad):
        i = int(np.argmax(bad))
        raise TangentialDegeneracy(f"grad zeta x grad B vanishes at {p[i].tolist()}")
    lhs = np.einsum("ni,ni->n", Bv, gB2)
    d = np.asarray(drho_dB2(zeta(p), np.einsum("ni,ni->n", Bv, Bv)), float)
    rep = ResidualReport("gsqs", notes={"n_samples": len(p)})
    rep.add(entry("gsqs", lhs - 1.0 / d, p, "dual", tol))
    return rep


# chart checks ----------------------------------------------------------------------------

def _wrapped(d):
    return (d + np.pi) % TWO_PI - np.pi


def fd_laplacian_angle(f: Callable, p, h: float) -> np.ndarray:
    """Second differences of an angle-valued function with branch jumps removed."""
    f0 = np.asarray(f(p), float)
    out = np.zeros(len(p))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        out += (_wrapped(np.asarray(f(p + e), float) - f0) + _wrapped(np.asarray(f(p - e), float) - f0)) / h ** 2
    return out


def chart_harmonic_check(chart: Chart, samples, h_fd: float = 1e-4, tol: float = 1e-12,
                         lap_tol: float = 1e-5) -> ResidualReport:
    """Orthogonality, norm equality, |grad z| = 1 and FD Laplacians of a planar chart."""
    p = _pts(samples)
    if np.any(chart.singular(p)):
        raise FocalSegment("sample on a chart singularity")
    mu = ScalarField(chart.mu, "mu")
    nu = ScalarField(chart.nu, "nu")
    zf = ScalarField(lambda x, y, z: z, "z")
    gm, gn, gz = (fl.grad(s, p, "dual") for s in (mu, nu, zf))
    conf = chart.conformal
    rep = ResidualReport(f"chart[{chart.name}]", notes={"n_samples": len(p), "h_fd": h_fd})
    rep.add(entry("orthogonality", np.einsum("ni,ni->n", gm, gn), p, "dual", tol))
    rep.add(entry("norm_equality", _norm(gm) - _norm(gn), p, "dual", tol, claimed=conf))
    rep.add(entry("grad_z_unit", _norm(gz) - 1.0, p, "dual", tol))
    rep.add(entry("z_orthogonality", np.abs(gm[:, 2]) + np.abs(gn[:, 2]), p, "dual", tol))
    m, n = chart.mu(p[:, 0], p[:, 1]), chart.nu(p[:, 0], p[:, 1])
    rep.add(entry("grad_mu_norm2_formula", np.einsum("ni,ni->n", gm, gm) - chart.grad_mu_norm2(m, n),
                  p, "dual", tol))
    lap_mu = fl.laplacian(mu, p, "fd", h=h_fd)
    lap_nu = fd_laplacian_angle(nu, p, h_fd)
    rep.add(entry("laplacian_mu", lap_mu, p, "fd", lap_tol, claimed=conf))
    rep.add(entry("laplacian_nu", lap_nu, p, "fd", lap_tol))
    return rep


# isometry scan ------------------------------------------------------------------------------

NULL_RTOL = 1e-8
CALIBRATION_FACTOR = 1e6


@dataclass
class IsometryScanResult:
    s: float
    a: np.ndarray
    b: np.ndarray
    n_samples: int
    singular_values: np.ndarray
    multiplicity: int
    b2_scan: float
    b2_generator: np.ndarray = field(default_factory=lambda: np.zeros(6))

    @property
    def generator(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "s": self.s, "a": self.a.tolist(), "b": self.b.tolist(),
                "n_samples": self.n_samples, "singular_values": self.singular_values.tolist(),
                "multiplicity": self.multiplicity, "b2_scan": self.b2_scan,
                "b2_generator": self.b2_generator.tolist()}


def generator_matrix(p) -> np.ndarray:
    """Rows u(x) = a + b x x as a linear map of (a, b); shape (3N, 6)."""
    p = _pts(p)
    n = len(p)
    G = np.zeros((n, 3, 6))
    G[:, :, :3] = np.eye(3)
    for j in range(3):
        e = np.zeros(3)
        e[j] = 1.0
        G[:, :, 3 + j] = np.cross(e, p)
    return G.reshape(3 * n, 6)


def lie_matrix(B: VectorField, p, method: str = "dual", h=None) -> np.ndarray:
    """L_u B = (u . grad) B - (B . grad) u for u = a + b x x, as a (3N, 6) matrix.

    (B . grad) u = b x B, so the columns are J_B e_j for translations and
    J_B (e_j x x) - e_j x B for rotations.
    """
    p = _pts(p)
    Bv, J = fl.values_and_jacobian(B, p, method, h)
    n = len(p)
    M = np.zeros((n, 3, 6))
    for j in range(3):
        e = np.zeros(3)
        e[j] = 1.0
        M[:, :, j] = J[:, :, j]
        M[:, :, 3 + j] = np.einsum("nik,nk->ni", J, np.cross(e, p)) - np.cross(e, Bv)
    return M.reshape(3 * n, 6)


def _smallest(M):
    _, sv, vt = np.linalg.svd(M, full_matrices=False)
    return sv, vt[-1]


def isometry_scan(B: VectorField, samples, method: str = "dual", h=None) -> IsometryScanResult:
    """Smallest normalized singular value of the Lie-derivative map over Euclidean generators."""
    p = _pts(samples)
    if len(p) < 7:
        raise RankDeficientSamples(f"need at least 7 samples, got {len(p)}")
    if np.linalg.matrix_rank(generator_matrix(p)) < 6:
        raise RankDeficientSamples("samples are collinear; rotations about their line are invisible")
    M = lie_matrix(B, p, method, h)
    sv, v = _smallest(M)
    if sv[0] == 0.0:
        s = 0.0
        mult = 6
    else:
        s = float(sv[-1] / sv[0])
        mult = int(np.sum(sv / sv[0] < NULL_RTOL))
    gB2 = fl.grad(b2_field(B), p, method, h)
    W = np.einsum("ni,nij->nj", gB2, generator_matrix(p).reshape(len(p), 3, 6))
    wsv, wv = _smallest(W)
    b2s = float(wsv[-1] / wsv[0]) if wsv[0] > 0 else 0.0
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return IsometryScanResult(s, v[:3], v[3:], len(p), sv, mult, b2s, wv)


def calibrated_threshold(control: IsometryScanResult, factor: float = CALIBRATION_FACTOR) -> float:
    """Asymmetry threshold: the control's s (floored at machine epsilon) times ``factor``."""
    return max(control.s, np.finfo(float).eps) * factor


# single-valuedness ------------------------------------------------------------------------------

SEAM_OFFSET = 1e-13


def singlevalued_gap(sol: QsSolution, r_samples, z_samples, offset: float = SEAM_OFFSET,
                     tol: Optional[float] = None) -> ResidualReport:
    """|B(r, 0, z) - B(r, 2 pi^-, z)| and the same for Psi over an (r, z) grid."""
    R, Z = np.meshgrid(np.asarray(r_samples, float), np.asarray(z_samples, float), indexing="ij")
    R, Z = R.ravel(), Z.ravel()
    ang = TWO_PI - offset
    p0 = np.stack([R, np.zeros_like(R), Z], -1)
    p1 = np.stack([R * np.cos(ang), R * np.sin(ang), Z], -1)
    rep = ResidualReport(f"singlevalued[{sol.descriptor}]", notes={"offset": offset, "n_samples": len(R)})
    rep.add(entry("B_gap", _norm(sol.B(p0) - sol.B(p1)), p0, "value", tol))
    if sol.psi is not None:
        rep.add(entry("psi_gap", sol.psi(p0) - sol.psi(p1), p0, "value", tol))
    if sol.u is not None:
        rep.add(entry("u_gap", _norm(sol.u(p0) - sol.u(p1)), p0, "value", tol))
    return rep
