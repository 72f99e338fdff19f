"""Characteristic integration of the eikonal-type surface equation.

On the elliptic flux surface (mu - mu0, z) = r_fs (cos theta, sin theta) the
self-quasisymmetry condition |grad Psi_el x grad Phi'|^2 = 1 becomes

    F(p, q, nu, theta) = f p^2 + q^2 - g = 0,    p = dPhi'/dnu, q = dPhi'/dtheta,

with f = r_fs^2 (sin^2 theta + cos^2 theta / (a^2 delta)), g = a^2 delta and
delta = sin^2 nu + sinh^2(mu0 + r_fs cos theta).  Local solutions are carried
by the Lagrange-Charpit characteristics launched from the strip
nu = xi, theta = c_theta, Phi' = c_phi, p = 0, q = sqrt(g).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import dual as dn
from .errors import ConfigError, DegenerateDelta, DegenerateStrip, PatchFold
from .ode import solve

DELTA_EPS = 1e-14
F0_RTOL = 1e-13
CSV_COLUMNS = ("xi", "tau", "nu", "theta", "phi_prime", "p", "q", "F")


@dataclass(frozen=True)
class SurfaceProblem:
    """Flux surface of the elliptic torus, r_fs^2 = 2 Psi_el."""

    a: float = 2.0
    mu0: float = 1.0
    r_fs: float = 0.2

    def __post_init__(self):
        for name in ("a", "mu0", "r_fs"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not self.mu0 - self.r_fs > 0:
            raise ConfigError(f"surface reaches mu = 0: need mu0 > r_fs, got mu0={self.mu0}, r_fs={self.r_fs}")


class Coeffs(NamedTuple):
    f: float
    g: float
    f_nu: float
    f_theta: float
    g_nu: float
    g_theta: float
    delta: float


class CharpitState(NamedTuple):
    nu: float
    theta: float
    phi_prime: float
    p: float
    q: float
    tau: float = 0.0

    def vector(self) -> np.ndarray:
        return np.array(self[:5], float)


def delta_rule(prob: SurfaceProblem, nu, theta):
    s = dn.sin(nu)
    sh = dn.sinh(prob.mu0 + prob.r_fs * dn.cos(theta))
    return s * s + sh * sh


def f_rule(prob: SurfaceProblem, nu, theta):
    st, ct = dn.sin(theta), dn.cos(theta)
    d = delta_rule(prob, nu, theta)
    return prob.r_fs ** 2 * (st * st + ct * ct / (prob.a ** 2 * d))


def g_rule(prob: SurfaceProblem, nu, theta):
    return prob.a ** 2 * delta_rule(prob, nu, theta)


def coeffs(prob: SurfaceProblem, nu, theta) -> Coeffs:
    """f, g and their exact partials in (nu, theta)."""
    t, (N, T) = dn.seed([nu, theta])
    d = delta_rule(prob, N, T)
    if np.any(np.asarray(dn.primal(d)) <= DELTA_EPS):
        raise DegenerateDelta(f"delta <= {DELTA_EPS:g} at nu={nu!r}, theta={theta!r}")
    f = f_rule(prob, N, T)
    g = g_rule(prob, N, T)
    fn, ft = dn.partials_at(f, t, 2)
    gn, gt = dn.partials_at(g, t, 2)
    return Coeffs(dn.value_at(f, t), dn.value_at(g, t), fn, ft, gn, gt, dn.value_at(d, t))


def residual_F(prob: SurfaceProblem, nu, theta, p, q):
    c = coeffs(prob, nu, theta)
    return c.f * p * p + q * q - c.g


@dataclass(frozen=True)
class StripConditions:
    """Values of the Cauchy-data conditions at the launch point."""

    nondegeneracy: float  # (dF/dp)^2 + (dF/dq)^2 = 4 f^2 p^2 + 4 q^2
    strip_speed: float  # (dnu0/dxi)^2 + (dtheta0/dxi)^2
    F0: float
    compatibility: float  # dPhi0/dxi - p0 dnu0/dxi - q0 dtheta0/dxi
    transversality: float  # dF/dp dtheta0/dxi - dF/dq dnu0/dxi = -2 q0

    @property
    def ok(self) -> bool:
        # F0 is zero up to the rounding of q0 = sqrt(g0); nondegeneracy = 4 g0 here
        return (self.nondegeneracy > 0 and self.strip_speed > 0
                and abs(self.F0) <= F0_RTOL * max(1.0, self.nondegeneracy)
                and self.compatibility == 0.0 and self.transversality != 0)


def init_strip(prob: SurfaceProblem, xi: float, c_theta: float = 0.0, c_phi: float = 0.0,
               branch: int = 1) -> tuple[CharpitState, StripConditions]:
    """Consistent Cauchy data on the strip nu = xi; ``branch=-1`` takes q0 = -sqrt(g0)."""
    c = coeffs(prob, xi, c_theta)
    q0 = (1.0 if branch >= 0 else -1.0) * np.sqrt(c.g)
    if q0 == 0.0:
        raise DegenerateStrip("q0 = 0 violates transversality (-2 q0 != 0)")
    p0 = 0.0
    # strip derivatives: nu0' = 1, theta0' = 0, Phi0' = 0
    cond = StripConditions(
        nondegeneracy=4 * c.f ** 2 * p0 ** 2 + 4 * q0 ** 2,
        strip_speed=1.0,
        F0=float(c.f * p0 * p0 + q0 * q0 - c.g),
        compatibility=0.0 - p0 * 1.0 - q0 * 0.0,
        transversality=2 * c.f * p0 * 0.0 - 2 * q0 * 1.0,
    )
    return CharpitState(float(xi), float(c_theta), float(c_phi), p0, float(q0)), cond


def rhs(prob: SurfaceProblem, state) -> np.ndarray:
    """d/dtau of (nu, theta, Phi', p, q)."""
    nu, theta, _, p, q = state[:5]
    c = coeffs(prob, nu, theta)
    return np.array([
        2 * c.f * p,
        2 * q,
        2 * c.f * p * p + 2 * q * q,
        -(p * p * c.f_nu - c.g_nu),
        -(p * p * c.f_theta - c.g_theta),
    ])


def dF_dtau(prob: SurfaceProblem, state) -> float:
    """Chain-rule rate of change of F along the characteristic flow."""
    nu, theta, _, p, q = state[:5]
    c = coeffs(prob, nu, theta)
    d = rhs(prob, state)
    F_nu = c.f_nu * p * p - c.g_nu
    F_theta = c.f_theta * p * p - c.g_theta
    return float(F_nu * d[0] + F_theta * d[1] + 2 * c.f * p * d[3] + 2 * q * d[4])


@dataclass
class CharpitTrajectory:
    tau: np.ndarray
    states: np.ndarray  # (n, 5)
    xi: float
    F: np.ndarray
    n_steps: int
    status: str = "ok"
    message: str = ""
    conditions: Optional[StripConditions] = None
    first_violation: Optional[float] = None  # tau where 4f^2p^2 + 4q^2 first hit 0

    @property
    def max_F(self) -> float:
        return float(np.max(np.abs(self.F)))

    def state(self, i: int) -> CharpitState:
        return CharpitState(*self.states[i], tau=float(self.tau[i]))


def integrate(prob: SurfaceProblem, state: CharpitState, tau_end: float, tol: float = 1e-10,
              tau_eval: Optional[np.ndarray] = None, xi: Optional[float] = None,
              conditions: Optional[StripConditions] = None) -> CharpitTrajectory:
    """Adaptive Dormand-Prince integration of the characteristic system.

    A degenerate delta along the way ends the trajectory early with
    ``status == "stopped"``; step-size underflow raises StepFailure.
    """
    y0 = state.vector()
    res = solve(lambda t, y: rhs(prob, y), (state.tau, tau_end), y0, rtol=tol, atol=tol,
                t_eval=tau_eval, stop=lambda e: isinstance(e, DegenerateDelta))
    F = np.array([residual_F(prob, *y[[0, 1]], y[3], y[4]) for y in res.y])
    cs = [coeffs(prob, y[0], y[1]) for y in res.y]
    nondeg = np.array([4 * c.f ** 2 * y[3] ** 2 + 4 * y[4] ** 2 for c, y in zip(cs, res.y)])
    bad = np.nonzero(nondeg <= 0.0)[0]
    return CharpitTrajectory(
        tau=res.t, states=res.y, xi=float(state.nu if xi is None else xi), F=F,
        n_steps=res.n_steps, status=res.status, message=res.message, conditions=conditions,
        first_violation=float(res.t[bad[0]]) if bad.size else None,
    )


@dataclass
class CharpitPatch:
    xi: np.ndarray
    tau: np.ndarray
    states: np.ndarray  # (n_xi, n_tau, 5)
    F: np.ndarray  # (n_xi, n_tau)
    g: np.ndarray
    carried_residual: np.ndarray  # |F| / g = | |grad Psi x grad Phi'|^2 - 1 |
    fd_residual: np.ndarray  # same quantity from cross-characteristic differences, interior nodes
    jacobian_det: np.ndarray
    trajectories: list = field(default_factory=list)
    sqrt_E: float = 1.0

    @property
    def max_F(self) -> float:
        return float(np.max(np.abs(self.F)))

    @property
    def phi(self) -> np.ndarray:
        """Phi = sqrt(E) Phi'."""
        return self.sqrt_E * self.states[..., 2]

    def report(self) -> dict:
        def stats(v):  # None when the grid is too small to difference
            v = np.asarray(v)
            if v.size == 0:
                return {"max": None, "mean": None, "n_samples": 0}
            return {"max": float(np.max(v)), "mean": float(np.mean(v)), "n_samples": int(v.size)}

        return {
            "max_F": self.max_F,
            "carried_residual": stats(self.carried_residual),
            "fd_residual": stats(self.fd_residual),
            "n_strips": int(self.xi.size),
            "n_tau": int(self.tau.size),
        }

    def rows(self):
        for i, x in enumerate(self.xi):
            for j, t in enumerate(self.tau):
                s = self.states[i, j]
                yield (x, t, s[0], s[1], s[2], s[3], s[4], self.F[i, j])

    def to_csv(self, fh=None, header_comment: Optional[str] = None) -> str:
        buf = fh if fh is not None else io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows():
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue() if fh is None else ""


DEFAULT_XI = (0.8, 1.3)
DEFAULT_STRIPS = 32
DEFAULT_TAU = (0.0, 0.5)
DEFAULT_NTAU = 51


def fd_eikonal_residual(xi, tau, states, prob: SurfaceProblem, trim: int = 1) -> np.ndarray:
    """||grad Psi x grad Phi'|^2 - 1| rebuilt from second-order differences across the patch.

    (p, q) are recovered from Phi'(xi, tau) through the inverse of the
    (xi, tau) -> (nu, theta) Jacobian; ``trim`` boundary layers are dropped.
    """
    nu, th, ph = states[..., 0], states[..., 1], states[..., 2]
    d_nu = np.gradient(nu, xi, tau)
    d_th = np.gradient(th, xi, tau)
    d_ph = np.gradient(ph, xi, tau)
    det = d_nu[0] * d_th[1] - d_nu[1] * d_th[0]
    # [Phi_xi, Phi_tau] = [[nu_xi, th_xi], [nu_tau, th_tau]] [p, q]
    p = (d_ph[0] * d_th[1] - d_ph[1] * d_th[0]) / det
    q = (d_nu[0] * d_ph[1] - d_nu[1] * d_ph[0]) / det
    sl = (slice(trim, -trim or None), slice(trim, -trim or None))
    c = coeffs(prob, nu[sl], th[sl])
    return np.abs((c.f * p[sl] ** 2 + q[sl] ** 2 - c.g) / c.g)


def local_solution(prob: SurfaceProblem, xi_grid=None, tau_grid=None, c_theta: float = 0.0,
                   c_phi: float = 0.0, tol: float = 1e-10, branch: int = 1,
                   sqrt_E: float = 1.0) -> CharpitPatch:
    """Integrate a family of characteristics into a structured Phi' patch."""
    xi = np.linspace(*DEFAULT_XI, DEFAULT_STRIPS) if xi_grid is None else np.asarray(xi_grid, float)
    tau = np.linspace(*DEFAULT_TAU, DEFAULT_NTAU) if tau_grid is None else np.asarray(tau_grid, float)
    if tau[0] != 0.0 or np.any(np.diff(tau) <= 0):
        raise ValueError("tau grid must start at 0 and increase strictly")
    trajs = []
    for x in xi:
        s0, cond = init_strip(prob, x, c_theta, c_phi, branch)
        tr = integrate(prob, s0, tau[-1], tol, tau_eval=tau[1:], xi=x, conditions=cond)
        if tr.status != "ok" or tr.tau.size != tau.size:
            raise DegenerateDelta(f"strip xi={x:.6g} stopped at tau={tr.tau[-1]:.6g}: {tr.message}")
        trajs.append(tr)
    states = np.stack([t.states for t in trajs])
    F = np.stack([t.F for t in trajs])
    g = np.asarray(coeffs(prob, states[..., 0], states[..., 1]).g, float)
    if xi.size >= 2 and tau.size >= 2:
        d_nu = np.gradient(states[..., 0], xi, tau)
        d_th = np.gradient(states[..., 1], xi, tau)
        det = d_nu[0] * d_th[1] - d_nu[1] * d_th[0]
        ref = np.sign(det[0, 0])
        flipped = np.argwhere(np.sign(det) != ref)
        if flipped.size:
            i, j = flipped[0]
            raise PatchFold(f"characteristics cross near xi={xi[i]:.6g}, tau={tau[j]:.6g}",
                            location=(float(xi[i]), float(tau[j])))
        fd = fd_eikonal_residual(xi, tau, states, prob) if xi.size >= 3 and tau.size >= 3 else np.zeros(0)
    else:
        det = np.full(F.shape, np.nan)
        fd = np.zeros(0)
    return CharpitPatch(xi, tau, states, F, g, np.abs(F) / g, fd, det, trajs, sqrt_E)
