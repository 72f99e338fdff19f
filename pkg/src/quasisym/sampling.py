"""Deterministic interior sampling of solution domains.

Points come from a scrambled Sobol sequence mapped into torus-local
coordinates (poloidal radius, poloidal angle, toroidal parameter) and are
rejection-filtered against cut surfaces, chart singularities and the boundary.
The same seed always yields the same points.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import qmc

from .coordinates import stack

CUT_GUARD = 0.05  # minimum distance to a branch cut
BOUNDARY_MARGIN = 1e-3


def _sobol(n: int, d: int, seed: int) -> np.ndarray:
    m = max(1, int(np.ceil(np.log2(max(n, 2)))))
    return qmc.Sobol(d, scramble=True, seed=np.random.default_rng(seed)).random_base2(m)


def _torus_points(sol, u: np.ndarray) -> np.ndarray:
    torus, dom = sol.torus, sol.domain
    rho_max = torus.minor_radius * dom.rho_fraction
    rho = rho_max * np.sqrt(u[:, 0])
    theta = 2.0 * np.pi * u[:, 1]
    lo, hi = dom.angle
    ang = lo + (hi - lo) * u[:, 2]
    x, y = torus.mu_inverse(torus.mu0 + rho * np.cos(theta), ang)
    h = np.asarray(torus.h(x, y, 0.0 * x), float) + 0.0 * x
    return stack(x, y, h + rho * np.sin(theta))


def _annulus_points(sol, u: np.ndarray) -> np.ndarray:
    dom = sol.domain
    r = dom.r_range[0] + (dom.r_range[1] - dom.r_range[0]) * u[:, 0]
    lo, hi = dom.angle
    ph = lo + (hi - lo) * u[:, 1]
    z = dom.z_range[0] + (dom.z_range[1] - dom.z_range[0]) * u[:, 2]
    return stack(r * np.cos(ph), r * np.sin(ph), z)


def accept(sol, p: np.ndarray, guard: float = CUT_GUARD) -> np.ndarray:
    ok = np.all(np.isfinite(p), axis=-1)
    if sol.cut is not None:
        ok &= sol.cut(p) > guard
    chart = getattr(sol.torus, "chart", None) if sol.torus is not None else None
    if chart is not None:
        ok &= ~chart.singular(p)
    if sol.domain.kind == "torus" and sol.torus is not None:
        psi = np.asarray(sol.psi(p), float)
        ok &= psi < sol.torus.level * (1.0 - BOUNDARY_MARGIN)
    return ok


def sample_interior(sol, n: int = 1000, seed: int = 0, guard: float = CUT_GUARD) -> np.ndarray:
    """``n`` interior points of the bundle's domain, shape (n, 3)."""
    if n <= 0:
        return np.zeros((0, 3))
    mapper = _annulus_points if sol.domain.kind == "annulus" else _torus_points
    want = 2 * n
    for attempt in range(6):
        u = _sobol(want, 3, seed + attempt * 7919)
        p = mapper(sol, u)
        p = p[accept(sol, p, guard)]
        if len(p) >= n:
            return p[:n]
        want *= 4
    raise RuntimeError(f"could only place {len(p)} of {n} samples inside the domain")
