"""Datasets from which the five reference figures can be redrawn.

Each figure becomes a handful of CSV tables plus a JSON index recording the
parameters, the files, and the largest flux-function residual over every
emitted surface mesh.  Output depends only on the parameters, so two runs with
the same configuration are byte-identical.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import fields as fl
from .coordinates import (TWO_PI, CylindricalChart, EllipticChart, TorusSpec, quartic_mu, radius,
                          sin2_3phi_displacement, stack)
from .solutions import elliptic_translational, helical_selfqs, local_qs

SCHEMA = "quasisym.figure/1"
SEAM_OFFSET = 1e-9  # the last toroidal row sits this far below 2 pi


@dataclass(frozen=True)
class FigureParams:
    k: float = 0.18
    a: float = 2.0
    mu0: float = 1.0
    r0: float = 1.0
    level: float = 0.1
    cylinder_radius: float = 1.0
    n_theta: int = 32
    n_phi: int = 64
    grid: int = 80
    glyph_stride: int = 8
    extent: float = 4.0
    quartic_power: float = 0.5


@dataclass
class Table:
    name: str
    columns: tuple
    rows: np.ndarray  # (n, len(columns))


def fmt(v: float) -> str:
    return repr(float(v))


def write_csv(path: Path, table: Table):
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={SCHEMA} table={table.name}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([fmt(v) for v in row])


def _vec_cols(prefix):
    return tuple(f"{prefix}{c}" for c in "xyz")


def _mesh(points: np.ndarray, values: dict):
    """Rows and columns of a (n_phi, n_theta, 3) vertex mesh; i, j index the toroidal and poloidal rows."""
    nphi, nth = points.shape[:2]
    I, J = np.meshgrid(np.arange(nphi), np.arange(nth), indexing="ij")
    cols = ["i", "j", "x", "y", "z"]
    data = [I.ravel(), J.ravel(), *points.reshape(-1, 3).T]
    for name, v in values.items():
        v = np.asarray(v, float).reshape(nphi * nth, -1)
        if v.shape[1] == 3:
            cols += list(_vec_cols(name + "_"))
        else:
            cols.append(name)
        data += list(v.T)
    return np.stack(data, axis=-1), tuple(cols)


def _surface(torus: TorusSpec, p: FigureParams, seam: bool = False) -> np.ndarray:
    rho = np.sqrt(2.0 * torus.level)
    theta = np.linspace(0.0, TWO_PI, p.n_theta, endpoint=False)
    if seam:
        phi = np.linspace(0.0, TWO_PI, p.n_phi)
        phi[-1] = TWO_PI - SEAM_OFFSET
    else:
        phi = np.linspace(0.0, TWO_PI, p.n_phi, endpoint=False)
    P, T = np.meshgrid(phi, theta, indexing="ij")
    x, y = torus.mu_inverse(torus.mu0 + rho * np.cos(T), P)
    h = np.asarray(torus.h(x, y, 0.0 * x), float) + 0.0 * x
    return stack(x, y, h + rho * np.sin(T))


def _psi_residual(torus: TorusSpec, pts: np.ndarray) -> float:
    flat = pts.reshape(-1, 3)
    psi = np.asarray(torus.psi(flat[:, 0], flat[:, 1], flat[:, 2]), float)
    return float(np.max(np.abs(psi - torus.level)))


def _field_values(sol, pts):
    flat = pts.reshape(-1, 3)
    B = sol.B(flat)
    J = fl.curl(sol.B, flat)
    out = {"B": B, "curlB": J, "B2": np.einsum("ni,ni->n", B, B), "curlB2": np.einsum("ni,ni->n", J, J)}
    if sol.u is not None:
        out["u"] = sol.u(flat)
    return out


# individual figures -----------------------------------------------------------------

def figure1(p: FigureParams):
    sol = helical_selfqs()
    r = p.cylinder_radius
    phi = np.linspace(0.0, TWO_PI, p.n_phi, endpoint=False)
    z = np.linspace(-1.0, 1.0, p.n_theta)
    P, Z = np.meshgrid(phi, z, indexing="ij")
    pts = stack(r * np.cos(P), r * np.sin(P), Z)
    rows, cols = _mesh(pts, _field_values(sol, pts))
    resid = float(np.max(np.abs(np.hypot(pts[..., 0], pts[..., 1]) - r)))
    meta = {"field": "exp(-r) sin(z/r - phi) grad r x grad(z/r - phi)", "surface": f"r = {r}"}
    return [Table("cylinder", cols, rows)], {"cylinder": resid}, meta


def figure2_tori(p: FigureParams) -> dict:
    mu4 = quartic_mu(p.quartic_power)
    return {
        "a_axisymmetric": TorusSpec.axisymmetric(p.r0, p.level),
        "b_quartic": TorusSpec.general(mu4, p.mu0, level=p.level),
        "c_displaced": TorusSpec.general(radius, p.mu0, sin2_3phi_displacement, p.level),
        "d_quartic_displaced": TorusSpec.general(mu4, p.mu0, sin2_3phi_displacement, p.level),
    }


def figure2(p: FigureParams):
    tables, resid = [], {}
    for name, torus in figure2_tori(p).items():
        pts = _surface(torus, p)
        rows, cols = _mesh(pts, {})
        tables.append(Table(name, cols, rows))
        resid[name] = _psi_residual(torus, pts)
    meta = {"mu_quartic": f"(x^4 + y^4)^{p.quartic_power}", "h_displaced": "r sin^2(3 phi)"}
    return tables, resid, meta


def figure3(p: FigureParams):
    ell = EllipticChart(p.a)
    cyl = CylindricalChart()
    g = np.linspace(-p.extent, p.extent, p.grid)
    X, Y = np.meshgrid(g, g, indexing="ij")
    pts = stack(X, Y, 0.0 * X).reshape(-1, 3)
    coords = {"phi": cyl.nu, "log_r": cyl.mu, "nu": ell.nu, "mu": ell.mu}
    tables = []
    cols = ("x", "y") + tuple(coords)
    vals = [np.asarray(f(pts[:, 0], pts[:, 1]), float) for f in coords.values()]
    tables.append(Table("contours", cols, np.stack([pts[:, 0], pts[:, 1], *vals], -1)))
    sub = (X[:: p.glyph_stride, :: p.glyph_stride], Y[:: p.glyph_stride, :: p.glyph_stride])
    gp = stack(sub[0], sub[1], 0.0 * sub[0]).reshape(-1, 3)
    gcols, gdata = ["x", "y"], [gp[:, 0], gp[:, 1]]
    for name, f in coords.items():
        gr = fl.grad(fl.ScalarField(f, name), gp)
        gcols += [f"d{name}_dx", f"d{name}_dy"]
        gdata += [gr[:, 0], gr[:, 1]]
    tables.append(Table("glyphs", tuple(gcols), np.stack(gdata, -1)))
    meta = {"a": p.a, "grid": p.grid, "extent": p.extent}
    return tables, {}, meta


def figure4(p: FigureParams):
    sol = elliptic_translational(chart=EllipticChart(p.a), mu0=p.mu0, level=p.level)
    pts = _surface(sol.torus, p)
    vals = _field_values(sol, pts)
    ref = sol.formulas["curl_B"](pts.reshape(-1, 3))
    rows, cols = _mesh(pts, vals)
    meta = {"field": "-exp(-mu) grad nu", "current_formula_max_error":
            float(np.max(np.abs(vals["curlB"] - ref)))}
    return [Table("surface", cols, rows)], {"surface": _psi_residual(sol.torus, pts)}, meta


def figure5(p: FigureParams):
    sol = local_qs(k=p.k, r0=p.r0, level=p.level)
    pts = _surface(sol.torus, p, seam=True)
    flat = pts.reshape(-1, 3)
    vals = _field_values(sol, pts)
    vals["psi"] = sol.psi(flat)
    rows, cols = _mesh(pts, vals)
    # the same (r, z) vertices evaluated on both sides of phi = 0
    first = flat[: p.n_theta]
    seam_pts = stack(first[:, 0] * np.cos(-SEAM_OFFSET), first[:, 0] * np.sin(-SEAM_OFFSET), first[:, 2])
    jumpB = np.linalg.norm(sol.B(first) - sol.B(seam_pts), axis=-1)
    jump_psi = np.abs(sol.psi(first) - sol.psi(seam_pts))
    seam_rows = np.stack([np.arange(p.n_theta), *first.T, jumpB, jump_psi], -1)
    tables = [Table("surface", cols, rows),
              Table("seam_jump", ("j", "x", "y", "z", "B_jump", "psi_jump"), seam_rows)]
    meta = {"k": p.k, "seam_offset": SEAM_OFFSET, "max_B_jump": float(np.max(jumpB)),
            "max_psi_jump": float(np.max(jump_psi))}
    return tables, {"surface": _psi_residual(sol.torus, pts)}, meta


FIGURES = {1: figure1, 2: figure2, 3: figure3, 4: figure4, 5: figure5}
MESH_TOL = 1e-8


def write_figure(n: int, out_dir, params: Optional[FigureParams] = None, seed: int = 0) -> dict:
    """Write figure ``n``'s tables and JSON index into ``out_dir``; returns the index."""
    if n not in FIGURES:
        raise ValueError(f"figure must be one of {sorted(FIGURES)}, got {n}")
    params = params or FigureParams()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables, resid, meta = FIGURES[n](params)
    files = []
    for t in tables:
        name = f"figure{n}_{t.name}.csv"
        write_csv(out / name, t)
        files.append({"file": name, "columns": list(t.columns), "rows": int(len(t.rows))})
    index = {
        "schema": SCHEMA,
        "schema_version": 1,
        "figure": n,
        "params": asdict(params),
        "seed": int(seed),
        "files": files,
        "psi_residual": resid,
        "passed": all(v < MESH_TOL for v in resid.values()),
        "meta": meta,
    }
    with open(out / f"figure{n}.json", "w") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return index
