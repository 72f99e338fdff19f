"""Command-line front end.

    quasisym verify  [--config PATH] [--out DIR] [--method dual|fd] [--tol REAL] [--seed U64]
    quasisym charpit [--config PATH] [--out DIR]
    quasisym figures [--config PATH] [--out DIR] [--figure N]
    quasisym scan    [--config PATH] [--out DIR] [--seed U64]

Exit status: 0 when every check passes, 1 on a verification failure, 2 on a
usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import charpit as cp
from . import dual as dn
from . import solutions as S
from . import verify as V
from .coordinates import EllipticChart
from .errors import ConfigError, DegenerateDelta, DegenerateStrip, PatchFold, QuasisymError
from .fields import PressureClosure, constant_vector, gradient_field
from .figures import FIGURES, FigureParams, write_figure
from .sampling import sample_interior

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
U64_MAX = 2 ** 64 - 1

SOLUTIONS = ("flux_aligned_qs", "local_qs", "axisym_torus_field", "elliptic_translational",
             "helical_selfqs", "chart_qs_elliptic", "uniform")
PROFILES = {
    "one": lambda s: 1.0 + 0.0 * s,
    "one_plus_psi": lambda s: 1.0 + s,
    "sin": dn.sin,
    "minus_exp": lambda s: -dn.exp(-s),
}
SYMMETRIC = {"axisym_torus_field", "elliptic_translational", "flux_aligned_qs", "chart_qs_elliptic", "uniform"}  # B independent of z, or axisymmetric


@dataclass(frozen=True)
class RunConfig:
    """Every run parameter; defaults reproduce the reference figure parameters."""

    solution: str = "flux_aligned_qs"
    k: float = 0.18
    a: float = 2.0
    mu0: float = 1.0
    r0: float = 1.0
    r_fs: float = 0.2
    level: float = 0.1
    profile: Optional[str] = None  # f, E or lambda depending on the family
    n_samples: int = 1000
    method: str = "dual"
    tol: Optional[float] = None
    seed: int = 0
    p0: float = 4.0
    sigma: float = 1.0
    force_balance_tol: float = 1e-5
    inject_fault: bool = False
    # charpit
    n_strips: int = 32
    xi_min: float = 0.8
    xi_max: float = 1.3
    tau_end: float = 0.5
    n_tau: int = 51
    c_theta: float = 0.0
    c_phi: float = 0.0
    charpit_tol: float = 1e-10
    # figures
    n_theta: int = 32
    n_phi: int = 64
    quartic_power: float = 0.5
    # scan
    scan_samples: int = 64
    out: str = "quasisym-out"

    def validate(self) -> "RunConfig":
        if self.solution not in SOLUTIONS:
            raise ConfigError(f"solution must be one of {SOLUTIONS}, got {self.solution!r}")
        if self.method not in ("dual", "fd"):
            raise ConfigError(f"method must be 'dual' or 'fd', got {self.method!r}")
        if self.profile is not None and self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {sorted(PROFILES)}, got {self.profile!r}")
        for name in ("a", "mu0", "r0", "r_fs", "level"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not self.r_fs < self.mu0:
            raise ConfigError(f"r_fs = {self.r_fs} must be smaller than mu0 = {self.mu0} (surface hits mu = 0)")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not 0 <= self.seed <= U64_MAX:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for name in ("n_samples", "n_strips", "n_tau", "n_theta", "n_phi", "scan_samples"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.tau_end < 0:
            raise ConfigError("tau_end must be non-negative")
        return self


def _coerce(name: str, kind, value):
    kinds = {"float": float, "int": int, "str": str, "bool": bool}
    opt = "Optional" in str(kind)
    base = str(kind).replace("Optional[", "").rstrip("]")
    if value is None:
        if opt:
            return None
        raise ConfigError(f"{name} may not be null")
    want = kinds[base]
    if want is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be a boolean")
        return value
    if want is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer")
        return value
    if want is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{name} must be a string")
    return value


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    known = {f.name: f for f in fields(RunConfig)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"{source}: unknown keys {unknown}")
    values = {k: _coerce(k, known[k].type, v) for k, v in raw.items()}
    return RunConfig(**values).validate()


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path)


# solution assembly ---------------------------------------------------------------------

def _profile(cfg: RunConfig, default: str):
    return PROFILES[cfg.profile or default]


def build_solution(cfg: RunConfig) -> S.QsSolution:
    name = cfg.solution
    if name == "flux_aligned_qs":
        sol = S.flux_aligned_qs(cfg.k, _profile(cfg, "one"), cfg.r0, cfg.level)
    elif name == "local_qs":
        sol = S.local_qs(cfg.k, f=_profile(cfg, "sin"), r0=cfg.r0, level=cfg.level)
    elif name == "axisym_torus_field":
        sol = S.axisym_torus_field(_profile(cfg, "one"), cfg.r0, cfg.level)
    elif name == "elliptic_translational":
        sol = S.elliptic_translational(_profile(cfg, "minus_exp"), EllipticChart(cfg.a), cfg.mu0, cfg.level)
    elif name == "helical_selfqs":
        sol = S.helical_selfqs()
    elif name == "chart_qs_elliptic":
        _, sol = S.chart_qs_displacement(EllipticChart(cfg.a), cfg.k, cfg.mu0, cfg.level,
                                         f=_profile(cfg, "one"))
    else:  # uniform
        sol = S.QsSolution(B=constant_vector((0.0, 0.0, 1.0), "z-hat"), descriptor="uniform",
                           claims=frozenset({S.DIV_B}), domain=S.Domain(kind="annulus"))
    if cfg.inject_fault:
        if sol.u is None or sol.psi is None:
            raise ConfigError(f"inject_fault needs a bundle with u and Psi; {name} has none")
        sol = sol.with_u(sol.u + gradient_field(sol.psi).scaled(1e-3), sol.descriptor + "+fault")
    return sol


def expects_symmetry(cfg: RunConfig) -> bool:
    return cfg.solution in SYMMETRIC or (cfg.solution == "local_qs" and cfg.k == 0)


# commands -----------------------------------------------------------------------------

def _write(out: Path, name: str, text: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text if text.endswith("\n") else text + "\n")


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    sol = build_solution(cfg)
    n = min(cfg.n_samples, 200) if cfg.solution == "chart_qs_elliptic" else cfg.n_samples
    pts = sample_interior(sol, n, seed=cfg.seed)
    if sol.u is not None:
        rep = V.qs_residuals(sol, pts, cfg.method, cfg.tol)
    else:
        rep = V.selfqs_residual(sol, pts, cfg.method, cfg.tol)
    fb = V.force_balance_residual(sol.B, PressureClosure(cfg.p0, cfg.sigma), pts, "fd",
                                  tol=cfg.force_balance_tol, cut=sol.cut)
    rep = rep.merge(fb)
    rep.notes.update({"solution": cfg.solution, "seed": cfg.seed})
    _write(out, "verify_report.json", rep.to_json())
    _write(out, "verify_report.txt", rep.table())
    print(rep.table())
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_charpit(cfg: RunConfig, out: Path) -> int:
    prob = cp.SurfaceProblem(cfg.a, cfg.mu0, cfg.r_fs)
    xi = np.linspace(cfg.xi_min, cfg.xi_max, cfg.n_strips) if cfg.n_strips > 1 else np.array([cfg.xi_min])
    tau = np.linspace(0.0, cfg.tau_end, cfg.n_tau) if cfg.tau_end > 0 and cfg.n_tau > 1 else np.array([0.0])
    patch = cp.local_solution(prob, xi, tau, cfg.c_theta, cfg.c_phi, cfg.charpit_tol)
    _write(out, "charpit_patch.csv", patch.to_csv(header_comment="schema=quasisym.charpit/1"))
    report = {"schema_version": V.SCHEMA_VERSION, "problem": asdict(prob), "tol": cfg.charpit_tol,
              **patch.report()}
    report["passed"] = bool(patch.max_F <= 10 * cfg.charpit_tol)
    _write(out, "charpit_report.json", json.dumps(report, indent=2, sort_keys=True))
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_figures(cfg: RunConfig, out: Path, which: Optional[int]) -> int:
    params = FigureParams(k=cfg.k, a=cfg.a, mu0=cfg.mu0, r0=cfg.r0, level=cfg.level,
                          n_theta=cfg.n_theta, n_phi=cfg.n_phi, quartic_power=cfg.quartic_power)
    ok = True
    for n in ([which] if which else sorted(FIGURES)):
        idx = write_figure(n, out, params, cfg.seed)
        ok &= idx["passed"]
        print(f"figure {n}: {len(idx['files'])} files, max psi residual "
              f"{max(idx['psi_residual'].values(), default=0.0):.3e}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_scan(cfg: RunConfig, out: Path) -> int:
    sol = build_solution(cfg)
    pts = sample_interior(sol, cfg.scan_samples, seed=cfg.seed)
    res = V.isometry_scan(sol.B, pts)
    control_sol = S.axisym_torus_field(r0=cfg.r0, level=cfg.level)
    control = V.isometry_scan(control_sol.B, sample_interior(control_sol, cfg.scan_samples, seed=cfg.seed))
    threshold = V.calibrated_threshold(control)
    symmetric = expects_symmetry(cfg)
    passed = res.s < V.TOL_DUAL if symmetric else res.s > threshold
    doc = {"schema_version": V.SCHEMA_VERSION, "solution": cfg.solution, "seed": cfg.seed,
           "result": res.to_dict(), "control_s": control.s, "threshold": threshold,
           "expect_symmetric": symmetric, "passed": bool(passed)}
    _write(out, "scan.json", json.dumps(doc, indent=2, sort_keys=True))
    print(f"{cfg.solution}: s = {res.s:.3e}, multiplicity {res.multiplicity}, "
          f"control s = {control.s:.3e}, threshold {threshold:.3e} -> {'pass' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_FAIL


# entry point --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quasisym", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=("verify", "charpit", "figures", "scan"))
    ap.add_argument("--config", metavar="PATH", help="JSON run configuration")
    ap.add_argument("--out", metavar="DIR", help="output directory")
    ap.add_argument("--method", choices=("dual", "fd"), help="derivative path for residuals")
    ap.add_argument("--tol", type=float, metavar="REAL", help="residual tolerance")
    ap.add_argument("--figure", type=int, choices=sorted(FIGURES), metavar="N", help="single figure 1-5")
    ap.add_argument("--seed", type=int, metavar="U64", help="scramble seed for the sample sequence")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        overrides = {k: v for k, v in (("method", args.method), ("tol", args.tol), ("seed", args.seed))
                     if v is not None}
        cfg = replace(cfg, **overrides).validate()
    except ConfigError as exc:
        print(f"quasisym: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out or cfg.out)
    try:
        if args.command == "verify":
            return cmd_verify(cfg, out)
        if args.command == "charpit":
            return cmd_charpit(cfg, out)
        if args.command == "figures":
            return cmd_figures(cfg, out, args.figure)
        return cmd_scan(cfg, out)
    except ConfigError as exc:
        print(f"quasisym: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateStrip, PatchFold, DegenerateDelta) as exc:
        loc = getattr(exc, "location", None)
        print(f"quasisym: {type(exc).__name__}: {exc}" + (f" at {loc}" if loc else ""), file=sys.stderr)
        return EXIT_FAIL
    except QuasisymError as exc:
        print(f"quasisym: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
