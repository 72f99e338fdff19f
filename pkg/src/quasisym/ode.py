"""Dormand-Prince 5(4) integrator with PI step-size control.

The characteristic systems here are small, smooth and non-stiff; what matters
is control over the local error and reproducible step sequences, so the
integrator is kept local rather than wrapped around a black box.  The scipy
RK45 solver (same tableau, integral control) serves as the test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import StepFailure

# Dormand & Prince coefficients
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0
ALPHA = 0.7 / 5
BETA = 0.4 / 5


@dataclass
class OdeResult:
    t: np.ndarray
    y: np.ndarray  # (len(t), dim)
    n_steps: int
    n_rejected: int
    n_evals: int
    status: str = "ok"  # "ok" or "stopped"
    message: str = ""


def _initial_step(fun, t0, y0, f0, direction, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = fun(t0 + direction * h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def dp45_step(fun, t, y, f0, h):
    """One Dormand-Prince step; returns (y_new, f_new, error_estimate)."""
    k = np.empty((7, y.size))
    k[0] = f0
    for i in range(1, 7):
        yi = y + h * np.dot(A[i], k[:i])
        k[i] = fun(t + C[i] * h, yi)
    y_new = y + h * np.dot(B5[:6], k[:6])
    err = h * np.dot(E, k)
    return y_new, k[6], err


def solve(fun: Callable, t_span, y0, rtol: float = 1e-8, atol: float = 1e-8,
          t_eval: Optional[np.ndarray] = None, h0: Optional[float] = None,
          max_steps: int = 200_000, stop: Optional[Callable] = None) -> OdeResult:
    """Integrate y' = fun(t, y) over t_span.

    Steps are clipped so every ``t_eval`` point is hit exactly (no dense
    output interpolation).  ``stop(exc)`` decides whether an exception raised
    by ``fun`` ends the integration early (status "stopped") instead of
    propagating.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    y = np.asarray(y0, float).copy()
    direction = 1.0 if t1 >= t0 else -1.0
    if t_eval is None:
        targets = np.array([t1])
        record_all = True
    else:
        targets = np.asarray(t_eval, float)
        record_all = False
    ts, ys = [t0], [y.copy()]
    if t1 == t0:
        return OdeResult(np.array(ts), np.array(ys), 0, 0, 0)

    nfev = 0

    def f(t, yy):
        nonlocal nfev
        nfev += 1
        return np.asarray(fun(t, yy), float)

    try:
        f0 = f(t0, y)
        h = abs(h0) if h0 else _initial_step(f, t0, y, f0, direction, rtol, atol)
    except Exception as exc:  # noqa: BLE001 - delegated to the caller's predicate
        if stop is not None and stop(exc):
            return OdeResult(np.array(ts), np.array(ys), 0, 0, nfev, "stopped", str(exc))
        raise

    t = t0
    err_prev = 1e-4
    n_steps = n_rej = 0
    idx = 0
    while idx < len(targets) and targets[idx] * direction <= t0 * direction:
        idx += 1
    while direction * (t1 - t) > 0:
        if n_steps >= max_steps:
            raise StepFailure(f"exceeded {max_steps} steps at t = {t:.6g}")
        h_min = 16 * np.spacing(max(abs(t), 1.0))
        if h < h_min:
            raise StepFailure(f"step size underflow at t = {t:.6g}")
        next_target = targets[idx] if idx < len(targets) else t1
        hit = False
        if direction * (t + direction * h - next_target) >= 0:
            h_try = abs(next_target - t)
            hit = True
        else:
            h_try = h
        try:
            y_new, f_new, err = dp45_step(f, t, y, f0, direction * h_try)
        except Exception as exc:  # noqa: BLE001
            if stop is not None and stop(exc):
                return OdeResult(np.array(ts), np.array(ys), n_steps, n_rej, nfev, "stopped", str(exc))
            raise
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        en = float(np.sqrt(np.mean((err / scale) ** 2)))
        if not np.isfinite(en):
            h = 0.2 * h_try
            n_rej += 1
            continue
        if en <= 1.0:
            t = next_target if hit else t + direction * h_try
            y, f0 = y_new, f_new
            n_steps += 1
            en_c = max(en, 1e-10)
            fac = SAFETY * en_c ** (-ALPHA) * err_prev ** BETA
            fac = min(FAC_MAX, max(FAC_MIN, fac))
            err_prev = en_c
            # a clipped step says nothing about the natural step length
            h = max(h, h_try * fac) if hit else h_try * fac
            if record_all or hit:
                ts.append(t)
                ys.append(y.copy())
                if hit:
                    idx += 1
        else:
            n_rej += 1
            fac = max(FAC_MIN, SAFETY * en ** (-1 / 5))
            h = h_try * fac
    return OdeResult(np.array(ts), np.array(ys), n_steps, n_rej, nfev)
