"""Least-squares fits for resonance lines and power laws."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

MAX_ITER = 200


@dataclass(frozen=True)
class FitResult:
    model: str  # "lorentzian" | "powerlaw"
    params: dict
    stderr: dict
    residual_norm: float
    converged: bool
    degenerate: bool = False
    n_points: int = 0
    iterations: int = 0
    notes: tuple = field(default=())

    @property
    def reliable(self):
        return self.converged and not self.degenerate

    def __getitem__(self, key):
        return self.params[key]


def lorentzian(x, center, fwhm, amplitude, offset):
    """offset + amplitude (G/2)^2 / ((x - x0)^2 + (G/2)^2)."""
    x = np.asarray(x, dtype=float)
    h2 = (0.5 * fwhm) ** 2
    return offset + amplitude * h2 / ((x - center) ** 2 + h2)


def _lorentz_jac(x, p):
    x0, g, a, _ = p
    h2 = 0.25 * g * g
    den = (x - x0) ** 2 + h2
    shape = h2 / den
    d_x0 = a * h2 * 2.0 * (x - x0) / den**2
    d_g = a * 0.5 * g * (x - x0) ** 2 / den**2
    return np.column_stack([d_x0, d_g, shape, np.ones_like(x)])


def _levenberg_marquardt(x, y, w, p, max_iter):
    """Damped Gauss-Newton on sum w (y - f)^2. Returns (p, cost, converged, iters, JtWJ)."""
    lam = 1e-3
    r = y - lorentzian(x, *p)
    cost = float(np.sum(w * r * r))
    for it in range(1, max_iter + 1):
        J = _lorentz_jac(x, p)
        A = J.T @ (J * w[:, None])
        g = J.T @ (w * r)
        improved = False
        while lam < 1e16:
            step = np.linalg.solve(A + lam * np.diag(np.diag(A) + 1e-300), g) if np.all(np.isfinite(A)) else None
            if step is None or not np.all(np.isfinite(step)):
                lam *= 10.0
                continue
            trial = p + step
            trial[1] = abs(trial[1])
            rt = y - lorentzian(x, *trial)
            ct = float(np.sum(w * rt * rt))
            if ct <= cost:
                small = np.all(np.abs(step) <= 1e-10 * (np.abs(p) + 1e-12))
                flat = cost - ct <= 1e-15 * max(cost, 1e-300)
                p, r, cost = trial, rt, ct
                lam = max(lam / 10.0, 1e-12)
                improved = True
                if small or flat:
                    J = _lorentz_jac(x, p)
                    return p, cost, True, it, J.T @ (J * w[:, None])
                break
            lam *= 10.0
        if not improved:
            J = _lorentz_jac(x, p)
            return p, cost, True, it, J.T @ (J * w[:, None])
    J = _lorentz_jac(x, p)
    return p, cost, False, max_iter, J.T @ (J * w[:, None])


def lorentzian_fit(x, y, sigma=None, window=None, max_iter=MAX_ITER, starts=7):
    """Single-peak Lorentzian fit with multi-start over grid-scanned centres.

    ``window`` is (lo, hi) on x. With ``sigma`` the fit is weighted and the
    parameter errors are absolute; otherwise they are scaled by the reduced
    chi-square.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = None if sigma is None else np.asarray(sigma, dtype=float)
    if window is not None:
        keep = (x >= window[0]) & (x <= window[1])
        x, y = x[keep], y[keep]
        s = None if s is None else s[keep]
    if x.size < 6:
        raise DomainError(f"Lorentzian fit needs at least 6 points, got {x.size}")
    if s is None:
        w = np.ones_like(y)
    else:
        floor = max(float(np.max(s)) * 1e-3, 1e-12)
        w = 1.0 / np.maximum(s, floor) ** 2
    span = float(x.max() - x.min())
    names = ("center", "fwhm", "amplitude", "offset")
    if np.ptp(y) <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        params = dict(zip(names, (float(x.mean()), span, 0.0, float(y.mean()))))
        return FitResult("lorentzian", params, {k: 0.0 for k in names}, 0.0, False, True, x.size, 0,
                         ("flat data",))
    order = np.argsort(y)[::-1]
    centres = list(dict.fromkeys([float(x[k]) for k in order[:3]] + list(np.linspace(x.min(), x.max(), starts))))
    base = float(np.percentile(y, 10))
    best = None
    for c0 in centres:
        for g0 in (span / 10.0, span / 3.0):
            p0 = np.array([c0, g0, float(np.interp(c0, x, y)) - base, base])
            # runaway starts overflow harmlessly; non-finite steps are rejected
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                p, cost, conv, it, A = _levenberg_marquardt(x, y, w, p0, max_iter)
            if best is None or cost < best[1] - 1e-15 * abs(cost) or (conv and not best[2] and cost <= best[1]):
                best = (p, cost, conv, it, A)
    p, cost, conv, it, A = best
    dof = max(x.size - 4, 1)
    try:
        cov = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        cov = np.full((4, 4), np.inf)
    if s is None:
        cov = cov * cost / dof
    err = np.sqrt(np.clip(np.diag(cov), 0.0, np.inf))
    notes = []
    # 3 sigma: the multi-start search picks the best of many noise bumps
    degenerate = bool(err[2] > 0 and abs(p[2]) < 3.0 * err[2]) or not np.isfinite(err).all()
    if degenerate:
        notes.append("amplitude not significant")
    if err[1] > abs(p[1]):
        notes.append("width not determined")
        degenerate = True
    if not (x.min() <= p[0] <= x.max()):
        notes.append("centre outside data range")
        degenerate = True
    p[1] = abs(p[1])
    if p[1] < np.min(np.diff(np.unique(x))):
        notes.append("width below grid spacing")
        degenerate = True
    return FitResult("lorentzian", dict(zip(names, map(float, p))), dict(zip(names, map(float, err))),
                     float(np.sqrt(cost)), bool(conv), degenerate, int(x.size), int(it), tuple(notes))


def powerlaw_fit(x, y, window=None):
    """y = prefactor * x**exponent by linear regression of log y on log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        keep = (x >= window[0]) & (x <= window[1])
        x, y = x[keep], y[keep]
    if x.size < 2:
        raise DomainError("power-law fit needs at least two points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("power-law fit needs positive x and y in the window")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise DomainError("power-law fit needs distinct x values")
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    dof = x.size - 2
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(A.T @ A)
    err = np.sqrt(np.clip(np.diag(cov), 0.0, np.inf))
    params = {"exponent": float(coef[0]), "prefactor": float(np.exp(coef[1]))}
    stderr = {"exponent": float(err[0]), "prefactor": float(np.exp(coef[1]) * err[1])}
    notes = ("no residual degrees of freedom",) if dof == 0 else ()
    return FitResult("powerlaw", params, stderr, float(np.sqrt(resid @ resid)), True, False, int(x.size), 1, notes)
