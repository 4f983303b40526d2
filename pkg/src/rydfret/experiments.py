"""Field, separation and time scans plus their standard analyses."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .atomic import resonance_field
from .ensemble import background_fraction, run_ensemble, with_separation
from .errors import DomainError
from .fitting import lorentzian_fit, powerlaw_fit

AXES = {"field-scan": ("field", "V/cm"), "position-scan": ("separation", "um"), "time-scan": ("time", "us")}
THRESHOLD = 0.17


@dataclass(frozen=True)
class ScanResult:
    kind: str
    axis: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    shots: np.ndarray
    config: object
    branch: str = "F1"
    separation: float | None = None
    warnings: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in AXES:
            raise DomainError(f"unknown scan kind {self.kind!r}")
        ax = np.asarray(self.axis, dtype=float)
        if ax.size > 1 and not np.all(np.diff(ax) > 0):
            raise DomainError("scan axis must be strictly increasing")

    @property
    def axis_label(self):
        name, unit = AXES[self.kind]
        return f"{name}_{unit.replace('/', '_per_')}"


@dataclass(frozen=True)
class RateResult:
    separation: float | None
    tau: float | None  # us
    rate: float | None  # MHz
    censored: bool


def _check_axis(values, what):
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DomainError(f"{what} must be a non-empty list")
    if v.size > 1 and not np.all(np.diff(v) > 0):
        raise DomainError(f"{what} must be strictly increasing")
    return v


def _collect(kind, axis, results, config, branch, separation=None):
    warnings = tuple(sorted({w for r in results for w in r.warnings}))
    return ScanResult(kind, axis, np.array([r.mean[0] for r in results]), np.array([r.stderr[0] for r in results]),
                      np.array([r.shots for r in results]), config, branch, separation, warnings)


def field_scan(config, fields, time=10.0, shots=200, workers=1):
    """Mean 49p fraction at ``time`` vs applied field, both branches summed."""
    F = _check_axis(fields, "fields")
    base = replace(config, times=(float(time),), branches=("F1", "F2"))
    res = [run_ensemble(replace(base, electric_field=float(f)), shots, workers) for f in F]
    return _collect("field-scan", F, res, base, "F1+F2")


def resonant_field(config, branch):
    return resonance_field(config.stark, branch)


def position_scan(config, separations, time=10.0, branch="F1", shots=200, workers=1):
    """Mean 49p fraction at ``time`` vs s-cylinder offset along the field axis."""
    d = _check_axis(separations, "separations")
    base = replace(config, times=(float(time),), branches=(branch,), electric_field=resonant_field(config, branch))
    res = [run_ensemble(with_separation(base, x), shots, workers) for x in d]
    return _collect("position-scan", d, res, base, branch)


def time_scan(config, separations, times, branch="F1", shots=200, workers=1):
    """Growth curves, one ScanResult per separation."""
    t = _check_axis(times, "times")
    if t[0] != 0.0:
        raise DomainError("time grid must start at 0")
    d = np.asarray(separations, dtype=float)
    base = replace(config, times=tuple(t), branches=(branch,), electric_field=resonant_field(config, branch))
    out = []
    for x in d:
        r = run_ensemble(with_separation(base, x), shots, workers)
        out.append(ScanResult("time-scan", t, r.mean, r.stderr, np.full(t.size, r.shots), with_separation(base, x),
                              branch, float(x), r.warnings))
    return out


def rate_extraction(scan, threshold=THRESHOLD):
    """tau at the first upward crossing of ``threshold``, linearly interpolated."""
    t, y = np.asarray(scan.axis), np.asarray(scan.mean)
    above = np.nonzero(y >= threshold)[0]
    if above.size == 0:
        return RateResult(scan.separation, None, None, True)
    k = int(above[0])
    if k == 0:
        tau = float(t[0])
    else:
        tau = float(t[k - 1] + (threshold - y[k - 1]) * (t[k] - t[k - 1]) / (y[k] - y[k - 1]))
    return RateResult(scan.separation, tau, (1.0 / tau) if tau > 0 else None, tau <= 0)


def convolved_width(config):
    """Quadrature sum of the transverse Gaussian sigmas of the two cylinders (um)."""
    return float(np.sqrt(sum(v.sigmas[0] ** 2 for v in config.volumes)))


def effective_distance(d, config):
    """sqrt(d^2 + w_conv^2): separation corrected for the finite cylinder widths."""
    return np.sqrt(np.asarray(d, dtype=float) ** 2 + convolved_width(config) ** 2)


def fit_field_peaks(scan, centres=None, half_window=None):
    """Independent single-Lorentzian fits around each branch resonance."""
    if centres is None:
        centres = {b: resonant_field(scan.config, b) for b in ("F1", "F2")}
    if half_window is None:
        vals = sorted(centres.values())
        half_window = 0.5 * (vals[-1] - vals[0]) if len(vals) > 1 else 0.015
    return {b: lorentzian_fit(scan.axis, scan.mean, scan.stderr, (c - half_window, c + half_window))
            for b, c in centres.items()}


def wing_fit(scan, min_abs=30.0, effective=True):
    """Power-law fit of the position-scan wings |d| >= min_abs, both sides pooled."""
    d = np.asarray(scan.axis)
    keep = np.abs(d) >= min_abs
    x = np.abs(d[keep])
    if effective:
        x = effective_distance(x, scan.config)
    return powerlaw_fit(x, scan.mean[keep])


def rate_fit(scans, threshold=THRESHOLD, effective=True):
    """Power-law fit of 1/tau vs separation over uncensored time scans."""
    rates = [rate_extraction(s, threshold) for s in scans]
    ok = [(s, r) for s, r in zip(scans, rates) if not r.censored]
    if len(ok) < 2:
        raise DomainError("need at least two uncensored separations for a rate fit")
    d = np.array([r.separation for _, r in ok])
    x = effective_distance(d, ok[0][0].config) if effective else d
    return powerlaw_fit(x, np.array([r.rate for _, r in ok])), rates


# ------------------------------------------------------------------ output


def output_name(kind, branch, seed, suffix="csv", separation=None):
    tag = branch.replace("+", "")
    sep = "" if separation is None else f"_d{separation:g}um"
    return f"{kind}_{tag}{sep}_seed{seed}.{suffix}"


def scan_baseline(scan):
    """Background-only fraction at each scan point (zero unless blackbody is on)."""
    t = scan.axis if scan.kind == "time-scan" else np.full(len(scan.axis), scan.config.times[0])
    return background_fraction(scan.config.noise, t)


def scan_to_csv(scan, fh):
    name = scan.axis_label
    cfg = scan.config
    fh.write(f"# kind={scan.kind} branch={scan.branch} seed={cfg.seed} config_hash={cfg.config_hash()}")
    if scan.separation is not None:
        fh.write(f" separation_um={scan.separation!r}")
    fh.write("\n")
    fh.write(f"{name},mean,stderr,shots,baseline,subtracted\n")
    base = scan_baseline(scan)
    for a, m, s, n, b in zip(scan.axis, scan.mean, scan.stderr, scan.shots, base):
        fh.write(f"{float(a)!r},{float(m)!r},{float(s)!r},{int(n)},{float(b)!r},{float(m - b)!r}\n")


def fit_report(fits, fh, title=""):
    if title:
        fh.write(f"# {title}\n")
    for label, fit in fits.items():
        fh.write(f"[{label}] model={fit.model} converged={fit.converged} degenerate={fit.degenerate} "
                 f"points={fit.n_points} iterations={fit.iterations} residual_norm={fit.residual_norm!r}\n")
        for k, v in fit.params.items():
            fh.write(f"  {k} = {v!r} +- {fit.stderr[k]!r}\n")
        for note in fit.notes:
            fh.write(f"  note: {note}\n")
        if not fit.reliable:
            fh.write("  warning: parameters unreliable\n")
