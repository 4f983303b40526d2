"""Coherent time evolution of an assembled problem.

Frequency convention: H is in MHz, t in us and the phase accumulated by an
eigenstate of energy E is 2*pi*E*t. A resonant pair with coupling V therefore
transfers as sin^2(2 pi V t), first reaching 1 at t = 1/(4V), and the full
beat period of the transferred fraction is 1/(2V).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericalError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class EvolutionResult:
    times: np.ndarray
    populations: np.ndarray  # (len(times), dim)
    p_fraction: np.ndarray
    amplitudes: np.ndarray | None = None

    @property
    def norms(self):
        return self.populations.sum(axis=1)


def _initial_vector(problem, initial):
    if initial is not None:
        psi = np.asarray(initial, dtype=complex)
        if psi.shape != (problem.dim,):
            raise ValueError("initial state has the wrong dimension")
        return psi
    psi = np.zeros(problem.dim, dtype=complex)
    psi[problem.initial_index] = 1.0
    return psi


def _result(problem, times, amps):
    pops = np.abs(amps) ** 2
    frac = pops @ problem.excitation / problem.n_s
    return EvolutionResult(times, pops, np.clip(frac, 0.0, 1.0), amps)


def eigensystem(H):
    H = np.asarray(H)
    if not np.all(np.isfinite(H)):
        raise NumericalError("Hamiltonian has non-finite entries", {"dim": H.shape[0]})
    try:
        return np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(H) if np.all(np.isfinite(H)) else float("nan")
        raise NumericalError(f"eigensolver failed: {exc}", {"dim": H.shape[0], "condition": cond}) from exc


def evolve(problem, times, initial=None):
    """Exact propagation through the eigendecomposition of H."""
    times = np.asarray(times, dtype=float)
    psi0 = _initial_vector(problem, initial)
    E, U = eigensystem(problem.H)
    c = U.conj().T @ psi0
    phases = np.exp(-1j * TWO_PI * np.outer(times, E))
    amps = (phases * c) @ U.T
    return _result(problem, times, amps)


def evolve_oracle(problem, times, initial=None, safety=0.05, budget=1e-8):
    """Independent check: fixed-step classical RK4.

    The step satisfies ||2 pi H|| dt <= safety and is further shortened so the
    accumulated RK4 error estimate, N (||2 pi H|| dt)^5 / 120, stays below
    ``budget`` over the requested time span.
    """
    times = np.asarray(times, dtype=float)
    if times.size and (times[0] < 0 or np.any(np.diff(times) < 0)):
        raise ValueError("oracle times must be non-negative and non-decreasing")
    psi0 = _initial_vector(problem, initial)
    hnorm = TWO_PI * np.linalg.norm(np.asarray(problem.H), 2)
    span = float(times.max()) if times.size else 0.0
    if hnorm > 0 and span > 0:
        x = min(safety, (120.0 * budget / (hnorm * span)) ** 0.25)
        dt = x / hnorm
    else:
        dt = np.inf
    if hnorm == 0:
        amps = np.tile(psi0, (times.size, 1))
    else:
        amps = kernels.rk4_propagate(np.asarray(problem.H), psi0, times, dt)
    drift = np.abs(np.sum(np.abs(amps) ** 2, axis=1) - np.vdot(psi0, psi0).real)
    if drift.size and drift.max() > 1e-6:
        raise NumericalError("RK4 norm drift above 1e-6; reduce the step",
                             {"drift": float(drift.max()), "dt": dt, "norm_H": hnorm})
    return _result(problem, times, amps)


def two_level_analytic(V, delta, t):
    """Transfer probability for H = [[0, V], [V, delta]] (MHz), t in us."""
    t = np.asarray(t, dtype=float)
    W2 = 4.0 * V * V + delta * delta
    if W2 == 0:
        return np.zeros_like(t) if t.ndim else 0.0
    out = 4.0 * V * V / W2 * np.sin(np.pi * np.sqrt(W2) * t) ** 2
    return float(out) if out.ndim == 0 else out


def beat_period(V):
    """Full period (us) of sin^2(2 pi V t)."""
    return 1.0 / (2.0 * abs(V))
