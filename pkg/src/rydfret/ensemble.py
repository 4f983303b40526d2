"""Monte Carlo ensemble over frozen-gas shots.

A shot draws Poisson atom numbers and Gaussian positions for the two
cylinders, picks one s-atom at random, keeps its nearest neighbours, applies
quasi-static noise and propagates the truncated many-body problem exactly.

Randomness is derived from ``SeedSequence([seed, shot_index])`` so any shot
can be reproduced on its own and worker scheduling never changes a result.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .atomic import CouplingChannel, StarkModel, detuning
from .dynamics import evolve
from .errors import DomainError, EnsembleError, RydfretError
from .hamiltonian import MIN_SEPARATION_UM, AtomSite, assemble_hamiltonian

log = logging.getLogger(__name__)

MAX_FAILED_FRACTION = 0.10


@dataclass(frozen=True)
class VolumeSpec:
    """Gaussian cigar of atoms. Widths are 1/sqrt(e) full widths in um."""

    center: tuple = (0.0, 0.0, 0.0)
    widths: tuple = (16.3, 16.3, 500.0)
    mean_count: float = 16.0
    role: str = "d"

    def __post_init__(self):
        if len(self.center) != 3 or len(self.widths) != 3:
            raise DomainError("center and widths must be 3-vectors")
        if any(w <= 0 for w in self.widths):
            raise DomainError("volume widths must be positive")
        if self.mean_count < 0:
            raise DomainError("mean atom count must be non-negative")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))

    @property
    def sigmas(self):
        return np.asarray(self.widths) / 2.0


def s_volume(separation=0.0, mean_count=12.5, diameter=11.6, length=500.0):
    return VolumeSpec((float(separation), 0.0, 0.0), (diameter, diameter, length), mean_count, "s")


def d_volume(mean_count=16.0, diameter=16.3, length=500.0):
    return VolumeSpec((0.0, 0.0, 0.0), (diameter, diameter, length), mean_count, "d")


@dataclass(frozen=True)
class NoiseModel:
    field_noise: float = 2.0  # mV/cm rms, one draw per shot
    magnetic: float = 1.4  # MHz rms, one draw per atom
    blackbody: float = 0.0  # kHz, incoherent 49s -> 49p
    decay: float = 0.0  # kHz, survival weight on the coherent signal

    def __post_init__(self):
        if min(self.field_noise, self.magnetic, self.blackbody, self.decay) < 0:
            raise DomainError("noise amplitudes and rates must be non-negative")


QUIET = NoiseModel(field_noise=0.0, magnetic=0.0)


@dataclass(frozen=True)
class TruncationPolicy:
    """Which atoms enter the quantum calculation.

    ``fixed``: the picked s-atom plus the nearest others up to ``n_s`` s-atoms,
    ``n_d`` d-atoms and ``n_p42`` 42p spectators.
    ``convergence``: add the nearest remaining atom until successive curves
    differ by less than ``tolerance`` or ``cap`` atoms are in.
    """

    kind: str = "fixed"
    n_s: int = 2
    n_d: int = 3
    n_p42: int = 0
    tolerance: float = 0.01
    cap: int = 8

    def __post_init__(self):
        if self.kind not in ("fixed", "convergence"):
            raise DomainError(f"unknown truncation policy {self.kind!r}")
        if self.n_s < 1 or self.n_d < 0 or self.cap < 2:
            raise DomainError("truncation needs n_s >= 1, n_d >= 0 and cap >= 2")


@dataclass(frozen=True)
class ShotConfig:
    seed: int = 0
    volumes: tuple = field(default_factory=lambda: (s_volume(40.0), d_volume()))
    spectators: tuple = (0.0, 0.0)  # mean 42p and 43p counts in the d-cylinder
    stark: StarkModel = field(default_factory=StarkModel)
    branches: tuple = ("F1",)
    electric_field: float = 0.38  # V/cm
    times: tuple = (10.0,)  # us
    truncation: TruncationPolicy = field(default_factory=TruncationPolicy)
    noise: NoiseModel = field(default_factory=NoiseModel)
    mode: str = "scalar"
    exchange: bool = True
    close_pairs: str = "reject"
    min_separation: float = MIN_SEPARATION_UM
    position_blur: float = 0.0  # um rms
    max_transfers: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "branches", tuple(self.branches))
        if self.close_pairs not in ("reject", "cap"):
            raise DomainError("close_pairs must be 'reject' or 'cap'")
        if self.electric_field < 0:
            raise DomainError("field must be non-negative")

    def to_dict(self):
        return asdict(self)

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ShotResult:
    times: np.ndarray
    p_fraction: np.ndarray
    status: str = "ok"  # ok | skipped | rejected | failed
    n_atoms: tuple = (0, 0)
    selected: tuple = ()
    warnings: tuple = ()
    error: str = ""


@dataclass(frozen=True)
class EnsembleResult:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    shots: int
    failed: int = 0
    skipped: int = 0
    config_hash: str = ""
    seed: int = 0
    warnings: tuple = ()


def sample_positions(volume, count, rng):
    """``count`` independent Gaussian draws inside ``volume`` (um)."""
    if count < 0:
        raise DomainError("count must be non-negative")
    if count == 0:
        return np.zeros((0, 3))
    return np.asarray(volume.center) + rng.standard_normal((count, 3)) * volume.sigmas


def background_fraction(noise, times):
    """Incoherent 49p fraction with no acceptors present: the d = infinity baseline."""
    times = np.asarray(times, dtype=float)
    return 1.0 - np.exp(-noise.blackbody * 1e-3 * times)


def shot_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(index)]))


def _channel():
    return CouplingChannel.rb_default()


def truncate_neighbors(positions, roles, policy, rng=None, start=None, curve=None):
    """Indices of the atoms kept for the quantum calculation, in selection order.

    ``start`` is the picked s-atom (drawn from ``rng`` when omitted). The
    convergence policy needs ``curve(indices) -> p_fraction array``; it returns
    ``(indices, converged)``. The fixed policy returns ``(indices, True)``.
    """
    positions = np.asarray(positions, dtype=float)
    roles = list(roles)
    s_idx = [k for k, r in enumerate(roles) if r == "s"]
    if not s_idx:
        raise DomainError("truncation needs at least one s-atom")
    if start is None:
        start = s_idx[int(rng.integers(len(s_idx)))]
    dist = np.linalg.norm(positions - positions[start], axis=1)
    order = [k for k in np.argsort(dist, kind="stable") if k != start and roles[k] != "p43"]
    if policy.kind == "fixed":
        want = {"s": policy.n_s - 1, "d": policy.n_d, "p42": policy.n_p42}
        chosen = [start]
        for k in order:
            if want.get(roles[k], 0) > 0:
                want[roles[k]] -= 1
                chosen.append(int(k))
        return chosen, True
    if curve is None:
        raise DomainError("convergence truncation needs a curve callback")
    chosen = [start]
    prev = None
    for k in order:
        chosen.append(int(k))
        if len(chosen) > policy.cap:
            chosen.pop()
            return chosen, False
        if not any(roles[i] in ("d", "p42") for i in chosen):
            continue
        cur = curve(chosen)
        if prev is not None and np.max(np.abs(cur - prev)) < policy.tolerance:
            return chosen, True
        prev = cur
    return chosen, prev is not None and len(chosen) <= policy.cap


def _shot_curve(config, sites, det_by_branch, noise_sel):
    times = np.asarray(config.times)
    total = np.zeros(times.size)
    channel = _channel()
    for branch in config.branches:
        problem = assemble_hamiltonian(
            sites, channel, detuning=det_by_branch[branch], noise=noise_sel, branch=branch,
            mode="scalar", exchange=config.exchange, max_transfers=config.max_transfers,
            min_separation=0.0 if config.close_pairs == "cap" else config.min_separation,
            cap_distance=config.min_separation if config.close_pairs == "cap" else None,
        )
        total += evolve(problem, times).p_fraction
    return total


def run_shot(config, index=0):
    """One realization of the experiment at shot ``index``."""
    times = np.asarray(config.times, dtype=float)
    rng = shot_rng(config.seed, index)
    vols = {v.role: v for v in config.volumes}
    counts = {role: int(rng.poisson(v.mean_count)) for role, v in vols.items()}
    spec_vol = vols.get("d")
    n42 = int(rng.poisson(config.spectators[0])) if config.spectators[0] > 0 else 0
    n43 = int(rng.poisson(config.spectators[1])) if config.spectators[1] > 0 else 0
    pos, roles = [], []
    for role in ("s", "d"):
        if role in vols:
            pos.append(sample_positions(vols[role], counts.get(role, 0), rng))
            roles += [role] * counts.get(role, 0)
    if spec_vol is not None:
        pos.append(sample_positions(spec_vol, n42, rng))
        roles += ["p42"] * n42
        pos.append(sample_positions(spec_vol, n43, rng))
        roles += ["p43"] * n43
    positions = np.concatenate(pos) if pos else np.zeros((0, 3))
    if config.position_blur > 0:
        positions = positions + rng.standard_normal(positions.shape) * config.position_blur
    field_offset = rng.normal(0.0, config.noise.field_noise * 1e-3) if config.noise.field_noise > 0 else 0.0
    magnetic = (rng.normal(0.0, config.noise.magnetic, len(roles)) if config.noise.magnetic > 0
                else np.zeros(len(roles)))
    n_atoms = (counts.get("s", 0), counts.get("d", 0))
    if counts.get("s", 0) == 0:
        return ShotResult(times, np.zeros(times.size), "skipped", n_atoms)
    start = [k for k, r in enumerate(roles) if r == "s"][int(rng.integers(counts["s"]))]

    coherent = np.zeros(times.size)
    warnings = ()
    selected = (start,)
    if any(r in ("d", "p42") for r in roles):
        F = max(config.electric_field + field_offset, 0.0)
        dets = {b: detuning(F, config.stark, b) for b in config.branches}

        def curve(idx):
            sites = [AtomSite(positions[i], roles[i]) for i in idx]
            return _shot_curve(config, sites, dets, magnetic[list(idx)])

        try:
            if config.truncation.kind == "fixed":
                selected, _ = truncate_neighbors(positions, roles, config.truncation, start=start)
                if any(roles[i] in ("d", "p42") for i in selected):
                    coherent = curve(selected)
            else:
                selected, converged = truncate_neighbors(positions, roles, config.truncation, start=start,
                                                         curve=curve)
                coherent = curve(selected)
                if not converged:
                    warnings = (f"truncation did not converge within {config.truncation.cap} atoms",)
        except RydfretError as exc:
            status = "rejected" if "close pair" in str(exc) else "failed"
            return ShotResult(times, np.zeros(times.size), status, n_atoms, tuple(selected), (), str(exc))
        if not np.all(np.isfinite(coherent)):
            return ShotResult(times, np.zeros(times.size), "failed", n_atoms, tuple(selected), (),
                              "non-finite populations")
    p = coherent
    if config.noise.decay > 0:
        p = p * np.exp(-config.noise.decay * 1e-3 * times)
    if config.noise.blackbody > 0:
        p = p + (1.0 - p) * background_fraction(config.noise, times)
    return ShotResult(times, p, "ok", n_atoms, tuple(int(i) for i in selected), warnings)


def _run_chunk(args):
    config, indices = args
    return [run_shot(config, i) for i in indices]


def run_shots(config, shots, workers=1):
    """All shots in index order."""
    if shots < 1:
        raise DomainError("need at least one shot")
    if workers <= 1 or shots < 2 * workers:
        return [run_shot(config, i) for i in range(shots)]
    size = -(-shots // (4 * workers))
    chunks = [(config, range(a, min(a + size, shots))) for a in range(0, shots, size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        out = []
        for part in pool.map(_run_chunk, chunks):
            out.extend(part)
    return out


def reduce_shots(config, results):
    """Mean and standard error over successful shots, in shot-index order."""
    times = np.asarray(config.times, dtype=float)
    ok = [r for r in results if r.status == "ok"]
    failed = sum(r.status in ("failed", "rejected") for r in results)
    skipped = sum(r.status == "skipped" for r in results)
    if failed > MAX_FAILED_FRACTION * len(results):
        errors = sorted({r.error for r in results if r.error})[:3]
        raise EnsembleError(f"{failed} of {len(results)} shots failed: {errors}")
    warnings = tuple(sorted({w for r in ok for w in r.warnings}))
    if not ok:
        raise EnsembleError("no successful shots")
    data = np.stack([r.p_fraction for r in ok])
    mean = data.mean(axis=0)
    stderr = data.std(axis=0, ddof=1) / np.sqrt(len(ok)) if len(ok) > 1 else np.zeros(times.size)
    return EnsembleResult(times, mean, stderr, len(ok), failed, skipped, config.config_hash(),
                          config.seed, warnings)


def run_ensemble(config, shots=200, workers=1):
    return reduce_shots(config, run_shots(config, shots, workers))


def with_separation(config, separation):
    """Copy of ``config`` with the s-cylinder moved to x = separation (um)."""
    vols = tuple(replace(v, center=(float(separation), v.center[1], v.center[2])) if v.role == "s" else v
                 for v in config.volumes)
    return replace(config, volumes=vols)


def ensemble_to_csv(result, path):
    """time, mean, stderr, shots with full-precision floats."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={result.config_hash} seed={result.seed} shots={result.shots} "
                 f"failed={result.failed} skipped={result.skipped}\n")
        fh.write("time_us,mean,stderr,shots\n")
        for t, m, s in zip(result.times, result.mean, result.stderr):
            fh.write(f"{t!r},{float(m)!r},{float(s)!r},{result.shots}\n")
