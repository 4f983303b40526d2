"""Many-body basis and Hamiltonian for the frozen Rydberg gas.

Every site is an atom with a short list of local levels. Local index 0 is the
initial level of s- and d-atoms. Couplings are resonant flip-flops only:

* transfer     s: 49s -> 49p  together with  d: 41d -> 42p
* s exchange   49p on one s-atom hops to a 49s neighbour
* d exchange   42p on one d-site hops to a 41d neighbour

Two fidelities exist. ``scalar`` keeps two levels per atom and uses branch
coupling constants times (1 - 3 cos^2 theta) / R^3. ``tensor`` keeps the mj
sublevels and contracts full dipole vectors with the rank-2 dipole-dipole
geometry.

Positions are in um, energies in MHz. The quantization axis is the electric
field axis, which is also the beam-separation axis (lab x by default).
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import units
from .atomic import (
    BRANCH_MJ,
    D_FINAL,
    D_INITIAL,
    S_FINAL,
    S_INITIAL,
    CouplingChannel,
    RydbergState,
    dipole_moment,
    default_defects,
)
from .errors import DomainError, ResourceError

ROLES = ("s", "d", "p42", "p43")
FIELD_AXIS = (1.0, 0.0, 0.0)
MIN_SEPARATION_UM = 0.5
MAX_BASIS = 20000

SPECTATOR_42P = RydbergState(42, 1, 0.5, 0.5)
SPECTATOR_43P = RydbergState(43, 1, 0.5, 0.5)


@dataclass(frozen=True)
class AtomSite:
    """An atom at a fixed position (um) with its local level set.

    Roles: ``s`` (49s atom), ``d`` (41d atom), ``p42`` (atom initially in
    42p1/2 inside the d-cylinder, able to hand its excitation to a 41d atom)
    and ``p43`` (inert 43p spectator).
    """

    position: tuple
    role: str
    levels: tuple = ()
    initial: int = 0

    def __post_init__(self):
        if self.role not in ROLES:
            raise DomainError(f"unknown role {self.role!r}")
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3:
            raise DomainError("position must be a 3-vector")
        object.__setattr__(self, "position", pos)
        if not self.levels:
            levels, initial = _default_levels(self.role)
            object.__setattr__(self, "levels", levels)
            object.__setattr__(self, "initial", initial)

    @property
    def cylinder(self):
        return "s" if self.role == "s" else "d"

    def excited(self, local):
        """True when the local level carries the channel excitation."""
        lv = self.levels[local]
        if self.role == "s":
            return lv.level_key() == S_FINAL.level_key()
        if self.role in ("d", "p42"):
            return lv.level_key() == D_FINAL.level_key()
        return False


def _default_levels(role):
    if role == "s":
        return (S_INITIAL, S_FINAL), 0
    if role == "d":
        return (D_INITIAL, D_FINAL), 0
    if role == "p42":
        return (D_INITIAL, SPECTATOR_42P), 1
    return (SPECTATOR_43P,), 0


def tensor_levels(role):
    """Sublevel-resolved local level sets for tensor mode."""
    if role == "s":
        levels = [S_INITIAL.with_mj(m) for m in (0.5, -0.5)]
        levels += [S_FINAL.with_mj(m) for m in (1.5, 0.5, -0.5, -1.5)]
        return tuple(levels), 0
    if role in ("d", "p42"):
        levels = [D_INITIAL.with_mj(m) for m in (0.5, -0.5)]
        levels += [D_FINAL.with_mj(m) for m in (0.5, -0.5)]
        return tuple(levels), (0 if role == "d" else 2)
    return (SPECTATOR_43P,), 0


def make_site(position, role, mode="scalar"):
    if mode == "scalar":
        return AtomSite(position, role)
    if mode == "tensor":
        levels, initial = tensor_levels(role)
        return AtomSite(position, role, levels, initial)
    raise DomainError(f"unknown model mode {mode!r}")


# ----------------------------------------------------------------- geometry


def _frame(axis):
    """Orthonormal (e1, e2, e3) with e3 along the quantization axis."""
    e3 = np.asarray(axis, dtype=float)
    e3 = e3 / np.linalg.norm(e3)
    helper = np.array([0.0, 1.0, 0.0]) if abs(e3[1]) < 0.9 else np.array([0.0, 0.0, 1.0])
    e1 = helper - e3 * (helper @ e3)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return e1, e2, e3


def _unit_spherical(n):
    """Spherical components (n_-1, n_0, n_+1) of a unit vector in the local frame."""
    x, y, z = n
    return {-1: (x - 1j * y) / np.sqrt(2), 0: z + 0j, 1: -(x + 1j * y) / np.sqrt(2)}


def angular_weight(q1, q2, n):
    """Coefficient of d1_q1 d2_q2 in (d1.d2 - 3 (d1.n)(d2.n))."""
    ns = _unit_spherical(n)
    w = -3.0 * (-1) ** (q1 + q2) * ns[-q1] * ns[-q2]
    if q1 == -q2:
        w += (-1) ** q1
    return w


def pair_coupling(r1, r2, mu1, mu2, mode="scalar", axis=FIELD_AXIS, min_separation=MIN_SEPARATION_UM):
    """Dipole-dipole matrix element in MHz between sites at r1, r2 (um).

    scalar: ``mu1`` and ``mu2`` are real effective dipoles (a0 e) and the
    result is mu1 mu2 (1 - 3 cos^2 theta) / R^3, theta measured from ``axis``.

    tensor: ``mu1`` and ``mu2`` map q -> <f|d_q|i> (a0 e) and the result is the
    full contraction sum_{q1 q2} w_{q1 q2}(theta, phi) mu1[q1] mu2[q2] / R^3.
    """
    R = np.asarray(r2, dtype=float) - np.asarray(r1, dtype=float)
    dist = float(np.linalg.norm(R))
    if dist < min_separation:
        raise DomainError(f"close pair: R = {dist:.3g} um below {min_separation} um")
    e1, e2, e3 = _frame(axis)
    n = np.array([R @ e1, R @ e2, R @ e3]) / dist
    scale = units.DIPOLE_COUPLING_MHZ / dist**3
    if mode == "scalar":
        return float(mu1 * mu2 * (1.0 - 3.0 * n[2] ** 2) * scale)
    if mode == "tensor":
        total = 0j
        for q1, a in mu1.items():
            if a == 0:
                continue
            for q2, b in mu2.items():
                if b != 0:
                    total += angular_weight(q1, q2, n) * a * b
        return complex(total * scale)
    raise DomainError(f"unknown coupling mode {mode!r}")


def geometry_factors(positions, axis=FIELD_AXIS, cap_distance=None):
    """(1 - 3 cos^2 theta) / R^3 for all pairs, times the MHz conversion; and R.

    With ``cap_distance`` the radial factor uses max(R, cap_distance).
    """
    P = np.asarray(positions, dtype=float)
    diff = P[None, :, :] - P[:, None, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    ax = np.asarray(axis, dtype=float)
    ax = ax / np.linalg.norm(ax)
    radial = dist if cap_distance is None else np.maximum(dist, cap_distance)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = (diff @ ax) / dist
        g = (1.0 - 3.0 * cos**2) / radial**3 * units.DIPOLE_COUPLING_MHZ
    np.fill_diagonal(g, 0.0)
    return g, dist


# -------------------------------------------------------------------- basis


@dataclass(frozen=True)
class Basis:
    configs: tuple
    index: dict = field(compare=False, hash=False)

    def __len__(self):
        return len(self.configs)


def _local_moves(sites, mode, exchange):
    """Structural coupling terms: (i, j, from_i, to_i, from_j, to_j, kind)."""
    moves = []
    n = len(sites)
    for i, j in itertools.combinations(range(n), 2):
        a, b = sites[i], sites[j]
        kinds = []
        if {a.role, b.role} <= {"s"} and exchange:
            kinds.append("exchange_s")
        elif a.role in ("d", "p42") and b.role in ("d", "p42") and exchange:
            kinds.append("exchange_d")
        elif {a.role, b.role} in ({"s", "d"}, {"s", "p42"}):
            kinds.append("transfer")
        for kind in kinds:
            for fa, ta in itertools.permutations(range(len(a.levels)), 2):
                for fb, tb in itertools.permutations(range(len(b.levels)), 2):
                    if _allowed(a, fa, ta, b, fb, tb, kind, mode):
                        moves.append((i, j, fa, ta, fb, tb, kind))
    return moves


def _allowed(a, fa, ta, b, fb, tb, kind, mode):
    ea, eb = a.excited, b.excited
    if kind == "transfer":
        # both climb or both descend
        if not ((not ea(fa) and ea(ta) and not eb(fb) and eb(tb)) or (ea(fa) and not ea(ta) and eb(fb) and not eb(tb))):
            return False
    else:
        if not ((ea(fa) and not ea(ta) and not eb(fb) and eb(tb)) or (not ea(fa) and ea(ta) and eb(fb) and not eb(tb))):
            return False
    if mode == "scalar":
        return True
    # tensor: off-axis geometry couples every (q1, q2), so each atom only needs
    # some nonzero dipole component for its own step
    d = default_defects()
    return any(dipole_moment(a.levels[ta], a.levels[fa], q, d) != 0.0 for q in (-1, 0, 1)) and any(
        dipole_moment(b.levels[tb], b.levels[fb], q, d) != 0.0 for q in (-1, 0, 1)
    )


def build_basis(sites, channel=None, max_transfers=None, cap=MAX_BASIS, mode="scalar", exchange=True):
    """All product configurations reachable from the initial one.

    Reachability follows the structural coupling terms (not their numerical
    size), so accidental zeros such as the magic angle do not shrink the basis.
    """
    if not any(s.role == "s" for s in sites):
        raise DomainError("need at least one s-atom")
    if not any(s.role in ("d", "p42") for s in sites):
        raise DomainError("need at least one d-atom")
    moves = _local_moves(sites, mode, exchange)
    start = tuple(s.initial for s in sites)
    s_idx = [k for k, s in enumerate(sites) if s.role == "s"]

    def n_transfers(cfg):
        return sum(sites[k].excited(cfg[k]) for k in s_idx)

    seen = {start}
    queue = deque([start])
    while queue:
        cfg = queue.popleft()
        for i, j, fa, ta, fb, tb, _ in moves:
            if cfg[i] != fa or cfg[j] != fb:
                continue
            nxt = list(cfg)
            nxt[i], nxt[j] = ta, tb
            nxt = tuple(nxt)
            if nxt in seen:
                continue
            if max_transfers is not None and n_transfers(nxt) > max_transfers:
                continue
            seen.add(nxt)
            if len(seen) > cap:
                raise ResourceError(
                    f"basis exceeds cap {cap} with {len(sites)} atoms "
                    f"({len(s_idx)} s, {len(sites) - len(s_idx)} others)"
                )
            queue.append(nxt)
    configs = tuple(sorted(seen))
    return Basis(configs, {c: k for k, c in enumerate(configs)})


# -------------------------------------------------------------- assembly


@dataclass(frozen=True)
class ManyBodyProblem:
    sites: tuple
    basis: Basis
    H: np.ndarray
    initial_index: int
    excitation: np.ndarray  # number of 49p s-atoms per basis configuration
    n_s: int
    mode: str = "scalar"

    @property
    def dim(self):
        return len(self.basis)


def _scalar_constants(channel, branch):
    b = channel.branch(branch)
    return {"transfer": b.transfer, "exchange_s": b.exchange_s, "exchange_d": b.exchange_d}


def _tensor_vector(site, frm, to):
    d = default_defects()
    return {q: dipole_moment(site.levels[to], site.levels[frm], q, d) for q in (-1, 0, 1)}


def _diagonal(sites, configs, detunings, noise, mode, stark_by_mj=None):
    diag = np.zeros(len(configs))
    noise = np.zeros(len(sites)) if noise is None else np.asarray(noise, dtype=float)
    for k, cfg in enumerate(configs):
        e = 0.0
        for i, (site, loc) in enumerate(zip(sites, cfg)):
            if not site.excited(loc):
                continue
            e += noise[i]
            if site.role == "s":
                if mode == "scalar":
                    e += detunings
                else:
                    e += stark_by_mj[abs(site.levels[loc].mj)]
        diag[k] = e
    return diag


@lru_cache(maxsize=256)
def _scalar_structure(roles, exchange, max_transfers):
    """Basis plus edge lists for a role pattern (positions do not matter)."""
    sites = tuple(AtomSite((0.0, 0.0, float(k)), r) for k, r in enumerate(roles))
    basis = build_basis(sites, max_transfers=max_transfers, exchange=exchange)
    moves = _local_moves(sites, "scalar", exchange)
    rows, cols, pi, pj, kinds = [], [], [], [], []
    for cfg in basis.configs:
        a = basis.index[cfg]
        for i, j, fa, ta, fb, tb, kind in moves:
            if cfg[i] != fa or cfg[j] != fb:
                continue
            nxt = list(cfg)
            nxt[i], nxt[j] = ta, tb
            b = basis.index.get(tuple(nxt))
            if b is None or b <= a:
                continue
            rows.append(a)
            cols.append(b)
            pi.append(i)
            pj.append(j)
            kinds.append(kind)
    s_idx = [k for k, r in enumerate(roles) if r == "s"]
    excitation = np.array([sum(sites[k].excited(c[k]) for k in s_idx) for c in basis.configs], dtype=float)
    excited = np.array([[site.excited(c[i]) for i, site in enumerate(sites)] for c in basis.configs], dtype=float)
    return (basis, np.array(rows, dtype=int), np.array(cols, dtype=int), np.array(pi, dtype=int),
            np.array(pj, dtype=int), tuple(kinds), excitation, excited)


def assemble_hamiltonian(sites, channel=None, basis=None, detuning=0.0, noise=None, branch="F1",
                         mode="scalar", exchange=True, max_transfers=None, axis=FIELD_AXIS,
                         min_separation=MIN_SEPARATION_UM, stark_by_mj=None, cap_distance=None):
    """Hermitian Hamiltonian (MHz) of the sites.

    Off-diagonal: flip-flop couplings. Diagonal: ``detuning`` per completed
    transfer (scalar mode) or the per-|mj| branch detunings ``stark_by_mj``
    (tensor mode), plus ``noise[i]`` for every excited site ``i``.
    ``cap_distance`` (scalar fast path) clamps R from below instead of
    rejecting close pairs; pass ``min_separation=0`` with it.
    """
    sites = tuple(sites)
    channel = channel or CouplingChannel.rb_default()
    noise = None if noise is None else np.asarray(noise, dtype=float)
    if noise is not None and noise.shape != (len(sites),):
        raise DomainError("need one noise detuning per site")
    positions = np.array([s.position for s in sites])
    if mode == "scalar" and basis is None:
        return _assemble_scalar(sites, channel, positions, detuning, noise, branch, exchange,
                                max_transfers, axis, min_separation, cap_distance)
    if basis is None:
        basis = build_basis(sites, channel, max_transfers=max_transfers, mode=mode, exchange=exchange)
    if stark_by_mj is None:
        stark_by_mj = {0.5: detuning, 1.5: detuning}
    _, dist = geometry_factors(positions, axis)
    _check_close(dist, min_separation)
    moves = _local_moves(sites, mode, exchange)
    H = np.zeros((len(basis), len(basis)), dtype=complex if mode == "tensor" else float)
    consts = _scalar_constants(channel, branch) if mode == "scalar" else None
    g, _ = geometry_factors(positions, axis) if mode == "scalar" else (None, None)
    for cfg in basis.configs:
        a = basis.index[cfg]
        for i, j, fa, ta, fb, tb, kind in moves:
            if cfg[i] != fa or cfg[j] != fb:
                continue
            nxt = list(cfg)
            nxt[i], nxt[j] = ta, tb
            b = basis.index.get(tuple(nxt))
            if b is None or b <= a:
                continue
            if mode == "scalar":
                v = consts[kind] * g[i, j]
            else:
                v = pair_coupling(sites[i].position, sites[j].position, _tensor_vector(sites[i], fa, ta),
                                  _tensor_vector(sites[j], fb, tb), "tensor", axis, min_separation)
            # <b|V|a>; mirror for Hermiticity
            H[b, a] = v
            H[a, b] = np.conj(v)
    H[np.diag_indices_from(H)] = _diagonal(sites, basis.configs, detuning, noise, mode, stark_by_mj)
    s_idx = [k for k, s in enumerate(sites) if s.role == "s"]
    excitation = np.array([sum(sites[k].excited(c[k]) for k in s_idx) for c in basis.configs], dtype=float)
    H.setflags(write=False)
    return ManyBodyProblem(sites, basis, H, basis.index[tuple(s.initial for s in sites)], excitation,
                           len(s_idx), mode)


def _check_close(dist, min_separation):
    iu = np.triu_indices_from(dist, 1)
    if iu[0].size and dist[iu].min() < min_separation:
        raise DomainError(f"close pair: R = {dist[iu].min():.3g} um below {min_separation} um")


def _assemble_scalar(sites, channel, positions, detuning, noise, branch, exchange, max_transfers, axis,
                     min_separation, cap_distance=None):
    roles = tuple(s.role for s in sites)
    basis, rows, cols, pi, pj, kinds, excitation, excited = _scalar_structure(roles, exchange, max_transfers)
    g, dist = geometry_factors(positions, axis, cap_distance)
    _check_close(dist, min_separation)
    consts = _scalar_constants(channel, branch)
    c = np.array([consts[k] for k in kinds])
    H = np.zeros((len(basis), len(basis)))
    vals = c * g[pi, pj]
    H[cols, rows] = vals
    H[rows, cols] = vals
    diag = excitation * detuning
    if noise is not None:
        diag = diag + excited @ noise
    H[np.diag_indices_from(H)] = diag
    H.setflags(write=False)
    start = tuple(s.initial for s in sites)
    return ManyBodyProblem(sites, basis, H, basis.index[start], excitation, roles.count("s"), "scalar")


def dump_problem(problem, path):
    """Plain-text dump of H and the basis listing, for oracle comparisons."""
    with open(path, "w") as fh:
        fh.write(f"# dim {problem.dim} mode {problem.mode} initial {problem.initial_index}\n")
        for k, site in enumerate(problem.sites):
            x, y, z = site.position
            fh.write(f"# site {k} {site.role} {x!r} {y!r} {z!r}\n")
        for k, cfg in enumerate(problem.basis.configs):
            fh.write(f"# config {k} {' '.join(map(str, cfg))}\n")
        H = np.asarray(problem.H)
        for row in H:
            if np.iscomplexobj(H):
                fh.write(" ".join(f"{v.real!r}{v.imag:+.17g}j" for v in row) + "\n")
            else:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


BRANCH_OF_MJ = {mj: name for name, mj in BRANCH_MJ.items()}
