"""Rubidium Rydberg atomic structure.

Quantum-defect energies, Numerov radial wavefunctions in a pure Coulomb
potential, fine-structure dipole matrix elements, second-order static
polarizabilities and the Stark-tuned detuning of the

    41d3/2 + 49s1/2  ->  42p1/2 + 49p3/2

pair transition. Energies are reported in GHz (levels) or MHz (detunings),
lengths in Bohr radii, dipoles in a0*e, fields in V/cm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources

import numpy as np

from . import kernels, units
from .errors import ConfigError, DomainError, ModelError, NumericalError
from .wigner import wigner3j, wigner6j

_LETTERS = "spdfghik"

#: branch label -> |mj| of the 49p3/2 final state
BRANCH_MJ = {"F1": 0.5, "F2": 1.5}


def _is_half_odd(x):
    return Fraction(x).limit_denominator(4).denominator == 2


@dataclass(frozen=True)
class RydbergState:
    """A single-electron fine-structure sublevel |n L j mj>."""

    n: int
    L: int
    j: float
    mj: float = 0.5
    species: str = "85Rb"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if int(self.L) != self.L or not 0 <= self.L < self.n:
            raise DomainError(f"need 0 <= L < n, got n={self.n}, L={self.L}")
        if not _is_half_odd(self.j) or abs(self.j - self.L) != 0.5:
            raise DomainError(f"j={self.j} is not L +- 1/2 for L={self.L}")
        if not _is_half_odd(self.mj) or abs(self.mj) > self.j:
            raise DomainError(f"mj={self.mj} invalid for j={self.j}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "j", float(self.j))
        object.__setattr__(self, "mj", float(self.mj))

    @property
    def label(self):
        return f"{self.n}{_LETTERS[self.L]}{int(2 * self.j)}/2"

    def with_mj(self, mj):
        return RydbergState(self.n, self.L, self.j, mj, self.species)

    def level_key(self):
        """Identity of the fine-structure level, ignoring mj."""
        return (self.n, self.L, self.j)

    def __str__(self):
        return f"{self.label}(mj={Fraction(self.mj)})"


@dataclass(frozen=True)
class QuantumDefectTable:
    """Rydberg-Ritz defects keyed by (L, 2j) plus the species Rydberg constant."""

    series: tuple  # ((L, twoj, delta0, delta2), ...)
    rydberg_constant_cm: float
    source: str = ""

    def __post_init__(self):
        keys = [(L, tj) for L, tj, _, _ in self.series]
        if len(set(keys)) != len(keys):
            raise ConfigError("duplicate (L, j) rows in quantum-defect table")

    @property
    def rydberg_ghz(self):
        return units.wavenumber_to_ghz(self.rydberg_constant_cm)

    def coefficients(self, L, j):
        tj = int(round(2 * j))
        for row in self.series:
            if row[0] == L and row[1] == tj:
                return row[2], row[3]
        raise ConfigError(f"no quantum defect entry for series L={L}, j={tj}/2")

    def has(self, L, j):
        tj = int(round(2 * j))
        return any(r[0] == L and r[1] == tj for r in self.series)

    @classmethod
    def parse(cls, text, source="<text>"):
        """Parse the plain-text table (rows: L, 2j, delta0, delta2, comment)."""
        rows = []
        rydberg = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, _, value = (s.strip() for s in line.partition("="))
                if key != "rydberg_constant_cm":
                    raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
                rydberg = float(value)
                continue
            parts = line.split()
            if len(parts) < 4:
                raise ConfigError(f"{source}:{lineno}: expected 'L 2j delta0 delta2 [comment]'")
            try:
                L, tj = int(parts[0]), int(parts[1])
                d0, d2 = float(parts[2]), float(parts[3])
            except ValueError as exc:
                raise ConfigError(f"{source}:{lineno}: {exc}") from None
            if L < 0 or tj % 2 != 1 or abs(tj - 2 * L) != 1:
                raise ConfigError(f"{source}:{lineno}: invalid series L={L}, 2j={tj}")
            rows.append((L, tj, d0, d2))
        if rydberg is None:
            raise ConfigError(f"{source}: missing rydberg_constant_cm")
        return cls(tuple(rows), rydberg, source)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.parse(fh.read(), source=str(path))

    @classmethod
    def rb85(cls):
        """The packaged 85Rb table."""
        text = resources.files("rydfret").joinpath("data/quantum_defects_rb85.txt").read_text()
        return cls.parse(text, source="quantum_defects_rb85.txt")

    @classmethod
    def hydrogenic(cls, max_L=8, rydberg_constant_cm=109737.31568160):
        rows = []
        for L in range(max_L + 1):
            for tj in (2 * L - 1, 2 * L + 1):
                if tj > 0:
                    rows.append((L, tj, 0.0, 0.0))
        return cls(tuple(rows), rydberg_constant_cm, "hydrogenic")


@lru_cache(maxsize=1)
def default_defects():
    return QuantumDefectTable.rb85()


def effective_n(state, defects):
    d0, d2 = defects.coefficients(state.L, state.j)
    nstar = state.n - d0 - d2 / (state.n - d0) ** 2
    if nstar <= 0:
        raise DomainError(f"non-positive effective quantum number for {state.label}")
    return nstar


def energy_level(state, defects):
    """Binding energy in GHz below the ionization limit, -Ry/n*^2."""
    return -defects.rydberg_ghz / effective_n(state, defects) ** 2


# ---------------------------------------------------------------- radial part


@dataclass(frozen=True)
class RadialWavefunction:
    """u(r) = r R(r) sampled on r = x^2 with x uniform.

    ``grid`` is r in Bohr radii. Below the inner turning point the inward
    solution is cut where it stops decaying; for hydrogenic states that is the
    origin (u=0 there), for quantum-defect states it is the onset of the
    irregular Coulomb component.
    """

    grid: np.ndarray
    values: np.ndarray
    state: RydbergState
    step: float

    @property
    def x(self):
        return np.sqrt(self.grid)

    def norm(self):
        return float(np.trapezoid(self.values**2 * 2 * self.x, self.x))

    def node_count(self, rel_floor=1e-6):
        u = self.values
        keep = np.abs(u) > rel_floor * np.abs(u).max()
        s = np.sign(u[keep])
        return int(np.count_nonzero(s[1:] != s[:-1]))


def outer_radius(n):
    return 2.0 * n * (n + 15)


@lru_cache(maxsize=512)
def _numerov(nstar, L, step, k_max):
    """Raw inward Numerov on x_k = k*step, k = 1..k_max. Returns (x, u, cut)."""
    x = step * np.arange(1, k_max + 1, dtype=np.float64)
    energy = -0.5 / nstar**2
    g = (2 * L + 0.5) * (2 * L + 1.5) / x**2 - 8.0 - 8.0 * energy * x**2
    y = kernels.numerov_inward(g, step, 1e-10, 1e-10 * (1.0 + step * math.sqrt(max(g[-1], 0.0))))
    if not np.all(np.isfinite(y)):
        raise NumericalError(
            f"Numerov overflow for n*={nstar:.6f}, L={L}",
            {"step": step, "points": k_max},
        )
    allowed = np.nonzero(g < 0)[0]
    if allowed.size == 0:
        raise NumericalError(f"no classically allowed region for n*={nstar}, L={L}",
                             {"step": step, "points": k_max})
    # walk inward from the inner turning point while |y| keeps shrinking
    i = int(allowed[0])
    a = np.abs(y)
    while i > 0 and a[i - 1] < a[i]:
        i -= 1
    return x, np.sqrt(x) * y, i


def radial_wavefunction(state, defects, step=0.01, r_out=None):
    """Normalized radial function from an inward Numerov integration in sqrt(r).

    ``r_out`` defaults to 2n(n+15) Bohr radii. The grid is x_k = k*step so any
    two wavefunctions computed with the same step share abscissae.
    """
    nstar = effective_n(state, defects)
    if nstar <= state.L:
        raise DomainError(f"n*={nstar:.4f} <= L={state.L} for {state.label}")
    if r_out is None:
        r_out = outer_radius(state.n)
    k_max = int(math.ceil(math.sqrt(r_out) / step))
    x, u, cut = _numerov(round(nstar, 12), state.L, step, k_max)
    x, u = x[cut:], u[cut:]
    if cut == 0:
        # inward solution stayed regular down to the first point: pin u(0) = 0
        x = np.concatenate(([0.0], x))
        u = np.concatenate(([0.0], u))
    norm = np.trapezoid(u * u * 2 * x, x)
    if not np.isfinite(norm) or norm <= 0:
        raise NumericalError(
            f"normalization failed for {state.label}",
            {"norm": norm, "step": step, "r_out": r_out, "cut_index": cut},
        )
    u = u / math.sqrt(norm)
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    u.setflags(write=False)
    r = x * x
    r.setflags(write=False)
    return RadialWavefunction(r, u, state, step)


@lru_cache(maxsize=8192)
def _radial_me(ka, kb, defects, step):
    a = RydbergState(*ka)
    b = RydbergState(*kb)
    r_out = max(outer_radius(a.n), outer_radius(b.n))
    wa = radial_wavefunction(a, defects, step, r_out)
    wb = radial_wavefunction(b, defects, step, r_out)
    # both live on x_k = k*step (possibly with a leading 0); align on the tail
    m = min(wa.grid.size, wb.grid.size)
    ua, ub = wa.values[-m:], wb.values[-m:]
    x = np.sqrt(wa.grid[-m:])
    return float(np.trapezoid(ua * ub * 2 * x**3, x))


def radial_matrix_element(a, b, defects, step=0.01):
    """<a| r |b> in Bohr radii for a dipole-allowed pair (|L_a - L_b| = 1)."""
    if abs(a.L - b.L) != 1:
        raise DomainError(f"radial dipole element needs |dL| = 1: {a.label}, {b.label}")
    ka, kb = sorted([(a.n, a.L, a.j), (b.n, b.L, b.j)])
    return _radial_me(ka, kb, defects, step)


def reduced_dipole(a, b, defects, step=0.01):
    """<a||d||b> (a0*e), fine-structure reduced element in the Edmonds convention."""
    if abs(a.L - b.L) != 1 or abs(a.j - b.j) > 1:
        return 0.0
    radial = radial_matrix_element(a, b, defects, step)
    ang_L = (-1) ** a.L * math.sqrt((2 * a.L + 1) * (2 * b.L + 1)) * wigner3j(a.L, 1, b.L, 0, 0, 0)
    phase = (-1) ** int(round(a.L + 0.5 + b.j + 1))
    spin = phase * math.sqrt((2 * a.j + 1) * (2 * b.j + 1)) * wigner6j(a.L, a.j, 0.5, b.j, b.L, 1)
    return radial * ang_L * spin


def dipole_moment(a, b, q, defects, step=0.01):
    """<a| d_q |b> in a0*e. Zero unless m_a = m_b + q and the rules allow it."""
    if q not in (-1, 0, 1):
        raise DomainError(f"spherical component q must be -1, 0 or 1, got {q}")
    if abs(a.L - b.L) != 1 or abs(a.j - b.j) > 1 or a.mj != b.mj + q:
        return 0.0
    phase = (-1) ** int(round(a.j - a.mj))
    return phase * wigner3j(a.j, 1, b.j, -a.mj, q, b.mj) * reduced_dipole(a, b, defects, step)


# ------------------------------------------------------------ Stark shifts


def _dipole_partners(state, window):
    for n in range(state.n - window, state.n + window + 1):
        for L in (state.L - 1, state.L + 1):
            if L < 0 or L >= n:
                continue
            for j in (L - 0.5, L + 0.5):
                if j < 0.5 or abs(j - state.j) > 1:
                    continue
                if abs(state.mj) <= j:
                    yield RydbergState(n, L, j, state.mj, state.species)


def polarizability(state, abs_mj, defects, window=5, min_gap_mhz=50.0, step=0.01):
    """Static scalar+tensor polarizability of one |mj| sublevel, MHz/(V/cm)^2.

    Second-order sum over dipole partners with n within +-window, both L+-1
    series. The level shift convention is -alpha F^2 / 2.
    """
    if window < 4:
        raise DomainError("polarizability window must be at least +-4 in n")
    s = state.with_mj(abs_mj)
    e_s = energy_level(s, defects) * 1e3
    alpha = 0.0
    for k in _dipole_partners(s, window):
        if not defects.has(k.L, k.j):
            raise ConfigError(f"no quantum defect entry for series L={k.L}, j={int(2 * k.j)}/2")
        gap = energy_level(k, defects) * 1e3 - e_s
        if abs(gap) < min_gap_mhz:
            raise ModelError(
                f"{k.label} lies {gap:.1f} MHz from {s.label}; use the empirical Stark model"
            )
        mu = dipole_moment(s, k, 0, defects, step) * units.DIPOLE_FIELD_MHZ
        alpha += 2.0 * mu * mu / gap
    return alpha


# ------------------------------------------------------------ the channel

S_INITIAL = RydbergState(49, 0, 0.5, 0.5)
S_FINAL = RydbergState(49, 1, 1.5, 0.5)
D_INITIAL = RydbergState(41, 2, 1.5, 0.5)
D_FINAL = RydbergState(42, 1, 0.5, 0.5)


@dataclass(frozen=True)
class BranchCoupling:
    """Scalar-model coupling constants of one 49p3/2 |mj| branch.

    Each is the product of two dipole matrix elements, (a0 e)^2, multiplying
    (1 - 3 cos^2 theta) / R^3 in the field-axis frame.
    """

    transfer: float
    exchange_s: float
    exchange_d: float
    mu_d: float
    mu_s: float
    s_final: RydbergState
    d_final: RydbergState


@dataclass(frozen=True)
class CouplingChannel:
    """The pair transition d_initial + s_initial -> d_final + s_final."""

    s_initial: RydbergState = S_INITIAL
    s_final: RydbergState = S_FINAL
    d_initial: RydbergState = D_INITIAL
    d_final: RydbergState = D_FINAL
    zero_field_defect: float = 0.0  # MHz, E_final - E_initial
    branches: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def mu1(self):
        return self.branches["F1"].mu_d

    @property
    def mu2(self):
        return self.branches["F1"].mu_s

    def branch(self, name):
        try:
            return self.branches[name]
        except KeyError:
            raise DomainError(f"unknown branch {name!r}; expected one of {sorted(self.branches)}") from None

    @classmethod
    def rb_default(cls, defects=None):
        defects = defects or default_defects()
        return _build_channel(defects)


def channel_defect(defects, s_initial=S_INITIAL, s_final=S_FINAL, d_initial=D_INITIAL, d_final=D_FINAL):
    """Zero-field pair energy defect in MHz, [E(s') - E(s)] - [E(d) - E(d')]."""
    e = lambda st: energy_level(st, defects)  # noqa: E731
    return ((e(s_final) - e(s_initial)) - (e(d_initial) - e(d_final))) * 1e3


def flip_flop_product(a_from, a_to, b_from, b_to, defects):
    """dM = 0 part of <a_to b_to| V R^3 |a_from b_from> divided by (1 - 3cos^2 theta)."""
    total = 0.0
    for q, w in ((0, 1.0), (1, 0.5), (-1, 0.5)):
        ma = dipole_moment(a_to, a_from, q, defects)
        if ma == 0.0:
            continue
        total += w * ma * dipole_moment(b_to, b_from, -q, defects)
    return total


@lru_cache(maxsize=8)
def _build_channel(defects):
    branches = {}
    for name, mj in BRANCH_MJ.items():
        s_i = S_INITIAL
        s_f = S_FINAL.with_mj(mj)
        d_i = D_INITIAL
        # dM = 0 overall: the d atom absorbs the opposite mj change
        d_f = D_FINAL.with_mj(d_i.mj - (s_f.mj - s_i.mj))
        q_s = int(round(s_f.mj - s_i.mj))
        mu_s = dipole_moment(s_f, s_i, q_s, defects)
        mu_d = dipole_moment(d_f, d_i, -q_s, defects)
        branches[name] = BranchCoupling(
            transfer=flip_flop_product(s_i, s_f, d_i, d_f, defects),
            exchange_s=flip_flop_product(s_f, s_i, s_i, s_f, defects),
            exchange_d=flip_flop_product(d_f, d_i, d_i, d_f, defects),
            mu_d=mu_d,
            mu_s=mu_s,
            s_final=s_f,
            d_final=d_f,
        )
    return CouplingChannel(zero_field_defect=channel_defect(defects), branches=branches)


@dataclass(frozen=True)
class StarkModel:
    """Maps the applied field to the channel detuning for each branch.

    empirical: Delta = slope * (F - F_branch).
    perturbative: Delta = Delta0 + (sum alpha_initial - sum alpha_final) F^2 / 2.
    """

    mode: str = "empirical"
    resonance_fields: tuple = (0.38, 0.41)  # V/cm, F1 < F2
    slope: float = 127.0  # MHz per V/cm
    zero_field_defect: float = 0.0  # MHz
    alpha_initial: float = 0.0  # MHz/(V/cm)^2, summed over the two initial states
    alpha_final: tuple = (0.0, 0.0)  # per branch, summed over the two final states
    polarizabilities: tuple = ()  # ((label, |mj|, alpha), ...) for reporting

    def __post_init__(self):
        if self.mode not in ("empirical", "perturbative"):
            raise ConfigError(f"unknown Stark model mode {self.mode!r}")
        if self.mode == "empirical":
            f1, f2 = self.resonance_fields
            if not f1 < f2:
                raise ConfigError("empirical Stark model needs F1 < F2")
            if self.slope <= 0:
                raise ConfigError("empirical Stark slope must be positive")

    @classmethod
    def perturbative(cls, defects=None, window=5, step=0.01):
        defects = defects or default_defects()
        a = {}
        for st, mj in ((S_INITIAL, 0.5), (D_INITIAL, 0.5), (D_FINAL, 0.5), (S_FINAL, 0.5), (S_FINAL, 1.5)):
            a[(st.label, mj)] = polarizability(st, mj, defects, window, step=step)
        alpha_i = a[(S_INITIAL.label, 0.5)] + a[(D_INITIAL.label, 0.5)]
        alpha_f = tuple(a[(D_FINAL.label, 0.5)] + a[(S_FINAL.label, mj)] for mj in (0.5, 1.5))
        return cls(
            mode="perturbative",
            zero_field_defect=channel_defect(defects),
            alpha_initial=alpha_i,
            alpha_final=alpha_f,
            polarizabilities=tuple((k[0], k[1], v) for k, v in a.items()),
        )


def _branch_index(branch):
    if branch not in BRANCH_MJ:
        raise DomainError(f"unknown branch {branch!r}; expected 'F1' or 'F2'")
    return 0 if branch == "F1" else 1


def detuning(F, stark, branch="F1"):
    """Pair detuning E_final - E_initial in MHz at field F (V/cm)."""
    i = _branch_index(branch)
    F = np.asarray(F, dtype=float)
    if np.any(F < 0):
        raise DomainError("field must be non-negative")
    if stark.mode == "empirical":
        out = stark.slope * (F - stark.resonance_fields[i])
    else:
        out = stark.zero_field_defect + 0.5 * (stark.alpha_initial - stark.alpha_final[i]) * F**2
    return float(out) if out.ndim == 0 else out


def resonance_field(stark, branch="F1", f_max=2.0, tol=1e-4):
    """Smallest positive field (V/cm) where the branch detuning vanishes."""
    i = _branch_index(branch)
    if stark.mode == "empirical":
        return stark.resonance_fields[i]
    f = lambda F: detuning(F, stark, branch)  # noqa: E731
    grid = np.linspace(0.0, f_max, 2001)
    vals = f(grid)
    sign_change = np.nonzero(np.sign(vals[1:]) != np.sign(vals[:-1]))[0]
    if sign_change.size == 0:
        raise ModelError(f"no resonance for branch {branch} in [0, {f_max}] V/cm")
    lo, hi = grid[sign_change[0]], grid[sign_change[0] + 1]
    flo = f(lo)
    # tighter than tol so detuning(root) is ~1e-3 MHz or better
    while hi - lo > min(tol, 1e-10):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)
