import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from rydfret import units
from rydfret.atomic import (
    D_FINAL,
    D_INITIAL,
    S_FINAL,
    S_INITIAL,
    CouplingChannel,
    QuantumDefectTable,
    RydbergState,
    StarkModel,
    channel_defect,
    default_defects,
    detuning,
    dipole_moment,
    effective_n,
    energy_level,
    polarizability,
    radial_matrix_element,
    radial_wavefunction,
    reduced_dipole,
    resonance_field,
)
from rydfret.errors import ConfigError, DomainError, ModelError

H = QuantumDefectTable.hydrogenic()
RB = default_defects()


# ------------------------------------------------------------------ states


@pytest.mark.parametrize("args", [(0, 0, 0.5), (3, 3, 2.5), (5, 1, 2.5), (5, 1, 1.5, 2.5), (5, 1, 1.0)])
def test_invalid_states(args):
    with pytest.raises(DomainError):
        RydbergState(*args)


def test_state_label():
    assert S_INITIAL.label == "49s1/2"
    assert D_INITIAL.label == "41d3/2"
    assert S_FINAL.with_mj(-1.5).mj == -1.5


# ------------------------------------------------------------ defect table


def test_packaged_table_rows():
    assert RB.coefficients(0, 0.5) == (3.1311804, 0.1784)
    assert RB.coefficients(2, 1.5)[0] == pytest.approx(1.34809171)
    with pytest.raises(ConfigError):
        RB.coefficients(7, 6.5)


@pytest.mark.parametrize(
    "text",
    [
        "0 1 3.13 0.17\n",  # no Rydberg constant
        "rydberg_constant_cm = 1\n0 1 3.13\n",  # short row
        "rydberg_constant_cm = 1\n0 3 3.13 0.1\n",  # j inconsistent with L
        "rydberg_constant_cm = 1\n0 1 x 0.1\n",  # not a number
        "rydberg_constant_cm = 1\nfoo = 2\n",  # unknown key
        "rydberg_constant_cm = 1\n0 1 3 0\n0 1 3 0\n",  # duplicate
    ],
)
def test_table_parse_errors(text):
    with pytest.raises(ConfigError):
        QuantumDefectTable.parse(text)


def test_table_parse_comments(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("# header\nrydberg_constant_cm = 100.0\n1 3 2.5 0.1  # note\n")
    t = QuantumDefectTable.from_file(p)
    assert t.coefficients(1, 1.5) == (2.5, 0.1)


# ------------------------------------------------------------------ energies


def test_hydrogen_energies_exact():
    ry = H.rydberg_ghz
    for n in (1, 2, 10, 49):
        assert energy_level(RydbergState(n, 0, 0.5), H) == -ry / n**2


def test_rydberg_ritz_by_hand():
    ry = 109736.605 * 2.99792458e10 * 1e-9
    n0 = 49 - 3.1311804
    nstar = n0 - 0.1784 / n0**2
    assert energy_level(S_INITIAL, RB) == pytest.approx(-ry / nstar**2, rel=1e-14)
    assert effective_n(S_INITIAL, RB) == pytest.approx(nstar, rel=1e-15)


def test_channel_frequencies():
    # transition frequencies (GHz) and zero-field defect (MHz), frozen from the table
    e = lambda s: energy_level(s, RB)  # noqa: E731
    assert e(S_FINAL) - e(S_INITIAL) == pytest.approx(32.844, abs=1e-3)
    assert e(D_INITIAL) - e(D_FINAL) == pytest.approx(32.819, abs=1e-3)
    assert channel_defect(RB) == pytest.approx(25.1517, abs=1e-3)


# -------------------------------------------------------------- wavefunctions


@pytest.mark.parametrize("n,L", [(1, 0), (2, 1), (5, 0), (5, 2), (8, 7), (20, 3)])
def test_hydrogen_wavefunction_shape(n, L):
    w = radial_wavefunction(RydbergState(n, L, L + 0.5), H)
    assert w.norm() == pytest.approx(1.0, abs=1e-10)
    assert w.node_count() == n - L - 1
    assert abs(w.values[0]) < 1e-6 * np.abs(w.values).max()
    assert not w.values.flags.writeable


def test_rb_wavefunction_norm_and_grid():
    w = radial_wavefunction(S_INITIAL, RB)
    assert w.norm() == pytest.approx(1.0, abs=1e-10)
    assert w.grid[-1] >= 2 * 49 * (49 + 15) - 1
    assert np.all(np.diff(w.x) > 0)


def test_hydrogen_radial_elements_closed_form():
    # <n l | r | n l-1> = 3/2 n sqrt(n^2 - l^2)
    for n, l in ((2, 1), (10, 1), (30, 1), (30, 5)):
        a = RydbergState(n, l, l + 0.5)
        b = RydbergState(n, l - 1, abs(l - 1) + 0.5)
        assert radial_matrix_element(a, b, H) == pytest.approx(1.5 * n * math.sqrt(n * n - l * l), rel=2e-5)
    assert radial_matrix_element(RydbergState(1, 0, 0.5), RydbergState(2, 1, 0.5), H) == pytest.approx(
        1.29026620, rel=1e-6
    )


def test_radial_element_needs_delta_l_one():
    with pytest.raises(DomainError):
        radial_matrix_element(S_INITIAL, RydbergState(48, 0, 0.5), RB)


def _oracle_radial(a, b, defects):
    """Independent reference: adaptive RK in r, same outer boundary, trapezoid quadrature."""

    def solve(st):
        ns = effective_n(st, defects)
        E = -0.5 / ns**2
        L = st.L
        r_out = 2 * st.n * (st.n + 15)
        r_in = (1 - math.sqrt(max(1 + 2 * E * L * (L + 1), 0.0))) / (-2 * E) if L else 1e-3
        rhs = lambda r, y: [y[1], (L * (L + 1) / r**2 - 2 / r - 2 * E) * y[0]]  # noqa: E731
        k = math.sqrt(-2 * E)
        sol = solve_ivp(rhs, (r_out, r_in), [1e-20, -k * 1e-20], method="DOP853", rtol=1e-11, atol=1e-40,
                        dense_output=True)
        r = np.linspace(r_in, r_out, 200001)
        return sol, r_in, r_out, np.trapezoid(sol.sol(r)[0] ** 2, r)

    sa, ia, oa, na = solve(a)
    sb, ib, ob, nb = solve(b)
    r = np.linspace(max(ia, ib), min(oa, ob), 200001)
    return abs(np.trapezoid(sa.sol(r)[0] * sb.sol(r)[0] * r, r)) / math.sqrt(na * nb)


@pytest.mark.parametrize("a,b,frozen", [(S_INITIAL, S_FINAL, 2405.892), (D_INITIAL, D_FINAL, 2118.748)])
def test_rb_radial_elements_against_oracle(a, b, frozen):
    ours = radial_matrix_element(a, b, RB)
    assert ours == pytest.approx(_oracle_radial(a, b, RB), rel=1e-5)
    assert ours == pytest.approx(frozen, abs=2e-3)


# ------------------------------------------------------------------- dipoles


def test_dipole_selection_rules():
    assert dipole_moment(S_FINAL.with_mj(1.5), S_INITIAL, 0, RB) == 0.0
    assert dipole_moment(S_FINAL.with_mj(1.5), S_INITIAL, 1, RB) != 0.0
    assert dipole_moment(S_INITIAL, RydbergState(47, 0, 0.5), 0, RB) == 0.0
    with pytest.raises(DomainError):
        dipole_moment(S_FINAL, S_INITIAL, 2, RB)


@pytest.mark.parametrize("a,b", [(S_FINAL, S_INITIAL), (D_FINAL, D_INITIAL), (RydbergState(48, 3, 2.5), D_INITIAL)])
def test_wigner_eckart_sum_rule(a, b):
    # sum over q and m_b of |<a m_a| d_q |b m_b>|^2 = |<a||d||b>|^2 / (2 j_a + 1)
    red = reduced_dipole(a, b, RB)
    total = 0.0
    for q in (-1, 0, 1):
        mb = a.mj - q
        if abs(mb) <= b.j:
            total += dipole_moment(a, b.with_mj(mb), q, RB) ** 2
    assert total == pytest.approx(red**2 / (2 * a.j + 1), rel=1e-12)


def test_channel_dipoles_frozen():
    ch = CouplingChannel.rb_default()
    assert abs(ch.mu2) == pytest.approx(1134.1, abs=0.2)
    assert abs(ch.mu1) == pytest.approx(998.8, abs=0.2)
    f1, f2 = ch.branch("F1"), ch.branch("F2")
    assert f1.transfer == pytest.approx(f1.mu_s * f1.mu_d, rel=1e-12)
    assert f1.transfer == pytest.approx(1.1328e6, rel=1e-3)
    assert f2.transfer == pytest.approx(-4.905e5, rel=1e-3)
    with pytest.raises(DomainError):
        ch.branch("F3")


def test_reduced_elements_frozen():
    assert abs(reduced_dipole(S_FINAL, S_INITIAL, RB)) == pytest.approx(2778, abs=1)
    assert abs(reduced_dipole(D_FINAL, D_INITIAL, RB)) == pytest.approx(2447, abs=1)


# ------------------------------------------------------------ polarizability


@pytest.mark.parametrize(
    "state,mj,frozen",
    [(S_INITIAL, 0.5, 43.8), (D_INITIAL, 0.5, 1.005), (D_FINAL, 0.5, 82.5), (S_FINAL, 0.5, 309.4),
     (S_FINAL, 1.5, 259.4)],
)
def test_polarizabilities_frozen(state, mj, frozen):
    assert polarizability(state, mj, RB) == pytest.approx(frozen, rel=2e-3)


def test_polarizability_window_converged():
    a5 = polarizability(S_INITIAL, 0.5, RB, window=5)
    a7 = polarizability(S_INITIAL, 0.5, RB, window=7)
    assert a7 == pytest.approx(a5, rel=0.02)


def test_polarizability_errors():
    with pytest.raises(DomainError):
        polarizability(S_INITIAL, 0.5, RB, window=3)
    with pytest.raises(ModelError):
        polarizability(S_INITIAL, 0.5, RB, min_gap_mhz=1e6)


def test_polarizability_au_conversion():
    # 1 atomic unit of polarizability in MHz/(V/cm)^2
    assert units.POLARIZABILITY_MHZ == pytest.approx(2.48832e-10, rel=1e-5)


# ------------------------------------------------------------------- Stark


def test_empirical_detuning():
    st = StarkModel()
    assert detuning(0.38, st, "F1") == 0.0
    assert detuning(0.39, st, "F1") == pytest.approx(1.27)
    assert detuning(0.41, st, "F2") == 0.0
    assert resonance_field(st, "F2") == 0.41
    with pytest.raises(DomainError):
        detuning(-0.1, st)


def test_stark_model_validation():
    with pytest.raises(ConfigError):
        StarkModel(mode="linear")
    with pytest.raises(ConfigError):
        StarkModel(resonance_fields=(0.41, 0.38))
    with pytest.raises(ConfigError):
        StarkModel(slope=-1.0)


def test_perturbative_roots():
    st = StarkModel.perturbative()
    f1, f2 = resonance_field(st, "F1"), resonance_field(st, "F2")
    assert f1 == pytest.approx(0.38069, abs=2e-4)
    assert f2 == pytest.approx(0.41145, abs=2e-4)
    assert abs(detuning(f1, st, "F1")) < 1e-6
    assert st.zero_field_defect == pytest.approx(25.1517, abs=1e-3)


def test_no_root_raises():
    st = StarkModel(mode="perturbative", zero_field_defect=1e4, alpha_initial=1.0, alpha_final=(0.0, 0.0))
    with pytest.raises(ModelError):
        resonance_field(st, "F1")
