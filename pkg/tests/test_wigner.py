import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy import S
from sympy.physics.wigner import wigner_3j as sym3j
from sympy.physics.wigner import wigner_6j as sym6j

from rydfret.wigner import clebsch_gordan, wigner3j, wigner6j

HALF = [Fraction(k, 2) for k in range(0, 9)]


def _s(x):
    return S(int(2 * x)) / 2


@pytest.mark.parametrize("j1,j2,j3", [(0.5, 1, 1.5), (1.5, 1, 0.5), (2, 1, 1), (1.5, 1, 2.5), (3, 2, 1)])
def test_3j_matches_sympy(j1, j2, j3):
    for m1 in [x / 2 for x in range(-int(2 * j1), int(2 * j1) + 1, 2)]:
        for m2 in [x / 2 for x in range(-int(2 * j2), int(2 * j2) + 1, 2)]:
            m3 = -m1 - m2
            if abs(m3) > j3:
                continue
            ref = float(sym3j(_s(j1), _s(j2), _s(j3), _s(m1), _s(m2), _s(m3)))
            assert wigner3j(j1, j2, j3, m1, m2, m3) == pytest.approx(ref, abs=1e-15)


def test_6j_matches_sympy():
    vals = [0.5, 1, 1.5, 2, 2.5]
    for a, b, c in itertools.product(vals, repeat=3):
        for d, e in itertools.product(vals, repeat=2):
            try:
                ref = float(sym6j(_s(a), _s(b), _s(c), _s(d), _s(e), S(1)))
            except ValueError:  # sympy refuses non-integer triad sums; the symbol is zero
                ref = 0.0
            assert wigner6j(a, b, c, d, e, 1) == pytest.approx(ref, abs=1e-15)


def test_selection_rules_give_zero():
    assert wigner3j(1, 1, 3, 0, 0, 0) == 0.0  # triangle
    assert wigner3j(1, 1, 1, 1, 0, 0) == 0.0  # m sum
    assert wigner3j(1, 1, 2, 0, 0, 0) != 0.0
    assert wigner3j(1, 1, 1, 0, 0, 0) == 0.0  # odd J with all m = 0
    assert wigner6j(0.5, 0.5, 3, 1, 1, 1) == 0.0


def test_rejects_non_half_integers():
    with pytest.raises(ValueError):
        wigner3j(0.3, 1, 1, 0, 0, 0)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(HALF), st.sampled_from(HALF))
def test_3j_orthogonality(j1, j2):
    # sum over all m of (j1 j2 j3; m1 m2 m3)^2 = 1
    j3 = abs(j1 - j2)
    total = 0.0
    for k1 in range(int(2 * j1) + 1):
        m1 = -j1 + k1
        for k2 in range(int(2 * j2) + 1):
            m2 = -j2 + k2
            if abs(m1 + m2) <= j3:
                total += wigner3j(j1, j2, j3, m1, m2, -m1 - m2) ** 2
    assert total == pytest.approx(1.0, rel=1e-13)


def test_clebsch_gordan_spin_half():
    # |1 0> = (|up down> + |down up>)/sqrt 2
    assert clebsch_gordan(0.5, 0.5, 0.5, -0.5, 1, 0) == pytest.approx(2**-0.5)
    assert clebsch_gordan(0.5, 0.5, 0.5, -0.5, 0, 0) == pytest.approx(2**-0.5)
