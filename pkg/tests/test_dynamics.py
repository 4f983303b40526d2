import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydfret.dynamics import beat_period, eigensystem, evolve, evolve_oracle, two_level_analytic
from rydfret.errors import NumericalError
from rydfret.hamiltonian import AtomSite, assemble_hamiltonian


def pair(R=40.0, detuning=0.0):
    return assemble_hamiltonian([AtomSite((R, 0, 0), "s"), AtomSite((0, 0, 0), "d")], detuning=detuning)


def cluster(seed, n_s=3, n_d=3):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(0, 30, (n_s + n_d, 3))
    return assemble_hamiltonian([AtomSite(p, r) for p, r in zip(pos, "s" * n_s + "d" * n_d)],
                                noise=rng.normal(0, 0.2, n_s + n_d), detuning=0.1)


@pytest.mark.parametrize("delta", [0.0, 0.02, -0.1])
def test_two_level_matches_analytic(delta):
    p = pair(detuning=delta)
    V = p.H[0, 1]
    t = np.linspace(0, 40, 161)
    res = evolve(p, t)
    assert np.allclose(res.p_fraction, two_level_analytic(V, delta, t), atol=1e-12)


def test_beat_period_matches_evolution():
    p = pair()
    T = beat_period(p.H[0, 1])
    res = evolve(p, [T / 2, T])
    assert res.p_fraction[0] == pytest.approx(1.0, abs=1e-12)
    assert res.p_fraction[1] == pytest.approx(0.0, abs=1e-12)


def test_analytic_zero_coupling():
    assert two_level_analytic(0.0, 0.0, 3.0) == 0.0
    assert np.all(two_level_analytic(0.0, 0.0, np.ones(3)) == 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_unitarity(seed):
    res = evolve(cluster(seed), np.linspace(0, 50, 11))
    assert np.allclose(res.norms, 1.0, atol=1e-12)
    assert np.all((res.p_fraction >= 0) & (res.p_fraction <= 1))


def test_time_reversal():
    p = cluster(7)
    fwd = evolve(p, [12.0]).amplitudes[0]
    back = dataclasses.replace(p, H=-p.H)
    psi = evolve(back, [12.0], initial=fwd).amplitudes[0]
    start = np.zeros(p.dim)
    start[p.initial_index] = 1
    assert np.abs(psi - start).max() < 1e-9


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_oracle_agrees(seed):
    p = cluster(seed, 2, 3)
    t = np.linspace(0, 10, 6)
    a = evolve(p, t).populations
    b = evolve_oracle(p, t).populations
    assert np.abs(a - b).max() < 1e-7


def test_oracle_drift_detected():
    p = cluster(0, 2, 2)
    with pytest.raises(NumericalError):
        evolve_oracle(p, [0.0, 30.0], safety=3.0, budget=1e9)


def test_oracle_rejects_unsorted_times():
    with pytest.raises(ValueError):
        evolve_oracle(pair(), [1.0, 0.5])


def test_zero_hamiltonian():
    p = dataclasses.replace(pair(), H=np.zeros((2, 2)))
    assert np.all(evolve(p, [0, 5]).p_fraction == 0)
    assert np.all(evolve_oracle(p, [0, 5]).p_fraction == 0)


def test_short_time_quadratic_and_distance_scaling():
    t = np.array([1e-4, 2e-4])
    p = evolve(pair(), t).p_fraction
    assert np.log(p[1] / p[0]) / np.log(2) == pytest.approx(2.0, abs=0.01)
    # early-time transfer scales as V^2 ~ R^-6
    Rs = np.array([30.0, 60.0])
    q = [evolve(pair(R), [1e-3]).p_fraction[0] for R in Rs]
    assert np.log(q[1] / q[0]) / np.log(2) == pytest.approx(-6.0, abs=0.01)


def test_wrong_initial_dimension():
    with pytest.raises(ValueError):
        evolve(pair(), [1.0], initial=np.ones(3))


def test_eigensystem_failure_wrapped():
    with pytest.raises(NumericalError):
        eigensystem(np.full((2, 2), np.nan))
