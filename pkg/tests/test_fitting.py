import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import curve_fit

from rydfret.errors import DomainError
from rydfret.fitting import lorentzian, lorentzian_fit, powerlaw_fit

X = np.arange(0.34, 0.45 + 1e-9, 0.001)


def test_exact_lorentzian_recovered():
    y = lorentzian(X, 0.381, 0.006, 0.12, 0.01)
    f = lorentzian_fit(X, y)
    assert f.reliable
    for k, v in dict(center=0.381, fwhm=0.006, amplitude=0.12, offset=0.01).items():
        assert f[k] == pytest.approx(v, abs=1e-6)


def test_noisy_lorentzian_matches_curve_fit():
    rng = np.random.default_rng(4)
    sig = np.full(X.size, 0.004)
    y = lorentzian(X, 0.41, 0.005, 0.08, 0.02) + rng.normal(0, 0.004, X.size)
    f = lorentzian_fit(X, y, sigma=sig)
    p, cov = curve_fit(lorentzian, X, y, p0=[0.41, 0.004, 0.07, 0.02], sigma=sig, absolute_sigma=True)
    for k, (ref, e) in enumerate(zip(p, np.sqrt(np.diag(cov)))):
        name = ("center", "fwhm", "amplitude", "offset")[k]
        assert f[name] == pytest.approx(ref, rel=1e-5, abs=1e-9)
        assert f.stderr[name] == pytest.approx(e, rel=1e-3)


def test_window_selects_peak():
    y = lorentzian(X, 0.38, 0.004, 0.1, 0.0) + lorentzian(X, 0.41, 0.004, 0.1, 0.0)
    f = lorentzian_fit(X, y, window=(0.395, 0.425))
    assert f["center"] == pytest.approx(0.41, abs=2e-4)


def test_flat_data_degenerate():
    f = lorentzian_fit(X, np.full(X.size, 0.05))
    assert f.degenerate and not f.reliable
    assert "flat data" in f.notes


def test_pure_noise_rarely_reliable():
    sig = np.full(X.size, 1e-3)
    hits = sum(lorentzian_fit(X, np.random.default_rng(s).normal(0, 1e-3, X.size), sigma=sig).reliable
               for s in range(20))
    assert hits <= 1


def test_too_few_points():
    with pytest.raises(DomainError):
        lorentzian_fit(X[:5], X[:5])


def test_powerlaw_exact():
    x = np.array([20.0, 30.0, 40.0, 50.0, 70.0])
    f = powerlaw_fit(x, 3.2 * x**-2.7)
    assert f["exponent"] == pytest.approx(-2.7, abs=1e-9)
    assert f["prefactor"] == pytest.approx(3.2, rel=1e-9)


def test_powerlaw_noisy():
    rng = np.random.default_rng(1)
    x = np.linspace(20, 80, 12)
    y = x**-5.0 * (1 + rng.normal(0, 0.05, x.size))
    f = powerlaw_fit(x, y)
    assert f["exponent"] == pytest.approx(-5.0, abs=0.1)
    assert 0 < f.stderr["exponent"] < 0.1


@pytest.mark.parametrize("x,y", [([1.0], [1.0]), ([1.0, 2.0], [1.0, 0.0]), ([-1.0, 2.0], [1.0, 1.0]),
                                 ([2.0, 2.0], [1.0, 3.0])])
def test_powerlaw_domain_errors(x, y):
    with pytest.raises(DomainError):
        powerlaw_fit(x, y)


def test_powerlaw_window():
    x = np.array([5.0, 20.0, 40.0, 80.0])
    y = np.array([1.0, 20.0**-3, 40.0**-3, 80.0**-3])
    assert powerlaw_fit(x, y, window=(10, 100))["exponent"] == pytest.approx(-3.0, abs=1e-12)


def test_refit_round_trip():
    y = lorentzian(X, 0.39, 0.007, 0.2, 0.0)
    f = lorentzian_fit(X, y)
    g = lorentzian_fit(X, lorentzian(X, *(f[k] for k in ("center", "fwhm", "amplitude", "offset"))))
    for k in f.params:
        assert g[k] == pytest.approx(f[k], rel=0.01, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.36, 0.43), st.floats(0.003, 0.02), st.floats(0.01, 1.0), st.floats(0.0, 0.1))
def test_lorentzian_recovery_property(c, g, a, o):
    f = lorentzian_fit(X, lorentzian(X, c, g, a, o))
    assert f["center"] == pytest.approx(c, abs=1e-5)
    assert f["fwhm"] == pytest.approx(g, rel=1e-3)
