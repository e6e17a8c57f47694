import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from nfchannel.exceptions import InvalidArgumentError
from nfchannel.special import (
    bessel_i,
    bessel_j,
    bessel_profile,
    gamma,
    scaled_bessel,
    sinc_normalized,
)


def test_bessel_j_basic_values():
    assert bessel_j(0, 0) == 1.0
    assert bessel_j(1, 0) == 0.0
    assert abs(bessel_j(0, 2.404826)) < 1e-6
    assert abs(bessel_j(1, 2.404826)) > 0.1


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, 2.7, 10.0, 35.5, 50.0])
@pytest.mark.parametrize("x", [0.0, 1e-3, 0.7, 5.0, 42.0, 300.0, 1000.0])
def test_bessel_j_against_mpmath(nu, x):
    ref = float(mp.besselj(nu, x))
    assert abs(bessel_j(nu, x) - ref) <= 1e-10


@pytest.mark.parametrize("nu,x", [(0.0, 0.3), (1.5, 2.0), (4.0, 10.0)])
def test_bessel_i_against_mpmath(nu, x):
    ref = float(mp.besseli(nu, x))
    assert bessel_i(nu, x) == pytest.approx(ref, rel=1e-12)


def test_bessel_rejects_negative_argument():
    with pytest.raises(InvalidArgumentError):
        bessel_j(1.0, -1.0)
    with pytest.raises(InvalidArgumentError):
        bessel_j(-0.5, 1.0)


@given(st.floats(0.5, 10.0), st.floats(0.1, 50.0))
def test_bessel_recurrence(nu, x):
    # centred on nu + 1 so every order stays non-negative
    left = bessel_j(nu, x) + bessel_j(nu + 2.0, x)
    right = 2.0 * (nu + 1.0) / x * bessel_j(nu + 1.0, x)
    assert abs(left - right) <= 1e-8


@given(st.floats(1.0, 10.0), st.floats(0.1, 50.0))
def test_bessel_recurrence_direct(nu, x):
    left = bessel_j(nu - 1.0, x) + bessel_j(nu + 1.0, x)
    assert abs(left - 2.0 * nu / x * bessel_j(nu, x)) <= 1e-8


def test_scaled_bessel_limits():
    assert scaled_bessel(1, 0) == pytest.approx(0.5, abs=1e-15)
    assert scaled_bessel(2, 0) == pytest.approx(1.0 / 8.0, abs=1e-15)
    assert abs(scaled_bessel(1, 1e-6) - 0.5) < 1e-10


@given(st.floats(0.05, 20.0))
def test_scaled_bessel_continuous_at_zero(nu):
    limit = 2.0**-nu / float(mp.gamma(nu + 1))
    errs = [abs(scaled_bessel(nu, h) - limit) for h in (1e-1, 1e-2, 1e-3)]
    assert errs[0] >= errs[1] >= errs[2]
    assert errs[2] <= 1e-6 * limit


@given(st.floats(0.05, 30.0), st.floats(1e-3, 80.0))
def test_scaled_bessel_matches_definition(nu, x):
    ref = float(mp.besselj(nu, x) * mp.power(x, -nu))
    assert scaled_bessel(nu, x) == pytest.approx(ref, rel=1e-8, abs=1e-14 * abs(2.0**-nu))


def test_bessel_profile_is_one_at_origin_and_vectorizes():
    x = np.array([0.0, 1.0, 3.0])
    out = bessel_profile(1.0, x)
    assert out.shape == (3,)
    assert out[0] == 1.0
    # nu = 1: 2 J_1(x)/x
    assert out[1] == pytest.approx(2.0 * float(mp.besselj(1, 1.0)), rel=1e-13)


def test_bessel_profile_large_order_is_finite():
    assert 0.0 < bessel_profile(150.0, 40.0) < 1.0


def test_gamma_values():
    assert gamma(1) == 1.0
    assert gamma(0.5) == pytest.approx(np.sqrt(np.pi), rel=1e-15)
    assert gamma(5) == pytest.approx(24.0, rel=1e-15)
    with pytest.raises(InvalidArgumentError):
        gamma(0.0)


@given(st.floats(1e-3, 49.0))
def test_gamma_functional_equation(x):
    assert gamma(x + 1.0) == pytest.approx(x * gamma(x), rel=1e-12)


@pytest.mark.parametrize("x", [0.01, 0.3, 1.0, 7.5, 25.0, 50.0])
def test_gamma_against_mpmath(x):
    assert gamma(x) == pytest.approx(float(mp.gamma(x)), rel=1e-12)


def test_sinc_values():
    assert sinc_normalized(0) == 1.0
    assert abs(sinc_normalized(1)) < 1e-16
    assert sinc_normalized(0.5) == pytest.approx(2.0 / np.pi, rel=1e-15)


@pytest.mark.parametrize("nu", [0.1, 1.0, 30.0, 59.0, 61.0, 88.0, 101.0, 300.0])
@pytest.mark.parametrize("x", [0.0, 1e-6, 0.034, 1.0, 20.0, 60.0, 300.0])
def test_bessel_profile_against_mpmath_all_orders(nu, x):
    ref = float(mp.hyp0f1(nu + 1, -mp.mpf(x) ** 2 / 4))
    assert abs(bessel_profile(nu, x) - ref) <= 1e-12
