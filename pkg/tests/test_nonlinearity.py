import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from critwave.nonlinearity import (SaturationError, SeriesPolicy, Variant, check_pointwise_bound,
                                   conformal_nonlinearity, conformal_remainder, eval_f, eval_N,
                                   eval_P, eval_potential_density, exp_tail)

mp.mp.dps = 40

# extended-precision values, frozen
N_AT_001 = 5.0001666708334166681e-11
G_AT_01 = 1.6708416805754216546e-7
P_AT_11 = 0.063436343081909529279
F_AT_2_01_07 = -10.875831296833161384
N_AT_05 = 0.017012708343870742037


def mp_N(u):
    with mp.workdps(120):
        u = mp.mpf(u)
        return u * (mp.exp(u * u) - 1 - u * u)


def mp_G(u):
    with mp.workdps(120):
        u = mp.mpf(u)
        return mp.exp(u * u) - 1 - u * u - u**4 / 2


def test_closed_forms():
    assert eval_N(0.0) == 0.0
    assert eval_N(1.0) == pytest.approx(math.e - 2, rel=1e-15)
    assert eval_potential_density(0.0) == 0.0
    assert eval_potential_density(1.0) == pytest.approx(math.e - 2.5, rel=1e-14)
    assert eval_P(0.0, 0.5) == 0.0
    assert eval_P(1.0, 0.0) == pytest.approx(1 / 24, rel=1e-15)
    assert eval_f(0.0, 0.0, 0.5) == 0.0


def test_oracle_values():
    assert eval_N(0.01) == pytest.approx(N_AT_001, rel=1e-13)
    assert eval_potential_density(0.1) == pytest.approx(G_AT_01, rel=1e-13)
    assert eval_P(1.0, 1.0) == pytest.approx(P_AT_11, rel=1e-12)
    assert eval_f(2.0, 0.1, 0.7) == pytest.approx(F_AT_2_01_07, rel=1e-10)
    assert eval_f(1.0, -1.0, 0.3) <= 0


def test_variants():
    u = np.linspace(-2, 2, 41)
    assert np.all(eval_N(u, Variant.LINEAR) == 0)
    assert np.allclose(eval_N(u, Variant.FULL_EXPONENTIAL), u * np.exp(u * u), rtol=1e-15)
    assert np.allclose(eval_N(u, Variant.MASSIVE_NO_CUBIC), u * (np.exp(u * u) - u * u), rtol=1e-13)
    assert np.allclose(eval_potential_density(u, Variant.FULL_EXPONENTIAL), np.expm1(u * u))
    assert Variant.parse("massive_no_cubic") is Variant.MASSIVE_NO_CUBIC
    assert Variant.parse("FullExponential") is Variant.FULL_EXPONENTIAL
    with pytest.raises(ValueError):
        Variant.parse("quartic")


def test_matches_oracle_on_sweep():
    for u in np.concatenate((np.logspace(-8, math.log10(6), 120), [0.5, 0.4999999, 0.5000001])):
        for x, ref in ((eval_N(u), mp_N(u)), (eval_potential_density(u), mp_G(u))):
            assert abs(x - float(ref)) <= 1e-12 * abs(float(ref))


def test_series_direct_consistency():
    series = SeriesPolicy(switch_threshold=1.0)
    direct = SeriesPolicy(switch_threshold=1e-300)
    u = np.logspace(-8, 0, 200)
    a, b = eval_N(u, policy=series), eval_N(u, policy=direct)
    ok = np.abs(u) >= 1e-2   # below this the direct path is cancellation-limited
    assert np.all(np.abs(a[ok] - b[ok]) <= 1e-10 * np.abs(a[ok]))
    x = np.linspace(-1, 1, 101)
    for m in (1, 2, 3):
        s = exp_tail(x, m, series)
        d = exp_tail(x, m, SeriesPolicy(switch_threshold=1e-300))
        keep = np.abs(x) > 1e-2
        assert np.allclose(s[keep], d[keep], rtol=1e-10)


def test_policy_validation():
    with pytest.raises(ValueError):
        SeriesPolicy(switch_threshold=0.0)
    with pytest.raises(ValueError):
        SeriesPolicy(switch_threshold=1.5)
    with pytest.raises(ValueError):
        SeriesPolicy(taylor_terms=9)
    c = SeriesPolicy().coefficients(2, 0.25)
    assert 5 <= len(c) <= 30 and c[0] == 0.5


def test_saturation():
    with pytest.raises(SaturationError):
        eval_N(27.0)
    with pytest.raises(SaturationError):
        eval_potential_density(np.array([0.0, 30.0]))
    with pytest.raises(ValueError):
        eval_P(1.0, -0.1)
    with pytest.raises(ValueError):
        eval_f(1.0, 1.0, 1.5)


def test_pointwise_bound_examples():
    assert tuple(check_pointwise_bound(0.0)) == (0.0, 0.0, True)
    lhs, rhs, ok = check_pointwise_bound(1.0)
    assert lhs == pytest.approx(math.e - 2) and rhs == pytest.approx(math.e - 1) and ok
    lhs, rhs, ok = check_pointwise_bound(0.5)
    assert lhs == pytest.approx(N_AT_05, rel=1e-14)
    assert rhs == pytest.approx(math.e / 32) and ok


def test_conformal_leading_term():
    U = np.array([0.3, -1.2, 2.0])
    assert np.allclose(conformal_nonlinearity(U, 0.0), U**5 / 2, rtol=4e-16, atol=0)
    assert np.all(np.asarray(conformal_nonlinearity(U, 0.0)) == U * (U * U) ** 2 * 0.5)


def test_remainder_variants():
    U, Om = 0.7, 0.4
    P = eval_P(U, Om)
    assert conformal_remainder(U, Om, Variant.MASSLESS) == P
    assert conformal_remainder(U, Om, Variant.MASSIVE_NO_CUBIC) == pytest.approx(P - 2 * U * U / Om**3)
    assert conformal_remainder(U, Om, Variant.LINEAR) == 0.0


@given(st.floats(-0.5, 0.5, allow_subnormal=False))
def test_oddness_on_series_path(u):
    assert eval_N(-u) == -eval_N(u)


@given(st.floats(-6, 6), st.floats(0, 1))
def test_evenness(u, om):
    assert eval_potential_density(-u) == eval_potential_density(u)
    assert eval_P(-u, om) == eval_P(u, om)


@given(st.floats(-8, 8), st.floats(0, 1))
def test_P_nonnegative(U, om):
    assert eval_P(U, om) >= 0


@given(st.floats(-6, 6))
def test_pointwise_bound_holds(u):
    assert check_pointwise_bound(u).holds


@given(st.floats(-6, 6))
def test_ordering(u):
    assert abs(eval_N(u)) <= abs(u) ** 3 * math.expm1(u * u) * (1 + 1e-13)


@given(st.floats(-6, 6))
def test_potential_nonnegative(u):
    assert eval_potential_density(u) >= 0


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 1))
def test_f_symmetry(U, V, om):
    assert eval_f(-U, -V, om) == eval_f(U, V, om)


@given(st.floats(0, 3), st.floats(-3, 0), st.floats(0, 1))
def test_f_nonpositive_for_opposite_signs(U, V, om):
    assert eval_f(U, V, om) <= 0
    assert eval_f(V, U, om) <= 0


def test_f_matches_series_oracle(rng):
    def oracle(U, V, O):
        U, V, O = map(mp.mpf, (U, V, O))
        s1 = mp.nsum(lambda k: O ** (k - 3) * (U ** (2 * k) - V ** (2 * k)) / mp.factorial(k), [3, mp.inf])
        s2 = mp.nsum(lambda k: O ** (k - 2) * U ** (2 * k) / mp.factorial(k), [2, mp.inf])
        return float(mp.mpf(1.5) * s1 - mp.mpf(0.5) * U * (U - V) * s2)
    for U, V, O in rng.uniform([-3, -3, 0.01], [3, 3, 1], size=(25, 3)):
        ref = oracle(U, V, O)
        scale = max(abs(U), abs(V)) ** 6 * math.exp(O * max(U * U, V * V))
        assert abs(eval_f(U, V, O) - ref) <= 1e-12 * scale


def test_P_matches_series_oracle(rng):
    for U, O in rng.uniform([-8, 0], [8, 1], size=(40, 2)):
        U, O = mp.mpf(U), mp.mpf(O)
        ref = mp.nsum(lambda k: U**8 * (O * U * U) ** k * (k + 1) / mp.factorial(k + 4), [0, mp.inf])
        assert eval_P(float(U), float(O)) == pytest.approx(float(ref), rel=1e-11)
