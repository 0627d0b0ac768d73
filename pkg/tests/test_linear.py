import math

import pytest
from hypothesis import given, strategies as st

from dcf_analyzer import NetworkConfig, derive_slot_durations, linear
from dcf_analyzer.markov import DegenerateInputError


def golden_max(f, lo, hi, tol=1e-14):
    inv = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - inv * (b - a), a + inv * (b - a)
    while b - a > tol:
        if f(c) > f(d):
            b, d = d, c
            c = b - inv * (b - a)
        else:
            a, c = c, d
            d = a + inv * (b - a)
    return 0.5 * (a + b)


@pytest.fixture
def d():
    return derive_slot_durations(NetworkConfig())


@pytest.mark.parametrize("N", [2, 4, 10, 20, 50])
def test_tau_m_near_true_optimum(N, d):
    best = golden_max(lambda t: linear.contention_efficiency(t, N, d), 1e-9, 0.999)
    assert linear.tau_m_exact(N, d) == pytest.approx(best, rel=1e-5)
    # second-order closed form: close to the optimum, and nearly as efficient
    assert linear.tau_m(N, d) == pytest.approx(best, rel=0.05)
    ratio = linear.contention_efficiency(linear.tau_m(N, d), N, d) / linear.contention_efficiency(best, N, d)
    assert ratio > 0.999


@pytest.mark.parametrize("N,want", [(4, 26.7910448036473), (10, 10.658076449576525), (20, 5.31990701887836)])
def test_lambda_c_error_free(N, want, d):
    assert linear.lambda_c(N, d, 0.0) == pytest.approx(want, rel=1e-12)


@given(N=st.integers(2, 60), p_e=st.floats(0, 0.95), payload=st.integers(64, 2304))
def test_peak_sits_on_the_line(N, p_e, payload):
    d = derive_slot_durations(NetworkConfig(payload=payload))
    lc = linear.lambda_c(N, d, p_e)
    assert linear.s_max(N, d, p_e) == pytest.approx(linear.linear_throughput(N, d.E_PL_time, lc), rel=1e-12)


def test_model_object(cfg):
    lm = linear.linear_model(cfg, p_e=0.0)
    assert lm(lm.lambda_c) == pytest.approx(lm.s_m, rel=1e-12)
    assert lm.slope == pytest.approx(10 * 8192 / 1e6)


def test_degenerate_cases(d):
    with pytest.raises(DegenerateInputError):
        linear.tau_m(1, d)
    flat = derive_slot_durations(NetworkConfig(slot_sigma=8812.0))
    with pytest.raises(DegenerateInputError):
        linear.tau_m(4, flat)
    assert linear.tau_m_exact(1, d) == 1.0
    # the exported quantities fall back to the numerical optimum
    assert linear.lambda_c(1, d, 0.0) > 0
    with pytest.raises(ValueError):
        linear.lambda_c(4, d, 1.0)
