import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraccurv.errors import DomainError, InvalidParameterError, MLOverflowError
from fraccurv.mittag_leffler import (
    MLParams,
    gamma_fn,
    h_function,
    log_gamma,
    ml_term,
    ml_truncated,
    pochhammer,
)

from oracles import exp_series, ml_naive

positive = st.floats(0.25, 4.0)
ml_params = st.builds(
    MLParams, positive, positive, positive, positive, positive, positive, st.integers(0, 30)
)


def test_gamma_trivial_values():
    assert gamma_fn(1) == 1.0
    assert gamma_fn(5) == 24.0


def test_gamma_half_is_sqrt_pi():
    expected = float(mpmath.gamma(mpmath.mpf("0.5")))
    assert math.isclose(gamma_fn(0.5), expected, rel_tol=1e-13)
    assert math.isclose(gamma_fn(0.5), math.sqrt(math.pi), rel_tol=1e-13)


@given(st.floats(1e-6, 169.9))
def test_gamma_matches_high_precision(x):
    with mpmath.workdps(30):
        ref = float(mpmath.gamma(x))
    assert math.isclose(gamma_fn(x), ref, rel_tol=1e-13)


@pytest.mark.parametrize("bad", [0.0, -1.0, -0.5, math.nan, math.inf, 172.0])
def test_gamma_domain_errors(bad):
    with pytest.raises(DomainError):
        gamma_fn(bad)


def test_log_gamma_large_argument():
    assert math.isclose(log_gamma(500.0), float(mpmath.loggamma(500)), rel_tol=1e-14)


def test_pochhammer_examples():
    assert pochhammer(3.7, 0.4, 0) == 1.0
    assert pochhammer(2, 1, 1) == 2.0
    assert math.isclose(pochhammer(0.5, 0.5, 2), 0.5, rel_tol=1e-15)


def test_pochhammer_large_arguments_use_log_space():
    # the two gammas overflow separately, the ratio does not
    value = pochhammer(170.0, 1.0, 5)
    ref = float(mpmath.rf(170, 5))
    assert math.isclose(value, ref, rel_tol=1e-11)


@given(positive, positive, st.integers(0, 40))
def test_pochhammer_successive_ratio(rho, q, k):
    ratio = pochhammer(rho, q, k + 1) / pochhammer(rho, q, k)
    expected = float(mpmath.gamma(mpmath.mpf(rho) + q * (k + 1)) / mpmath.gamma(mpmath.mpf(rho) + q * k))
    assert math.isclose(ratio, expected, rel_tol=1e-10)


@pytest.mark.parametrize("args", [(0, 1, 1), (1, -1, 1), (1, 1, -1), (1, 1, 0.5)])
def test_pochhammer_domain_errors(args):
    with pytest.raises(DomainError):
        pochhammer(*args)


@pytest.mark.parametrize("field", ["gamma", "beta", "rho", "delta", "p", "q"])
def test_params_reject_non_positive(field):
    kwargs = dict(gamma=1, beta=1, rho=1, delta=1, p=1, q=1)
    kwargs[field] = 0
    with pytest.raises(InvalidParameterError, match=field):
        MLParams(**kwargs)


def test_params_reject_bad_trunc():
    with pytest.raises(InvalidParameterError):
        MLParams(1, 1, 1, 1, 1, 1, trunc=-1)
    with pytest.raises(InvalidParameterError):
        MLParams(1, 1, 1, 1, 1, 1, trunc=1.5)


@pytest.mark.parametrize("z", [-3.0, 0.0, 2.5])
def test_trunc_zero_is_reciprocal_gamma_beta(z):
    params = MLParams(1.3, 2.7, 0.8, 1.1, 0.6, 1.9, trunc=0)
    assert math.isclose(ml_truncated(params, z), 1.0 / math.gamma(2.7), rel_tol=1e-15)


def test_ones_reduce_to_exponential():
    params = MLParams.ones(trunc=20)
    assert math.isclose(ml_truncated(params, 1.0), exp_series(1, 20), rel_tol=1e-15)
    assert math.isclose(ml_truncated(params, 1.0), 2.71828182845, rel_tol=1e-11)
    assert ml_truncated(params, 0.0) == 1.0


def test_h_function_examples():
    assert math.isclose(h_function(MLParams.ones(20), 1.0), exp_series(1, 20), rel_tol=1e-15)
    assert math.isclose(h_function(MLParams(0.3, 2.0, 1.5, 0.7, 2.2, 0.9, trunc=0), 5.0), 1.0, rel_tol=1e-15)


@settings(max_examples=300)
@given(ml_params, st.floats(-10.0, 10.0))
def test_ml_truncated_matches_naive_oracle(params, z):
    ref, size = ml_naive(params.gamma, params.beta, params.rho, params.delta, params.p, params.q, params.trunc, z)
    assert abs(ml_truncated(params, z) - ref) <= 1e-12 * max(abs(ref), size)


@given(ml_params)
def test_h_function_at_zero_is_one(params):
    assert abs(h_function(params, 0.0) - 1.0) <= 1e-14


@given(ml_params, st.floats(1e-3, 10.0))
def test_monotone_in_truncation_for_positive_z(params, z):
    longer = MLParams(params.gamma, params.beta, params.rho, params.delta, params.p, params.q, params.trunc + 1)
    assert ml_truncated(longer, z) >= ml_truncated(params, z)


def test_large_index_terms_use_log_space():
    params = MLParams(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, trunc=200)
    assert ml_term(params, 2.0, 180) > 0
    assert math.isclose(ml_truncated(params, 2.0), math.exp(2.0), rel_tol=1e-14)
    assert ml_term(params, -2.0, 181) < 0


def test_overflow_is_reported():
    params = MLParams(0.25, 0.25, 4.0, 0.25, 0.25, 4.0, trunc=60)
    with pytest.raises(MLOverflowError):
        ml_truncated(params, 1e10)


@pytest.mark.parametrize("z", [math.nan, math.inf, "1"])
def test_ml_rejects_non_finite_argument(z):
    with pytest.raises(DomainError):
        ml_truncated(MLParams.ones(), z)
