import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatcut.polyapprox import (
    PolynomialApprox,
    cheb_interpolate_exp,
    cheb_T,
    degree_lower_bound,
    degree_upper_bound,
    discrete_minimax_exp,
    lower_bound_witness,
    minimal_degree_empirical,
    q_inverse,
    q_star,
)


def test_cheb_T_matches_cosine():
    s = np.linspace(-1, 1, 101)
    for n in (0, 1, 2, 7, 30):
        assert np.allclose(cheb_T(n, s), np.cos(n * np.arccos(s)))


def test_q_inverse_examples():
    q = q_inverse(1.0, 4.0, 0.1)
    assert q.degree == 6 == math.ceil(2 * math.log(20))
    s0 = 5.0 / 3.0
    t = math.cosh(7 * math.acosh(s0))
    assert abs(1.0 * q(np.array([1.0]))[0] - 1.0) == pytest.approx(1 / t, rel=1e-12)
    q = q_inverse(1.0, 100.0, 1e-3)
    x = np.linspace(1, 100, 100_000)
    assert np.max(np.abs(x * q(x) - 1)) <= 1e-3


def test_q_inverse_removable_zero():
    q = q_inverse(0.5, 3.0, 0.05)
    near = q(np.array([1e-7]))[0]
    at = q(np.array([0.0]))[0]
    assert at == pytest.approx(near, rel=1e-5)


@pytest.mark.parametrize("a, b, eps", [(0.0, 1.0, 0.1), (-1.0, 1.0, 0.1), (2.0, 1.0, 0.1), (1.0, 2.0, 1.5)])
def test_q_inverse_errors(a, b, eps):
    with pytest.raises(ValueError):
        q_inverse(a, b, eps)


def test_q_star_examples():
    q = q_star(1.0, 0.0, 3.0, 0.1)
    assert q.degree == 6
    q = q_star(0.1, 0.0, 90.0, 1e-2)
    x = np.linspace(0, 90, 50_001)
    assert np.max(np.abs((1 + 0.1 * x) * q(x) - 1)) <= 1e-2


@pytest.mark.parametrize("t", [1, 2, 5])
def test_q_star_power(t):
    eps = 0.05
    q = q_star(0.5, 0.0, 40.0, eps)
    x = np.linspace(0, 40, 20_001)
    assert np.max(np.abs(((1 + 0.5 * x) * q(x)) ** t - 1)) <= 2 * t * eps


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-2, 10), st.floats(1.01, 1e3), st.floats(1e-6, 0.5))
def test_q_inverse_certificate(a, ratio, eps):
    b = a * ratio
    q = q_inverse(a, b, eps)
    assert q.degree == math.ceil(math.sqrt(b / a) * math.log(2 / eps))
    assert q.measured_error <= eps


def test_degree_upper_bound_examples():
    assert degree_upper_bound(0, 0, math.exp(-1)) == 1
    assert degree_upper_bound(0, 100, 1e-3) == 351
    assert degree_upper_bound(5, 105, 1e-3) == 351


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1e4), st.floats(0, 1e3), st.floats(1e-12, 1), st.floats(0.01, 1))
def test_degree_upper_bound_monotone(w, dw, delta, shrink):
    base = degree_upper_bound(0, w, delta)
    assert degree_upper_bound(0, w + dw, delta) >= base
    assert degree_upper_bound(0, w, delta * shrink) >= base


def test_degree_lower_bound_examples():
    assert degree_lower_bound(0, 16, 1 / 8) == (2, True)
    assert degree_lower_bound(0, 100, 1 / 8) == (5, True)
    assert degree_lower_bound(0, 1, 1 / 8) == (0, False)
    assert degree_lower_bound(0, 100, 0.2) == (0, False)


def test_cheb_interpolate_examples():
    p = cheb_interpolate_exp(2.0, 2.0, 0)
    assert p.measured_error == 0.0
    assert p(np.array([2.0]))[0] == pytest.approx(math.exp(-2))
    p = cheb_interpolate_exp(0, 1, 8)
    assert p.measured_error <= 1e-8
    assert p.grid_size == 10 * 9 + 1000
    errs = [cheb_interpolate_exp(0, 64, d).measured_error for d in range(2, 40, 3)]
    assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))


def test_cheb_interpolate_guards():
    with pytest.raises(OverflowError):
        cheb_interpolate_exp(0, math.inf, 3)
    with pytest.raises(ValueError):
        cheb_interpolate_exp(1, 0, 3)
    # large offsets are handled through the relative scaling
    p = cheb_interpolate_exp(800.0, 816.0, 12)
    assert math.isfinite(p.measured_error)
    assert p.measured_error == pytest.approx(cheb_interpolate_exp(0, 16, 12).measured_error, abs=1e-15)


def test_minimal_degree_examples():
    d = {W: minimal_degree_empirical(0, W, 1e-3) for W in (16, 64, 256)}
    assert 1.7 <= d[64] / d[16] <= 2.6
    assert 1.7 <= d[256] / d[64] <= 2.6
    assert minimal_degree_empirical(0, 16, 1 / 8) >= degree_lower_bound(0, 16, 1 / 8).degree
    assert minimal_degree_empirical(3.5, 67.5, 1e-3) == d[64]
    p = cheb_interpolate_exp(0, 64, d[64])
    assert p.measured_error <= 1e-3


def test_minimal_degree_errors():
    with pytest.raises(ValueError):
        minimal_degree_empirical(0, 1e6, 1e-12, cap=8)
    with pytest.raises(ValueError):
        minimal_degree_empirical(1, 1, 0.1)


@pytest.mark.parametrize("W", [16, 64, 256])
def test_envelope(W):
    d = minimal_degree_empirical(0, W, 1e-3)
    assert d <= degree_upper_bound(0, W, 1e-3)


def test_witness_interpolant_positive():
    p = cheb_interpolate_exp(0, 16, 6)
    assert lower_bound_witness(p, 6) > 0


def test_witness_best_constant():
    c = (1 + math.exp(-1)) / 2
    p = PolynomialApprox((0.0, 1.0), lambda x: c + 0 * x, 0, 0.0, 0, np.array([c]))
    assert lower_bound_witness(p, 0) == pytest.approx((1 - math.exp(-1)) / 2, rel=1e-12)


def test_witness_zero_path():
    p = cheb_interpolate_exp(0, 1, 60)
    assert lower_bound_witness(p, 60) == 0.0


def test_witness_degree_check():
    with pytest.raises(ValueError):
        lower_bound_witness(cheb_interpolate_exp(0, 4, 5), 3)


@pytest.mark.parametrize("W, d", [(16, 3), (64, 6), (64, 12), (256, 10)])
def test_witness_sound(W, d):
    # the certificate never exceeds the error of any degree-d approximant we can build
    interp = cheb_interpolate_exp(0, W, d)
    best = discrete_minimax_exp(0, W, d)
    for p in (interp, best):
        assert lower_bound_witness(p, d) <= interp.measured_error * (1 + 1e-9)
        assert lower_bound_witness(p, d) <= best.measured_error * (1 + 1e-9)
    assert best.measured_error <= interp.measured_error
    assert lower_bound_witness(best, d) == pytest.approx(best.measured_error, rel=1e-6)
