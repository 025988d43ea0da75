import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatcut import generate
from heatcut.expmv import (
    ExpmParams,
    ExpmvError,
    choose_params,
    dense_expmv,
    exprational,
    exprational_factorization,
    expmv_lanczos,
    expmv_taylor,
    lanczos_factorization,
    lanczos_fv,
    lanczos_order,
    taylor_terms,
)
from heatcut.operators import ProjectedExponent, aslinearoperator, projected_inverter, shifted_inverter

from oracles import random_psd

expneg = lambda lam: np.exp(-lam)


def unit(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def exact_inverter(A):
    A = np.asarray(A, dtype=float)
    return lambda y, k, eps1: np.linalg.solve(np.eye(len(A)) + A / k, y)


# ---------------------------------------------------------------- Lanczos


def test_lanczos_order_zero(rng):
    B = random_psd(rng, 6, 4.0)
    v = unit(rng, 6)
    assert np.allclose(lanczos_fv(B, v, 0, expneg), math.exp(-v @ B @ v) * v)


def test_lanczos_eigenvector_breakdown():
    lam = np.array([0.5, 2.0, 3.0, 7.0])
    fac = lanczos_factorization(np.diag(lam), np.eye(4)[2], 3)
    assert fac.effective_order == 0
    assert np.allclose(lanczos_fv(np.diag(lam), np.eye(4)[2], 3, expneg), math.exp(-3.0) * np.eye(4)[2])


def test_lanczos_full_order_exact(rng):
    L = generate("path:n=6").dense_laplacian()
    v = unit(rng, 6)
    assert np.linalg.norm(lanczos_fv(L, v, 5, expneg) - dense_expmv(L, v)) <= 1e-12


@pytest.mark.parametrize("n", [3, 7, 12])
def test_lanczos_exact_small(rng, n):
    B = random_psd(rng, n, 5.0)
    v = unit(rng, n)
    f = lambda lam: np.sqrt(1 + lam)
    assert np.linalg.norm(lanczos_fv(B, v, n - 1, f) - dense_expmv(B, v, f)) <= 1e-11


def test_lanczos_requires_unit_vector(rng):
    with pytest.raises(ValueError):
        lanczos_fv(np.eye(3), np.ones(3), 2, expneg)
    with pytest.raises(ValueError):
        lanczos_fv(np.eye(3), np.eye(3)[0], -1, expneg)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_lanczos_nan_from_f(rng):
    B = random_psd(rng, 5, 3.0)
    with pytest.raises(ExpmvError):
        lanczos_fv(B, unit(rng, 5), 3, lambda lam: np.log(lam - 100.0))


def test_lanczos_factorization_invariants(rng):
    B = random_psd(rng, 60, 20.0)
    fac = lanczos_factorization(B, unit(rng, 60), 12)
    V, T = fac.basis, fac.coeff
    assert np.abs(V.T @ V - np.eye(V.shape[1])).max() <= 1e-10
    assert np.allclose(T, np.triu(np.tril(T, 1), -1))
    assert np.all(np.diag(T, 1) >= 0)
    lam = np.linalg.eigvalsh(B)
    ritz = np.linalg.eigvalsh(T)
    assert ritz.min() >= lam.min() - 1e-10 and ritz.max() <= lam.max() + 1e-10


def test_expmv_lanczos_examples(rng):
    v = unit(rng, 5)
    assert np.allclose(expmv_lanczos(np.zeros((5, 5)), v, 1e-10), v)
    u = expmv_lanczos(np.diag([1.0, 2.0]), np.array([1.0, 1.0]) / math.sqrt(2), 1e-12)
    assert np.allclose(u, np.array([math.exp(-1), math.exp(-2)]) / math.sqrt(2), atol=1e-14)
    A = random_psd(rng, 100, 50.0)
    v = unit(rng, 100)
    assert np.linalg.norm(expmv_lanczos(A, v, 1e-8) - dense_expmv(A, v)) <= 1e-8


def test_expmv_lanczos_monotone_in_k(rng):
    A = random_psd(rng, 120, 200.0)
    v = unit(rng, 120)
    ref = dense_expmv(A, v)
    errs = [np.linalg.norm(expmv_lanczos(A, v, 1e-12, k=k, early_stop=False) - ref)
            for k in range(4, 80, 4)]
    for e1, e2 in zip(errs, errs[1:]):
        assert e2 <= e1 * 1.01 or e2 <= 1e-13


def test_lanczos_order_formula():
    assert lanczos_order(100, 1e-3) == 351
    assert lanczos_order(0, math.exp(-1)) == 1
    assert lanczos_order(100, 1e-3, c0=0.5) == math.ceil(0.5 * math.sqrt(100 * math.log(1e3))
                                                         * math.log(1e3) * math.log(math.log(1e3)))


# ---------------------------------------------------------------- parameters


def test_choose_params_examples():
    assert choose_params(100, 1e-6).k == 32
    assert choose_params(0, 0.5).k == 8
    p = choose_params(0, 1.0)
    assert p.k == 8 and p.eps1 >= 1e-14
    assert p.eps1 <= p.delta


def test_choose_params_floor_recorded():
    p = choose_params(10, 1e-6)
    assert p.eps1 == 1e-14
    assert p.eps1_theory_log10 < -14
    assert p.to_json()["eps1_floored"] is True


def test_expm_params_invariants():
    with pytest.raises(ValueError):
        ExpmParams(k=0, eps1=1e-3, delta=1e-2, eps1_theory_log10=-3)
    with pytest.raises(ValueError):
        ExpmParams(k=3, eps1=1e-1, delta=1e-2, eps1_theory_log10=-1)
    with pytest.raises(ValueError):
        choose_params(-1, 0.1)
    with pytest.raises(ValueError):
        choose_params(1, 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1e4), st.floats(1e-12, 1))
def test_choose_params_shape(a_norm, delta):
    p = choose_params(a_norm, delta)
    assert p.k >= 8
    assert 0 < p.eps1 <= p.delta <= 1


# ---------------------------------------------------------------- ExpRational


def test_exprational_zero_operator(rng):
    v = unit(rng, 7)
    A = np.zeros((7, 7))
    assert np.allclose(exprational(A, exact_inverter(A), v, 1e-6), v, atol=1e-14)


def test_exprational_scalar():
    A = np.array([[3.0]])
    u = exprational(A, exact_inverter(A), np.array([2.0]), 1e-6)
    assert u == pytest.approx([2 * math.exp(-3.0)], rel=1e-12)


def test_exprational_complete_graph(rng):
    g = generate("clique:n=5")
    P = ProjectedExponent.from_ahk(g, None, 1.0)
    A = aslinearoperator(P.dense())
    v = unit(rng, 5)
    params = choose_params(np.linalg.norm(P.dense(), 2), 1e-6)
    u = exprational(A, shifted_inverter(A), v, 1e-6, params=params)
    assert np.linalg.norm(u - dense_expmv(P.dense(), v)) <= 1e-6


def test_exprational_projected_backend(rng):
    g = generate("planted:n=60,d=3,cross=3", 4)
    beta = np.zeros(g.n)
    beta[:6] = 0.4
    P = ProjectedExponent.from_ahk(g, beta, 8.0)
    v = unit(rng, g.n)
    u = exprational(P.operator(), projected_inverter(P), v, 1e-8)
    assert np.linalg.norm(u - dense_expmv(P.dense(), v)) <= 1e-8


def test_exprational_factorization_invariants(rng):
    A = random_psd(rng, 80, 300.0)
    v = unit(rng, 80)
    params = choose_params(np.linalg.norm(A, 2), 1e-8)
    inv = shifted_inverter(aslinearoperator(A))
    fac = exprational_factorization(inv, v, params.k, params.eps1, 80)
    V = fac.basis
    assert np.abs(V.T @ V - np.eye(V.shape[1])).max() <= 1e-10
    assert np.array_equal(fac.sym, fac.sym.T)
    assert np.allclose(np.tril(fac.coeff, -2), 0)
    # spectrum of That sits in the window around [(1 + lam_max/k)^-1, (1 + lam_min/k)^-1]
    lam = np.linalg.eigvalsh(A)
    k = params.k
    theta = np.linalg.eigvalsh(fac.sym)
    slack = params.eps1 * math.sqrt(k + 1) + 1e-12
    assert theta.min() >= 1 / (1 + lam.max() / k) - slack
    assert theta.max() <= 1 / (1 + lam.min() / k) + slack


def test_exprational_rejects_bad_spectrum(rng):
    # an "inverter" returning -y drives That negative
    A = random_psd(rng, 10, 5.0)
    with pytest.raises(ExpmvError, match="eigenvalues of That lie"):
        exprational(A, lambda y, k, e: -y, unit(rng, 10), 1e-6)


# ---------------------------------------------------------------- Taylor


def test_taylor_examples(rng):
    v = unit(rng, 4)
    assert np.allclose(expmv_taylor(np.zeros((4, 4)), v, 1e-10), v)
    u = expmv_taylor(np.array([[1.0]]), np.array([1.0]), 1e-10)
    assert abs(u[0] - math.exp(-1)) <= 1e-10
    A = random_psd(rng, 50, 10.0)
    v = unit(rng, 50)
    assert np.linalg.norm(expmv_taylor(A, v, 1e-10) - dense_expmv(A, v)) <= 1e-9


def test_taylor_cap():
    assert taylor_terms(10, 1e-10) == math.ceil(math.e**2 * 5)
    with pytest.raises(ExpmvError):
        expmv_taylor(np.diag([1e5, 0.0]), np.ones(2), 1e-6)


# ---------------------------------------------------------------- shared contracts


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(-50, 50))
def test_scaling_contract(seed, alpha):
    r = np.random.default_rng(seed)
    A = random_psd(r, 20, 30.0)
    v = r.standard_normal(20)
    inv = exact_inverter(A)
    for f in (lambda x: expmv_lanczos(A, x, 1e-8),
              lambda x: exprational(A, inv, x, 1e-8),
              lambda x: expmv_taylor(A, x, 1e-8)):
        assert np.allclose(f(alpha * v), alpha * f(v), rtol=1e-12, atol=1e-12 * max(1, abs(alpha)))
