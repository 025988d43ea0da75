"""Matrix-exponential-vector products ``exp(-A) v`` for symmetric PSD ``A``.

Three routes are provided:

* :func:`expmv_lanczos` -- polynomial Krylov approximation (three-term Lanczos),
* :func:`exprational` -- Lanczos on ``(I + A/k)^{-1}`` with inexact inversion,
  full Gram-Schmidt and a symmetrised coefficient matrix,
* :func:`expmv_taylor` -- truncated Taylor series, a slow independent baseline.

:func:`dense_expmv` is the eigendecomposition oracle used by the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .operators import LinearOperator, aslinearoperator, norm_of, sym_eig

EPS_MACHINE_GUARD = 1e-14
BREAKDOWN_RTOL = 1e-12
K_FLOOR = 8


class ExpmvError(RuntimeError):
    pass


@dataclass
class KrylovFactorization:
    """Orthonormal Krylov basis (columns of ``basis``) and its coefficient matrix.

    For Lanczos ``coeff`` is the symmetric tridiagonal ``T_k``; for ExpRational it
    is the upper-Hessenberg Gram-Schmidt matrix and ``sym`` its symmetric part.
    """

    basis: np.ndarray
    coeff: np.ndarray
    effective_order: int
    sym: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ExpmParams:
    k: int
    eps1: float
    delta: float
    eps1_theory_log10: float

    def __post_init__(self):
        if self.k < 1 or not (0 < self.eps1 <= self.delta <= 1):
            raise ValueError(f"invalid parameters {self}")

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "eps1": self.eps1,
            "delta": self.delta,
            "eps1_theory_log10": self.eps1_theory_log10,
            "eps1_floored": self.eps1 > 10.0**self.eps1_theory_log10,
        }


def _unit(v):
    v = np.asarray(v, dtype=float)
    nrm = float(np.linalg.norm(v))
    return v, nrm


def dense_expmv(A, v, f: Callable = None) -> np.ndarray:
    """``f(A) v`` through a dense symmetric eigendecomposition (default ``f = exp(-x)``)."""
    A = A.dense() if isinstance(A, LinearOperator) else np.asarray(A, dtype=float)
    lam, Q = np.linalg.eigh(0.5 * (A + A.T))
    fl = np.exp(-lam) if f is None else f(lam)
    return Q @ (fl * (Q.T @ np.asarray(v, dtype=float)))


# --------------------------------------------------------------------------
# Lanczos


def _tridiag_apply_f(alpha, beta, f):
    """Return ``f(T) e_1`` and the Ritz values of the tridiagonal ``T``."""
    if len(alpha) == 1:
        return np.array([f(np.array([alpha[0]]))[0]]), np.array(alpha[:1])
    lam, Q = eigh_tridiagonal(alpha, beta)
    return Q @ (f(lam) * Q[0]), lam


def lanczos_factorization(B, v, k: int, monitor=None) -> KrylovFactorization:
    """Three-term Lanczos recurrence without re-orthogonalisation.

    ``monitor(alpha, beta)`` is called after each completed step with the
    current coefficients; returning ``True`` truncates the factorization there.
    """
    B = aslinearoperator(B)
    v = np.asarray(v, dtype=float)
    n = B.dim
    if k < 0:
        raise ValueError("order k must be non-negative")
    V = np.zeros((n, k + 1))
    alpha = np.zeros(k + 1)
    beta = np.zeros(k + 1)  # beta[i] couples v_{i-1} and v_i
    V[:, 0] = v
    order = k
    for i in range(k):
        w = B.apply(V[:, i])
        if i > 0:
            w = w - beta[i] * V[:, i - 1]
        alpha[i] = V[:, i] @ w
        wp = w - alpha[i] * V[:, i]
        nw = float(np.linalg.norm(wp))
        if nw <= BREAKDOWN_RTOL * float(np.linalg.norm(w)):
            order = i
            break
        beta[i + 1] = nw
        V[:, i + 1] = wp / nw
        if monitor is not None and i + 1 < k:
            alpha[i + 1] = V[:, i + 1] @ B.apply(V[:, i + 1])
            if monitor(alpha[: i + 2], beta[1 : i + 2]):
                order = i + 1
                break
    else:
        alpha[k] = V[:, k] @ B.apply(V[:, k])
    T = np.diag(alpha[: order + 1])
    if order > 0:
        off = beta[1 : order + 1]
        T += np.diag(off, 1) + np.diag(off, -1)
    return KrylovFactorization(basis=V[:, : order + 1], coeff=T, effective_order=order)


def lanczos_fv(B, v, k: int, f: Callable) -> np.ndarray:
    """Approximate ``f(B) v`` by ``V_k f(T_k) V_k^T v`` for a unit vector ``v``.

    ``f`` must accept a numpy array of eigenvalues.  On an exact breakdown the
    smaller invariant subspace is used, which makes the result exact.
    """
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-8:
        raise ValueError("v must be a unit vector")
    fac = lanczos_factorization(B, v, k)
    T = fac.coeff
    y, _ = _tridiag_apply_f(np.diag(T).copy(), np.diag(T, 1).copy(), f)
    if not np.all(np.isfinite(y)):
        raise ExpmvError("f produced non-finite values on the Ritz spectrum")
    return fac.basis @ y


def lanczos_order(width: float, delta: float, c0: float = 1.0) -> int:
    """Order guide ``c0 sqrt(max(L^2, width L)) L max(1, ln L)`` with ``L = ln(1/delta)``."""
    L = math.log(1.0 / delta)
    lnln = max(1.0, math.log(math.log(max(1.0 / delta, 3.0))))
    return max(1, math.ceil(c0 * math.sqrt(max(L * L, width * L)) * L * lnln))


def expmv_lanczos(A, v, delta: float, c0: float = 1.0, k: Optional[int] = None,
                  early_stop: bool = True) -> np.ndarray:
    """Approximate ``exp(-A) v`` with error at most ``delta ||exp(-A)|| ||v||``.

    The order follows :func:`lanczos_order` (capped at ``n - 1``); iteration stops
    earlier once two successive approximations differ by less than ``delta/4``
    relative to the current estimate of ``||exp(-A)||``.
    """
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    A = aslinearoperator(A)
    v, scale = _unit(v)
    if scale == 0.0:
        return np.zeros_like(v)
    if k is None:
        k = min(A.dim - 1, lanczos_order(norm_of(A), delta, c0))
    k = max(0, min(k, A.dim - 1))
    f = lambda lam: np.exp(-lam)
    state = {"prev": None, "hits": 0}

    def monitor(alpha, beta):
        y, ritz = _tridiag_apply_f(alpha, beta, f)
        prev = state["prev"]
        state["prev"] = y
        if prev is None:
            return False
        diff = math.hypot(float(np.linalg.norm(y[:-1] - prev)), float(y[-1]))
        if diff <= 0.25 * delta * math.exp(-float(ritz.min())):
            state["hits"] += 1
        else:
            state["hits"] = 0
        return state["hits"] >= 2

    fac = lanczos_factorization(A, v / scale, k, monitor=monitor if early_stop else None)
    T = fac.coeff
    y, _ = _tridiag_apply_f(np.diag(T).copy(), np.diag(T, 1).copy(), f)
    return scale * (fac.basis @ y)


# --------------------------------------------------------------------------
# ExpRational


def choose_params(A_norm: float, delta: float) -> ExpmParams:
    """Krylov order and inner-solve tolerance for :func:`exprational`.

    ``k = max(8, ceil(log2(8/delta) + 2 log2 log2 max(8/delta, 4)))`` and the
    theoretical ``eps1 = delta/32 (k+1)^{-5/2} (1 + A_norm/k)^{-1} (2k)^{-(k+1)}``,
    floored at ``EPS_MACHINE_GUARD`` because it underflows double precision.
    """
    if A_norm < 0 or not 0 < delta <= 1:
        raise ValueError("need A_norm >= 0 and 0 < delta <= 1")
    x = 8.0 / delta
    k = max(K_FLOOR, math.ceil(math.log2(x) + 2.0 * math.log2(math.log2(max(x, 4.0)))))
    log10_eps1 = (
        math.log10(delta / 32.0)
        - 2.5 * math.log10(k + 1)
        - math.log10(1.0 + A_norm / k)
        - (k + 1) * math.log10(2 * k)
    )
    eps1 = min(delta, max(EPS_MACHINE_GUARD, 10.0**log10_eps1))
    return ExpmParams(k=k, eps1=eps1, delta=delta, eps1_theory_log10=log10_eps1)


def exprational_factorization(inv, v, k: int, eps1: float, n: int) -> KrylovFactorization:
    """Rational Krylov basis for ``B = (I + A/k)^{-1}`` using the inexact inverter ``inv``.

    ``inv(y, k, eps1)`` must return ``u`` with ``||(I + A/k)^{-1} y - u|| <= eps1 ||y||``.
    Each new vector is Gram-Schmidt orthogonalised twice; both passes are folded
    into the Hessenberg coefficients.
    """
    V = np.zeros((n, k + 1))
    T = np.zeros((k + 1, k + 1))
    V[:, 0] = v
    order = k
    for i in range(k + 1):
        w = np.asarray(inv(V[:, i], k, eps1), dtype=float)
        nw0 = float(np.linalg.norm(w))
        h = V[:, : i + 1].T @ w
        wp = w - V[:, : i + 1] @ h
        h2 = V[:, : i + 1].T @ wp
        wp -= V[:, : i + 1] @ h2
        T[: i + 1, i] = h + h2
        if i == k:
            break
        nw = float(np.linalg.norm(wp))
        if nw <= BREAKDOWN_RTOL * nw0:
            order = i
            break
        T[i + 1, i] = nw
        V[:, i + 1] = wp / nw
    T = T[: order + 1, : order + 1]
    return KrylovFactorization(
        basis=V[:, : order + 1], coeff=T, effective_order=order, sym=0.5 * (T + T.T)
    )


def exprational(A, inv, v, delta: float, params: Optional[ExpmParams] = None,
                return_info: bool = False):
    """Approximate ``exp(-A) v`` to within ``delta ||v||`` through a rational Krylov space.

    ``inv`` implements the shifted inverse (see :func:`heatcut.operators.shifted_inverter`
    and :func:`heatcut.operators.projected_inverter`).  The answer is
    ``||v|| V_k exp(k (I - That^{-1})) e_1`` with ``That`` the symmetrised coefficients.
    """
    A = aslinearoperator(A)
    a_norm = norm_of(A)
    if params is None:
        params = choose_params(a_norm, delta)
    v, scale = _unit(v)
    if scale == 0.0:
        return (np.zeros_like(v), None) if return_info else np.zeros_like(v)
    k, eps1 = params.k, params.eps1
    fac = exprational_factorization(inv, v / scale, k, eps1, A.dim)
    theta, Q = sym_eig(fac.sym)

    t_lo = 1.0 / (1.0 + a_norm / k)
    window_lo = t_lo - eps1 * math.sqrt(k + 1)
    if theta.min() < min(window_lo, t_lo - 1e-8):
        raise ExpmvError(
            f"eigenvalues of That lie below the certified interval: min {theta.min():.3e} "
            f"< {window_lo:.3e}"
        )
    theta_c = np.maximum(theta, 0.5 * t_lo)
    fvals = np.exp(k * (1.0 - 1.0 / theta_c))
    u = scale * (fac.basis @ (Q @ (fvals * Q[0])))
    if return_info:
        return u, {"k": k, "eps1": eps1, "order": fac.effective_order, "theta": theta, "fac": fac}
    return u


# --------------------------------------------------------------------------
# Taylor baseline


def taylor_terms(a_norm: float, delta: float) -> int:
    return max(1, math.ceil(max(math.e**2 * a_norm / 2.0, math.log(1.0 / delta))))


def expmv_taylor(A, v, delta: float, cap: int = 20000) -> np.ndarray:
    """Truncated Taylor series of ``exp(-A) v`` centred at ``||A||/2``.

    The centring keeps every term bounded by ``(||A||/2)^i / i!`` so cancellation is mild.
    """
    A = aslinearoperator(A)
    a_norm = norm_of(A)
    k = taylor_terms(a_norm, delta)
    if k > cap:
        raise ExpmvError(f"Taylor baseline needs {k} terms, above the cap {cap}")
    c = a_norm / 2.0
    v = np.asarray(v, dtype=float)
    term = v.copy()
    acc = v.copy()
    for i in range(1, k + 1):
        term = -(A.apply(term) - c * term) / i
        acc += term
    return math.exp(-c) * acc
