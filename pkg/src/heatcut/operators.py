"""Linear-operator plumbing, conjugate-gradient solvers and the projected AHK exponent.

The exponent used by the partitioner has the form ``A = Pi H M H Pi`` with
``H`` diagonal and positive, ``M`` sparse SDD and ``Pi = I - w w^T``.  Shifted
inverses ``(I + A/k)^{-1} y`` are obtained from two SDD solves combined with the
Sherman-Morrison formula, see :func:`invert_projected`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .graph import Graph

DEFAULT_EIG_CAP = 1024


class ConvergenceError(RuntimeError):
    """An iterative method hit its iteration cap."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class NormHint:
    value: float
    source: str  # "exact", "gershgorin" or "power"


@dataclass(frozen=True)
class LinearOperator:
    """A square linear map given by its action on vectors.

    ``matrix`` is kept when the operator was built from an explicit matrix; it
    enables Jacobi preconditioning and Gershgorin certificates in :func:`cg_solve`.
    ``bounds`` optionally brackets the spectrum of a symmetric operator.
    """

    dim: int
    matvec: Callable[[np.ndarray], np.ndarray]
    diagonal: Optional[np.ndarray] = None
    norm_hint: Optional[NormHint] = None
    bounds: Optional[tuple] = None
    matrix: object = field(default=None, repr=False)
    _info: dict = field(default_factory=dict, compare=False, repr=False)

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: operator is {self.dim}, vector is {x.shape[0]}")
        return self.matvec(x)

    __call__ = apply

    def __matmul__(self, x):
        return self.apply(x)

    def dense(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix.toarray() if sp.issparse(self.matrix) else np.array(self.matrix, dtype=float)
        return self.apply(np.eye(self.dim))


def aslinearoperator(M, norm_hint: Optional[NormHint] = None, bounds=None) -> LinearOperator:
    """Wrap a dense array, a scipy sparse matrix or an existing operator."""
    if isinstance(M, LinearOperator):
        return M
    if sp.issparse(M):
        M = M.tocsr().astype(float)
    else:
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("operator matrix must be square")
    if norm_hint is None:
        norm_hint = NormHint(gershgorin_bound(M), "gershgorin")
    return LinearOperator(
        dim=M.shape[0],
        matvec=M.__matmul__,
        diagonal=np.asarray(M.diagonal(), dtype=float),
        norm_hint=norm_hint,
        bounds=bounds,
        matrix=M,
    )


def gershgorin_bound(M) -> float:
    """Upper bound on the spectral norm of a symmetric matrix (max absolute row sum)."""
    if sp.issparse(M):
        return float(abs(M).sum(axis=1).max()) if M.shape[0] else 0.0
    return float(np.abs(M).sum(axis=1).max()) if len(M) else 0.0


def power_norm(op: LinearOperator, iters: int = 20, seed: int = 0) -> float:
    """Power-iteration estimate of ``||op||`` for a symmetric operator (a lower bound)."""
    x = np.random.default_rng(seed).standard_normal(op.dim)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = op.apply(x)
        est = float(np.linalg.norm(y))
        if est == 0.0:
            return 0.0
        x = y / est
    return est


def estimate_norm(op: LinearOperator, iters: int = 20, seed: int = 0) -> NormHint:
    """Safe over-estimate of ``||op||``: inflated power iteration capped by Gershgorin."""
    if op.norm_hint is not None and op.norm_hint.source == "exact":
        return op.norm_hint
    cap = None
    if op.matrix is not None:
        cap = gershgorin_bound(op.matrix)
    elif op.norm_hint is not None and op.norm_hint.source == "gershgorin":
        cap = op.norm_hint.value
    try:
        est = 1.05 * power_norm(op, iters, seed)
    except FloatingPointError:
        est = math.inf
    if cap is not None and (not math.isfinite(est) or est >= cap):
        return NormHint(cap, "gershgorin")
    if not math.isfinite(est):
        raise ConvergenceError("norm estimate failed and no Gershgorin bound is available")
    return NormHint(est, "power")


def norm_of(op: LinearOperator) -> float:
    """Norm bound used for parameter choices: the attached hint, else an estimate."""
    hint = op.norm_hint if op.norm_hint is not None else estimate_norm(op)
    return hint.value


# --------------------------------------------------------------------------
# conjugate gradient


def _preconditioned_condition(M: LinearOperator, pdiag: Optional[np.ndarray]) -> Optional[float]:
    """Certified bound on the condition number of the (Jacobi-scaled) system, if one exists."""
    if M.matrix is not None:
        A = M.matrix
        s = 1.0 / np.sqrt(pdiag) if pdiag is not None else np.ones(M.dim)
        if sp.issparse(A):
            S = sp.diags(s)
            scaled = (S @ A @ S).tocsr()
            diag = scaled.diagonal()
            off = np.asarray(abs(scaled).sum(axis=1)).ravel() - np.abs(diag)
        else:
            scaled = A * s[:, None] * s[None, :]
            diag = np.diag(scaled)
            off = np.abs(scaled).sum(axis=1) - np.abs(diag)
        lo = float(np.min(diag - off))
        hi = float(np.max(diag + off))
        if lo > 0:
            return hi / lo
    if M.bounds is not None and pdiag is None:
        lo, hi = M.bounds
        if lo > 0:
            return hi / lo
    return None


def cg_solve(
    M: LinearOperator,
    b: np.ndarray,
    tol: float = 1e-10,
    max_iter: Optional[int] = None,
    precondition: bool = True,
    callback: Optional[Callable[[np.ndarray], None]] = None,
) -> np.ndarray:
    """Solve ``M u = b`` for symmetric positive definite ``M`` by (Jacobi-)preconditioned CG.

    The loop stops once ``||u - M^{-1} b||_M <= tol * ||M^{-1} b||_M`` is certified
    through ``sqrt(kappa) * ||r~|| / ||b~||``, where ``~`` denotes the Jacobi-scaled
    system and ``kappa`` is a Gershgorin or user-supplied condition bound.  Without
    such a bound the test falls back to the scaled relative residual.
    """
    M = aslinearoperator(M)
    b = np.asarray(b, dtype=float)
    if b.shape != (M.dim,):
        raise ValueError(f"dimension mismatch: operator is {M.dim}, rhs has shape {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side contains NaN or inf")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        raise ValueError("right-hand side is zero")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = 10 * M.dim + 100

    key = ("cg-setup", precondition)
    if key not in M._info:
        pdiag = None
        if precondition and M.diagonal is not None and np.all(M.diagonal > 0):
            pdiag = np.asarray(M.diagonal, dtype=float)
        kappa = _preconditioned_condition(M, pdiag)
        if kappa is None and pdiag is not None and M.bounds is not None:
            pdiag = None
            kappa = _preconditioned_condition(M, None)
        M._info[key] = (pdiag, kappa)
    pdiag, kappa = M._info[key]
    factor = math.sqrt(kappa) if kappa is not None else 1.0

    def prec(r):
        return r / pdiag if pdiag is not None else r

    x = np.zeros_like(b)
    r = b.copy()
    z = prec(r)
    p = z.copy()
    rz = float(r @ z)
    bscaled = math.sqrt(float(b @ prec(b)))
    target = tol / factor * bscaled
    rel = 1.0
    for it in range(1, max_iter + 1):
        q = M.apply(p)
        pq = float(p @ q)
        if pq <= 0 or not math.isfinite(pq):
            raise ConvergenceError("operator is not positive definite along the search direction", rel)
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        if callback is not None:
            callback(x)
        z = prec(r)
        rz_new = float(r @ z)
        scaled = math.sqrt(max(rz_new, 0.0))
        rel = scaled / bscaled
        if scaled <= target:
            return x
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not converge in {max_iter} iterations (relative residual {rel:.3e})", rel
    )


def shifted_operator(A: LinearOperator, k: float) -> LinearOperator:
    """``I + A/k`` with spectrum bounds derived from ``A``'s norm hint."""
    if A.matrix is not None:
        I = sp.identity(A.dim, format="csr") if sp.issparse(A.matrix) else np.eye(A.dim)
        mat = I + A.matrix / k
        return aslinearoperator(mat, bounds=(1.0, 1.0 + norm_of(A) / k))
    diag = None if A.diagonal is None else 1.0 + A.diagonal / k
    return LinearOperator(
        dim=A.dim,
        matvec=lambda x: x + A.apply(x) / k,
        diagonal=diag,
        bounds=(1.0, 1.0 + norm_of(A) / k),
    )


def invert_shifted(A: LinearOperator, k: int, eps1: float, y: np.ndarray) -> np.ndarray:
    """Return ``u`` with ``||(I + A/k)^{-1} y - u|| <= eps1 ||y||`` for PSD ``A``.

    The CG M-norm guarantee implies the Euclidean one because ``I + A/k >= I``.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    A = aslinearoperator(A)
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        return np.zeros_like(y)
    return cg_solve(shifted_operator(A, k), y, tol=eps1)


# --------------------------------------------------------------------------
# projected exponent  Pi H M H Pi


@dataclass(frozen=True, eq=False)
class ProjectedExponent:
    """``A = Pi H M H Pi`` with ``Pi = I - w w^T``.

    For the AHK walk: ``H = D^{-1/2}``, ``w = D^{1/2} 1 / sqrt(2m)`` and
    ``M = tau (L + s D + diag(beta * d))`` with ``s = sum_i beta_i d_i / 2m``,
    so that ``A = tau D^{-1/2} (L + sum_i beta_i L(S_i)) D^{-1/2}``.
    """

    H: np.ndarray
    M: sp.csr_matrix
    w: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if np.any(self.H <= 0):
            raise ValueError("H must have strictly positive entries")
        if abs(np.linalg.norm(self.w) - 1.0) > 1e-12:
            raise ValueError("w must be a unit vector")

    @classmethod
    def from_ahk(cls, g: Graph, beta, tau: float) -> "ProjectedExponent":
        d = g.deg.astype(float)
        beta = np.zeros(g.n) if beta is None else np.asarray(beta, dtype=float)
        s = float(beta @ d) / g.total_volume
        M = tau * (g.laplacian() + sp.diags(s * d + beta * d))
        return cls(H=1.0 / np.sqrt(d), M=M.tocsr(), w=np.sqrt(d) / math.sqrt(g.total_volume))

    @property
    def dim(self) -> int:
        return len(self.H)

    def hmh(self, x):
        H = self.H if x.ndim == 1 else self.H[:, None]
        return H * (self.M @ (H * x))

    def project(self, x):
        if x.ndim == 1:
            return x - (self.w @ x) * self.w
        return x - np.outer(self.w, self.w @ x)

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        return self.project(self.hmh(self.project(x)))

    def hmh_norm_bound(self) -> float:
        """Gershgorin bound on ``||H M H||`` (also bounds ``||A||``)."""
        rows = np.asarray(abs(self.M) @ self.H).ravel() * self.H
        return float(rows.max())

    def operator(self) -> LinearOperator:
        return LinearOperator(
            dim=self.dim,
            matvec=self.apply,
            norm_hint=NormHint(self.hmh_norm_bound(), "gershgorin"),
        )

    def hmh_operator(self) -> LinearOperator:
        return LinearOperator(
            dim=self.dim,
            matvec=self.hmh,
            norm_hint=NormHint(self.hmh_norm_bound(), "gershgorin"),
        )

    def dense(self) -> np.ndarray:
        P = np.eye(self.dim) - np.outer(self.w, self.w)
        HMH = self.H[:, None] * self.M.toarray() * self.H[None, :]
        return P @ HMH @ P

    def m1_norm(self, k: int) -> float:
        key = ("m1norm", k)
        if key not in self._cache:
            hint = estimate_norm(self.hmh_operator())
            self._cache[key] = hint.value / k
        return self._cache[key]

    def inner_system(self, k: int) -> LinearOperator:
        """``H^{-2} + M/k``, the SDD matrix with ``I + HMH/k = H (H^{-2} + M/k) H``."""
        key = ("inner", k)
        if key not in self._cache:
            mat = (sp.diags(1.0 / self.H**2) + self.M / k).tocsr()
            self._cache[key] = aslinearoperator(mat)
        return self._cache[key]

    def solve_shifted_hmh(self, k: int, tol: float, y: np.ndarray) -> np.ndarray:
        """Approximate ``(I + HMH/k)^{-1} y`` as ``H^{-1} (H^{-2} + M/k)^{-1} H^{-1} y``."""
        inner = self.inner_system(k)
        return cg_solve(inner, y / self.H, tol=tol) / self.H


def invert_projected(P: ProjectedExponent, k: int, eps1: float, y: np.ndarray) -> np.ndarray:
    """Approximate ``(I + Pi H M H Pi / k)^{-1} y`` to relative accuracy ``eps1``.

    ``w`` is an eigenvector with eigenvalue 1, so the ``w`` component of ``y`` passes
    through unchanged.  On the orthogonal part ``z`` the operator acts as
    ``I + M1 - w (M1 w)^T`` with ``M1 = HMH/k``, and Sherman-Morrison gives

        u = beta1 + (w^T M1 beta1) / (w^T beta2) * beta2 + (w^T y) w,

    where ``beta1 ~ (I + M1)^{-1} z`` and ``beta2 ~ (I + M1)^{-1} w``.  The denominator
    ``w^T (I + M1)^{-1} w`` equals ``1 - w^T M1 (I + M1)^{-1} w`` and is at least
    ``1/(1 + ||M1||)``, which is why the inner tolerance carries that factor squared.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    if not 0 < eps1 < 1:
        raise ValueError("eps1 must lie in (0, 1)")
    y = np.asarray(y, dtype=float)
    w = P.w
    wy = float(w @ y)
    z = y - wy * w
    inner_tol = eps1 / (6.0 * (1.0 + P.m1_norm(k)) ** 2)

    key = ("beta2", k, inner_tol)
    if key not in P._cache:
        beta2 = P.solve_shifted_hmh(k, inner_tol, w)
        P._cache[key] = (beta2, float(w @ beta2), P.hmh(w) / k)
    beta2, denom, m1w = P._cache[key]

    if np.linalg.norm(z) <= 1e-15 * max(np.linalg.norm(y), 1e-300):
        return wy * w
    beta1 = P.solve_shifted_hmh(k, inner_tol, z)
    coef = float(m1w @ beta1) / denom
    return beta1 + coef * beta2 + wy * w


def projected_inverter(P: ProjectedExponent):
    """Adapter with the ``(y, k, eps1) -> u`` signature expected by :func:`heatcut.expmv.exprational`."""
    return lambda y, k, eps1: invert_projected(P, k, eps1, y)


def shifted_inverter(A: LinearOperator):
    return lambda y, k, eps1: invert_shifted(A, k, eps1, y)


# --------------------------------------------------------------------------
# small symmetric eigenproblems


def sym_eig(T, method: str = "lapack", cap: int = DEFAULT_EIG_CAP):
    """Eigendecomposition ``T = Q diag(lam) Q^T`` of a small symmetric matrix.

    ``method="jacobi"`` runs the cyclic Jacobi sweep in :func:`jacobi_eig`.
    """
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError("T must be square")
    if T.shape[0] > cap:
        raise ValueError(f"matrix order {T.shape[0]} exceeds cap {cap}")
    if method == "jacobi":
        return jacobi_eig(T)
    if method != "lapack":
        raise ValueError(f"unknown method {method!r}")
    lam, Q = np.linalg.eigh(0.5 * (T + T.T))
    return lam, Q


def jacobi_eig(T, tol: float = 1e-14, max_sweeps: int = 100):
    """Cyclic Jacobi rotations; stops when the off-diagonal mass is below ``tol * ||T||_F``."""
    A = np.array(T, dtype=float)
    A = 0.5 * (A + A.T)
    n = len(A)
    Q = np.eye(n)
    scale = np.linalg.norm(A)
    if n < 2 or scale == 0.0:
        return np.diag(A).copy(), Q
    for _ in range(max_sweeps):
        off = math.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * scale:
            return np.diag(A).copy(), Q
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                qp, qq = Q[:, p].copy(), Q[:, q].copy()
                Q[:, p] = c * qp - s * qq
                Q[:, q] = s * qp + c * qq
    raise ConvergenceError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")
