"""Polynomial approximation of ``1/x``, ``(1 + nu x)^{-1}`` and ``exp(-x)`` on intervals.

Errors for ``exp(-x)`` on ``[a, b]`` are always measured relative to ``exp(-a)``,
so every quantity here is invariant under shifting the interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import linprog

DEFAULT_Q_GRID = 20001
DEGREE_CAP = 4096


@dataclass(frozen=True)
class PolynomialApprox:
    """A polynomial on ``interval`` with its measured sup-norm error.

    ``evaluator`` maps an array of points to values.  ``coeffs`` holds Chebyshev
    coefficients in the variable ``t = (2x - a - b)/(b - a)`` when the polynomial
    was built by interpolation, and is ``None`` for closed-form constructions.
    For ``exp(-x)`` interpolants the evaluator returns values divided by ``exp(-a)``
    when called through :meth:`relative`.
    """

    interval: tuple
    evaluator: Callable = field(repr=False)
    degree: int
    measured_error: float
    grid_size: int
    coeffs: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.degree < 0 or not self.measured_error >= 0:
            raise ValueError("degree and measured error must be non-negative")

    def __call__(self, x):
        return self.evaluator(np.asarray(x, dtype=float))

    def relative(self, x):
        """Values scaled by ``exp(a)``; only meaningful for ``exp(-x)`` approximants."""
        if self.coeffs is None:
            return self(x) * math.exp(self.interval[0])
        return C.chebval(_to_t(np.asarray(x, dtype=float), *self.interval), self.coeffs)


def _to_t(x, a, b):
    if b == a:
        return np.zeros_like(x)
    return (2.0 * x - a - b) / (b - a)


def chebyshev_grid(a: float, b: float, size: int) -> np.ndarray:
    """``size`` Chebyshev-Lobatto points on ``[a, b]`` in increasing order, endpoints included."""
    if size < 2:
        return np.array([a], dtype=float)
    t = -np.cos(np.pi * np.arange(size) / (size - 1))
    return a + (b - a) * (t + 1.0) / 2.0


def cheb_T(n: int, s):
    """``T_n(s)`` by the three-term recurrence, elementwise."""
    s = np.asarray(s, dtype=float)
    if n == 0:
        return np.ones_like(s)
    t0, t1 = np.ones_like(s), s.copy()
    for _ in range(n - 1):
        t0, t1 = t1, 2.0 * s * t1 - t0
    return t1


def _cheb_T_U(n: int, s: float):
    """Return ``(T_n(s), U_{n-1}(s))`` for a scalar ``s``."""
    t0, t1 = 1.0, s
    u0, u1 = 0.0, 1.0  # U_{-1}, U_0
    for _ in range(n - 1):
        t0, t1 = t1, 2.0 * s * t1 - t0
        u0, u1 = u1, 2.0 * s * u1 - u0
    return (t1, u1) if n >= 1 else (1.0, 0.0)


# --------------------------------------------------------------------------
# inverse approximations


def q_inverse_degree(a: float, b: float, eps: float) -> int:
    return math.ceil(math.sqrt(b / a) * math.log(2.0 / eps))


def q_inverse(a: float, b: float, eps: float, grid: int = DEFAULT_Q_GRID) -> PolynomialApprox:
    """Degree-``k`` polynomial ``q`` with ``sup_[a,b] |x q(x) - 1| <= eps``.

    ``q(x) = (1 - T_{k+1}(s(x)) / T_{k+1}(s(0))) / x`` with ``s(x) = (b + a - 2x)/(b - a)``
    and ``k = ceil(sqrt(b/a) ln(2/eps))``.

    Examples
    --------
    >>> q_inverse(1.0, 4.0, 0.1).degree
    6
    """
    if not a > 0:
        raise ValueError("q_inverse needs a > 0")
    if not b > a:
        raise ValueError("q_inverse needs b > a")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    k = q_inverse_degree(a, b, eps)
    s0 = (b + a) / (b - a)
    t_s0, u_s0 = _cheb_T_U(k + 1, s0)
    # limit of the quotient at x = 0: d/dx of the numerator is T'_{k+1}(s0) * 2/(b-a) / T_{k+1}(s0)
    q_at_zero = (k + 1) * u_s0 * 2.0 / ((b - a) * t_s0)

    def q(x):
        x = np.asarray(x, dtype=float)
        s = (b + a - 2.0 * x) / (b - a)
        num = 1.0 - cheb_T(k + 1, s) / t_s0
        out = np.empty_like(x)
        zero = x == 0.0
        out[~zero] = num[~zero] / x[~zero]
        out[zero] = q_at_zero
        return out

    xs = np.linspace(a, b, grid)
    err = float(np.max(np.abs(xs * q(xs) - 1.0)))
    return PolynomialApprox(interval=(a, b), evaluator=q, degree=k, measured_error=err, grid_size=grid)


def q_star(nu: float, a: float, b: float, eps: float, grid: int = DEFAULT_Q_GRID) -> PolynomialApprox:
    """``q*(x) = q_inverse(1 + nu a, 1 + nu b, eps)(1 + nu x)``, approximating ``(1 + nu x)^{-1}``."""
    if not nu > 0 or a < 0:
        raise ValueError("q_star needs nu > 0 and a >= 0")
    base = q_inverse(1.0 + nu * a, 1.0 + nu * b, eps, grid=2)

    def qs(x):
        return base(1.0 + nu * np.asarray(x, dtype=float))

    xs = np.linspace(a, b, grid)
    err = float(np.max(np.abs((1.0 + nu * xs) * qs(xs) - 1.0)))
    return PolynomialApprox(interval=(a, b), evaluator=qs, degree=base.degree, measured_error=err,
                            grid_size=grid)


# --------------------------------------------------------------------------
# degree bounds for exp(-x)


def degree_upper_bound(a: float, b: float, delta: float, c0: float = 1.0) -> int:
    """Degree guide ``ceil(c0 sqrt(max(L^2, (b-a) L)) L max(1, ln L'))``.

    Here ``L = ln(1/delta)`` and ``L' = ln max(1/delta, 3)``.  All hidden constants
    are 1, so this is a scaling guide rather than a certified bound.
    """
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if b < a:
        raise ValueError("need b >= a")
    L = math.log(1.0 / delta)
    lnln = max(1.0, math.log(math.log(max(1.0 / delta, 3.0))))
    return max(1, math.ceil(c0 * math.sqrt(max(L * L, (b - a) * L)) * L * lnln))


class DegreeLowerBound(NamedTuple):
    degree: int
    applicable: bool


def degree_lower_bound(a: float, b: float, delta: float) -> DegreeLowerBound:
    """``ceil(sqrt(b - a)/2)`` when ``b - a >= ln 4`` and ``delta <= 1/8``, else ``(0, False)``."""
    if b - a < math.log(4.0) or not 0 < delta <= 0.125:
        return DegreeLowerBound(0, False)
    return DegreeLowerBound(math.ceil(0.5 * math.sqrt(b - a)), True)


# --------------------------------------------------------------------------
# empirical near-minimax approximation


def exp_grid_size(d: int) -> int:
    return 10 * (d + 1) + 1000


def cheb_interpolate_exp(a: float, b: float, d: int) -> PolynomialApprox:
    """Degree-``d`` interpolant of ``exp(-x)`` at Chebyshev points of ``[a, b]``.

    The interpolant is built for ``exp(-(x - a))`` so nothing overflows when ``a``
    is large; ``measured_error`` is the sup of the relative residual over a
    Chebyshev-Lobatto grid of ``10 (d + 1) + 1000`` points.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise OverflowError("interval endpoints must be finite")
    if b < a or d < 0:
        raise ValueError("need b >= a and d >= 0")
    if d > DEGREE_CAP:
        raise ValueError(f"degree {d} exceeds cap {DEGREE_CAP}")
    w = b - a
    size = exp_grid_size(d)
    scale = math.exp(-a)
    if w == 0.0:
        coeffs = np.array([1.0])
        err = 0.0
    else:
        with np.errstate(over="raise", invalid="raise"):
            coeffs = C.chebinterpolate(lambda t: np.exp(-w * (t + 1.0) / 2.0), d)
        t = chebyshev_grid(-1.0, 1.0, size)
        resid = np.exp(-w * (t + 1.0) / 2.0) - C.chebval(t, coeffs)
        err = float(np.max(np.abs(resid)))
        if not math.isfinite(err):
            raise OverflowError("interpolant is not finite on the interval")

    def p(x):
        return scale * C.chebval(_to_t(np.asarray(x, dtype=float), a, b), coeffs)

    return PolynomialApprox(interval=(a, b), evaluator=p, degree=d, measured_error=err,
                            grid_size=size, coeffs=coeffs)


def discrete_minimax_exp(a: float, b: float, d: int, grid: Optional[int] = None) -> PolynomialApprox:
    """Best degree-``d`` relative approximation of ``exp(-x)`` on a Chebyshev-Lobatto grid.

    Solved as the linear program ``min e`` subject to ``|V c - f| <= e`` in the
    Chebyshev basis.  Its residual equioscillates on the grid, which makes it the
    natural input for :func:`lower_bound_witness`.
    """
    if not b > a or d < 0:
        raise ValueError("need b > a and d >= 0")
    size = grid or exp_grid_size(d)
    w = b - a
    t = chebyshev_grid(-1.0, 1.0, size)
    f = np.exp(-w * (t + 1.0) / 2.0)
    V = C.chebvander(t, d)
    ones = np.ones((size, 1))
    res = linprog(
        np.r_[np.zeros(d + 1), 1.0],
        A_ub=np.block([[V, -ones], [-V, -ones]]),
        b_ub=np.concatenate([f, -f]),
        bounds=[(None, None)] * (d + 1) + [(0, None)],
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"minimax linear program failed: {res.message}")
    coeffs = res.x[: d + 1]
    err = float(np.max(np.abs(f - V @ coeffs)))
    scale = math.exp(-a)

    def p(x):
        return scale * C.chebval(_to_t(np.asarray(x, dtype=float), a, b), coeffs)

    return PolynomialApprox(interval=(a, b), evaluator=p, degree=d, measured_error=err,
                            grid_size=size, coeffs=coeffs)


def minimal_degree_empirical(a: float, b: float, delta: float, cap: int = DEGREE_CAP) -> int:
    """Smallest ``d`` whose interpolant has relative error ``<= delta`` on ``[a, b]``.

    The error sequence is smoothed by requiring ``d, d+1, d+2`` to all succeed, which
    makes the predicate monotone in practice; the search is exponential then binary.
    """
    if not b > a:
        raise ValueError("need b > a")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    cache = {}

    def err(d):
        if d not in cache:
            cache[d] = cheb_interpolate_exp(a, b, d).measured_error
        return cache[d]

    def ok(d):
        return all(err(j) <= delta for j in (d, d + 1, d + 2))

    hi = 1
    while not ok(hi):
        if hi >= cap:
            raise ValueError(f"no degree up to {cap} reaches delta = {delta}")
        hi = min(2 * hi, cap)
    lo = 0
    if ok(lo):
        return 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _alternation_extrema(r: np.ndarray):
    """Signed extremum of each maximal run of constant sign in ``r``."""
    nz = np.flatnonzero(r != 0.0)
    if len(nz) == 0:
        return np.array([])
    vals = r[nz]
    sgn = np.sign(vals)
    breaks = np.flatnonzero(np.diff(sgn) != 0) + 1
    out = []
    for seg in np.split(vals, breaks):
        out.append(seg[np.argmax(np.abs(seg))])
    return np.array(out)


def lower_bound_witness(p: PolynomialApprox, d: int, grid: Optional[int] = None) -> float:
    """de la Vallee Poussin lower bound on the best degree-``d`` relative error of ``exp(-x)``.

    If the residual of ``p`` (degree ``<= d``) alternates in sign at ``d + 2`` grid
    points with amplitudes at least ``mu``, no degree-``d`` polynomial can beat ``mu``.
    Returns the largest such ``mu`` found greedily, or 0 without an alternation set.
    """
    if p.degree > d:
        raise ValueError("witness needs a polynomial of degree at most d")
    a, b = p.interval
    if b == a:
        return 0.0
    size = grid or exp_grid_size(max(d, p.degree))
    x = chebyshev_grid(a, b, size)
    r = np.exp(-(x - a)) - p.relative(x)
    ext = list(_alternation_extrema(r))
    need = d + 2
    while len(ext) > need:
        amps = np.abs(ext)
        i = int(np.argmin(amps))
        if i == 0 or i == len(ext) - 1:
            ext.pop(i)
        elif len(ext) - 2 >= need:
            j = i - 1 if amps[i - 1] <= amps[i + 1] else i + 1
            for idx in sorted((i, j), reverse=True):
                ext.pop(idx)
        else:
            ext.pop(0 if amps[0] <= amps[-1] else len(ext) - 1)
    if len(ext) < need:
        return 0.0
    return float(np.min(np.abs(ext)))
