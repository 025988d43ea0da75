"""Balanced separators from accelerated heat-kernel (AHK) walk embeddings.

The outer loop :func:`balsep` alternates between computing a random
projection of the walk ``D^{-1/2} P_tau(beta)`` (one matrix-exponential-vector
product per projection), testing the total deviation against ``(1 + eps)/n``,
and asking :func:`find_cut` for a low-conductance cut.  Unbalanced cuts raise
the acceleration ``beta`` on their vertices and the loop repeats.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg

from .expmv import choose_params, exprational, expmv_lanczos
from .graph import Cut, Graph, cut_stats
from .operators import ProjectedExponent, norm_of, projected_inverter

EPS = 1.0 / 7.0

STREAM_JL = 0
STREAM_ROUND = 1


class SweepError(ValueError):
    """No sweep prefix falls inside the requested volume window."""


class DegenerateEmbeddingError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class BalSepConfig:
    """Tunable constants and backend choices.

    ``c`` defaults to ``b/100`` and ``k_jl`` to ``ceil(c_jl ln n / eps^2)`` capped
    at ``n``.  ``jl`` is ``"auto"`` (orthogonal rows when ``k_jl >= n``, Gaussian
    directions otherwise), ``"gaussian"`` or ``"orthogonal"``.
    """

    alpha_factor: float = 48.0
    c: Optional[float] = None
    c_factor: float = 0.01
    c_jl: float = 24.0
    k_jl: Optional[int] = None
    jl: str = "auto"
    backend: str = "exprational"
    delta: Optional[float] = None
    proj_trials: Optional[int] = None
    seed: int = 0
    threads: int = 1
    max_iterations: Optional[int] = None
    estimate_lambda2: bool = False

    def __post_init__(self):
        if self.backend not in ("exprational", "lanczos"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.jl not in ("auto", "gaussian", "orthogonal"):
            raise ValueError(f"unknown JL mode {self.jl!r}")
        if self.alpha_factor <= 0 or self.c_jl <= 0:
            raise ValueError("alpha_factor and c_jl must be positive")

    def balance_floor(self, b: float) -> float:
        return self.c if self.c is not None else self.c_factor * b

    def jl_dim(self, n: int) -> int:
        if self.k_jl is not None:
            return max(1, min(self.k_jl, n))
        return min(n, math.ceil(self.c_jl * math.log(n) / EPS**2))

    def expmv_delta(self, n: int) -> float:
        return self.delta if self.delta is not None else max(1.0 / n**3, 1e-12)

    def trials(self, n: int) -> int:
        return self.proj_trials if self.proj_trials is not None else math.ceil(4 * math.log(n))

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_text(cls, text: str, **overrides) -> "BalSepConfig":
        """Parse ``key = value`` lines (``#`` comments) into a config."""
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not sep or key not in types:
                raise ValueError(f"config line {lineno}: unknown or malformed entry {raw!r}")
            values[key] = _coerce(types[key], val, key)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def _coerce(typ: str, val: str, key: str):
    if val.lower() in ("none", "") and "Optional" in typ:
        return None
    try:
        if "bool" in typ:
            if val.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(val)
            return val.lower() in ("true", "1", "yes")
        if "int" in typ:
            return int(val)
        if "float" in typ:
            return float(val)
    except ValueError:
        raise ValueError(f"config key {key!r}: cannot parse {val!r}") from None
    return val


# --------------------------------------------------------------------------
# state and embeddings


@dataclass
class AHKState:
    beta: np.ndarray
    tau: float
    gamma: float
    b: float
    t: int = 1
    removed: np.ndarray = None

    @classmethod
    def initial(cls, g: Graph, gamma: float, b: float) -> "AHKState":
        return cls(
            beta=np.zeros(g.n),
            tau=math.log(g.n) / (12.0 * gamma),
            gamma=gamma,
            b=b,
            removed=np.zeros(g.n, dtype=bool),
        )

    def exponent(self, g: Graph) -> ProjectedExponent:
        return ProjectedExponent.from_ahk(g, self.beta, self.tau)


@dataclass
class Embedding:
    """Vertex vectors (rows of ``vectors``) with their degree-weighted mean and radii."""

    vectors: np.ndarray
    mean: np.ndarray
    radii: np.ndarray
    psi: float

    @classmethod
    def from_vectors(cls, g: Graph, vectors: np.ndarray) -> "Embedding":
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim == 1:
            vectors = vectors[:, None]
        d = g.deg.astype(float)
        mean = d @ vectors / g.total_volume
        radii = np.linalg.norm(vectors - mean, axis=1)
        return cls(vectors=vectors, mean=mean, radii=radii, psi=float(d @ radii**2))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def edge_energy(self, g: Graph) -> float:
        """``L . X``, the sum of squared edge lengths."""
        e = g.edges()
        diff = self.vectors[e[:, 0]] - self.vectors[e[:, 1]]
        return float(np.sum(diff * diff))

    def subset_variance(self, g: Graph, mask: np.ndarray) -> float:
        """``L(K_R) . X`` for the complete graph on ``R`` with weights ``d_i d_j / 2m``."""
        d = g.deg[mask].astype(float)
        if len(d) < 2:
            return 0.0
        V = self.vectors[mask]
        vol = d.sum()
        s = d @ V
        return float((vol * (d @ np.sum(V * V, axis=1)) - s @ s) / g.total_volume)


def total_deviation(e: Embedding) -> float:
    """``Psi = sum_i d_i ||v_i - v_avg||^2`` of a populated embedding."""
    return e.psi


def child_rng(seed: int, iteration: int, stream: int) -> np.random.Generator:
    """Counter-based stream so every (iteration, stream) pair is reproducible on its own."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(iteration, stream)))


def sample_directions(rng: np.random.Generator, k: int, n: int, mode: str = "auto") -> np.ndarray:
    """``k`` unit vectors in ``R^n`` as rows.

    Gaussian mode normalises independent Gaussians.  Orthogonal mode takes ``k``
    rows of a Haar-random orthogonal matrix, which preserves every distance exactly
    when ``k = n``.
    """
    if mode == "auto":
        mode = "orthogonal" if k >= n else "gaussian"
    if mode == "orthogonal":
        if k > n:
            raise ValueError("cannot draw more than n orthogonal directions")
        G = rng.standard_normal((n, n))
        Q, R = np.linalg.qr(G)
        Q = Q * np.sign(np.diag(R))
        return Q.T[:k].copy()
    U = rng.standard_normal((k, n))
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def _expmv_backend(name_or_fn, P: ProjectedExponent, delta: float) -> Callable:
    if callable(name_or_fn):
        return lambda u: name_or_fn(P, u, delta)
    A = P.operator()
    if name_or_fn == "lanczos":
        return lambda u: expmv_lanczos(A, u, delta)
    if name_or_fn == "exprational":
        params = choose_params(norm_of(A), delta)
        inv = projected_inverter(P)
        return lambda u: exprational(A, inv, u, delta, params=params)
    raise ValueError(f"unknown expmv backend {name_or_fn!r}")


def embed(
    g: Graph,
    state: AHKState,
    k_jl: int,
    rng: np.random.Generator,
    expmv="exprational",
    delta: float = 1e-12,
    threads: int = 1,
    jl: str = "auto",
) -> Embedding:
    """JL-sketched embedding ``(v_i)_j = sqrt(n/k) (exp(-tau C) u_j)_i / sqrt(d_i)``.

    ``expmv`` is ``"exprational"``, ``"lanczos"`` or a callable
    ``f(P, u, delta) -> exp(-P) u``.  ``tau = 0`` skips the exponential.
    """
    n = g.n
    U = sample_directions(rng, k_jl, n, jl)
    if state.tau == 0.0:
        Y = U
    else:
        P = state.exponent(g)
        f = _expmv_backend(expmv, P, delta)
        if threads > 1 and k_jl > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                Y = np.array(list(pool.map(f, U)))
        else:
            Y = np.array([f(u) for u in U])
    vectors = math.sqrt(n / k_jl) * Y.T / np.sqrt(g.deg.astype(float))[:, None]
    return Embedding.from_vectors(g, vectors)


# --------------------------------------------------------------------------
# sweeps and rounding


def sweep_profile(g: Graph, score) -> tuple:
    """Order (score descending, ties by id) and the volume/boundary of each prefix."""
    score = np.asarray(score, dtype=float)
    if score.shape != (g.n,) or not np.all(np.isfinite(score)):
        raise ValueError("score must be a finite vector with one entry per vertex")
    order = np.lexsort((np.arange(g.n), -score))
    pos = np.empty(g.n, dtype=np.int64)
    pos[order] = np.arange(g.n)
    rows = np.repeat(np.arange(g.n), g.deg)
    earlier = np.bincount(rows[pos[g.indices] < pos[rows]], minlength=g.n)
    delta = (g.deg - 2 * earlier)[order]
    return order, np.cumsum(g.deg[order]), np.cumsum(delta)


def sweep_cut(g: Graph, score, window: Optional[tuple] = None) -> Cut:
    """Minimum-conductance prefix cut of the score ordering.

    ``window = (lo, hi)`` restricts to prefixes whose volume lies in ``[lo, hi]``.
    Ties in conductance go to the shorter prefix.
    """
    order, vol, bnd = sweep_profile(g, score)
    vol, bnd = vol[:-1], bnd[:-1]
    ok = np.ones(len(vol), dtype=bool)
    if window is not None:
        lo, hi = window
        ok = (vol >= lo) & (vol <= hi)
    if not ok.any():
        raise SweepError("no sweep prefix has volume inside the window")
    phi = bnd / np.minimum(vol, g.total_volume - vol)
    phi = np.where(ok, phi, np.inf)
    h = int(np.argmin(phi))
    return cut_stats(g, order[: h + 1])


def proj_round(g: Graph, e: Embedding, b: float, rng: np.random.Generator,
               trials: Optional[int] = None, c: Optional[float] = None) -> Cut:
    """Random-projection rounding: best windowed sweep over ``trials`` directions."""
    if not np.any(e.radii > 0):
        raise DegenerateEmbeddingError("all embedding vectors coincide")
    c = b / 100.0 if c is None else c
    trials = math.ceil(4 * math.log(g.n)) if trials is None else trials
    h = e.dim
    window = (c * g.total_volume, (1.0 - c) * g.total_volume)
    best = None
    for _ in range(trials):
        u = rng.standard_normal(h)
        u /= np.linalg.norm(u)
        x = math.sqrt(h) * (e.vectors @ u)
        try:
            cut = sweep_cut(g, x, window)
        except SweepError:
            continue
        if best is None or cut.conductance < best.conductance:
            best = cut
    if best is None:
        raise SweepError("no projection produced a sweep inside the balance window")
    return best


@dataclass
class FindCutOutcome:
    case: str  # "fail", "case2" or "case3"
    cut: Optional[Cut]
    diagnostics: dict


def find_cut(g: Graph, b: float, gamma: float, e: Embedding, rng: np.random.Generator,
             alpha: Optional[float] = None, c: Optional[float] = None,
             trials: Optional[int] = None) -> FindCutOutcome:
    """Cut oracle: Fail when the embedding is too spread along edges, project-and-round
    when the variance sits on low-radius vertices, otherwise sweep the radii."""
    alpha = 48.0 * gamma if alpha is None else alpha
    psi = e.psi
    lx = e.edge_energy(g)
    diag = {"psi": psi, "edge_energy": lx, "alpha": alpha}
    if lx > alpha * psi:
        diag["reason"] = "edge energy exceeds alpha * psi"
        return FindCutOutcome("fail", None, diag)

    two_m = g.total_volume
    R = e.radii**2 <= 32.0 * (1.0 - b) / b * psi / two_m
    lkr = e.subset_variance(g, R)
    diag["R_size"] = int(R.sum())
    diag["R_variance"] = lkr
    if lkr >= psi / 128.0:
        return FindCutOutcome("case2", proj_round(g, e, b, rng, trials=trials, c=c), diag)

    order, vol, bnd = sweep_profile(g, e.radii)
    z = int(np.argmax(vol >= 0.25 * b * two_m))  # 0-based index of S_z
    bound = 40.0 * math.sqrt(gamma)
    best = None
    for i in range(z - 1, -1, -1):  # S_{z-1} down to S_1; volumes increase with i
        phi = bnd[i] / min(vol[i], two_m - vol[i])
        if phi <= bound:
            best = i
            break
    diag["z"] = z + 1
    if best is None:
        diag["reason"] = "no radius sweep below the conductance bound"
        return FindCutOutcome("fail", None, diag)
    cut = cut_stats(g, order[: best + 1])
    if not cut.conductance <= bound:
        raise AssertionError("case-3 cut violates the conductance bound")
    return FindCutOutcome("case3", cut, diag)


# --------------------------------------------------------------------------
# results


@dataclass
class IterationRecord:
    t: int
    psi: float
    case: str
    cut: Optional[Cut] = None
    removed_volume: int = 0
    beta_max: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "t": self.t,
            "psi": self.psi,
            "case": self.case,
            "removed_volume": self.removed_volume,
            "beta_max": self.beta_max,
        }
        if self.cut is not None:
            out["cut"] = self.cut.to_json()
        out["diagnostics"] = self.diagnostics
        return out


@dataclass
class PartitionResult:
    iteration: int
    trace: list = field(default_factory=list, repr=False)
    params: dict = field(default_factory=dict, repr=False)

    kind = "result"

    def payload(self) -> dict:
        return {}

    def to_json(self) -> dict:
        out = {"result": self.kind, "iteration": self.iteration}
        out.update(self.payload())
        out["params"] = self.params
        out["iterations"] = [r.to_json() for r in self.trace]
        return out


@dataclass
class BalancedCut(PartitionResult):
    cut: Cut = None
    source: str = ""
    bound: float = 0.0

    kind = "balanced_cut"

    def payload(self):
        return {"cut": self.cut.to_json(), "source": self.source, "conductance_bound": self.bound}


@dataclass
class NoCert(PartitionResult):
    psi: float = 0.0
    beta: np.ndarray = None
    reason: str = ""
    lambda2: Optional[float] = None

    kind = "no_cert"

    def payload(self):
        out = {"psi": self.psi, "reason": self.reason, "beta": self.beta.tolist()}
        if self.lambda2 is not None:
            out["lambda2"] = self.lambda2
        return out


@dataclass
class Fail(PartitionResult):
    reason: str = ""
    diagnostics: dict = field(default_factory=dict)

    kind = "fail"

    def payload(self):
        return {"reason": self.reason, "diagnostics": self.diagnostics}


# --------------------------------------------------------------------------
# dense oracles (small graphs)


def normalized_exponent_dense(g: Graph, beta, tau: float = 1.0) -> np.ndarray:
    """Dense ``tau C`` with ``C = D^{-1/2} (L + sum_i beta_i L(S_i)) D^{-1/2}``."""
    return ProjectedExponent.from_ahk(g, beta, tau).dense()


def dense_deviations(g: Graph, beta, tau: float) -> np.ndarray:
    """Exact per-vertex deviations ``||(exp(-tau C) - w w^T) e_i||^2``; they sum to ``Psi``."""
    A = normalized_exponent_dense(g, beta, tau)
    lam, Q = np.linalg.eigh(A)
    E = (Q * np.exp(-lam)) @ Q.T
    w = np.sqrt(g.deg / g.total_volume)
    F = E - np.outer(w, w)
    return np.sum(F * F, axis=0)


def dense_embedding(g: Graph, beta, tau: float) -> np.ndarray:
    """Exact vertex vectors: row ``i`` is ``D^{-1/2} P_tau e_i`` (columns of ``exp(-tau C) D^{-1/2}``)."""
    A = normalized_exponent_dense(g, beta, tau)
    lam, Q = np.linalg.eigh(A)
    E = (Q * np.exp(-lam)) @ Q.T
    return (E / np.sqrt(g.deg.astype(float))[None, :]).T


def lambda2_dense(g: Graph, beta=None) -> float:
    """Second-smallest eigenvalue of ``C(beta)`` (``tau = 1``)."""
    A = normalized_exponent_dense(g, beta, 1.0)
    lam = scipy.linalg.eigh(A, eigvals_only=True)
    return float(lam[1])


# --------------------------------------------------------------------------
# outer loop


def balsep(g: Graph, b: float, gamma: float, cfg: Optional[BalSepConfig] = None,
           expmv=None, hook: Optional[Callable] = None,
           tau: Optional[float] = None) -> Union[BalancedCut, NoCert, Fail]:
    """Find a balanced cut of conductance ``O(sqrt(gamma))`` or certify that no
    ``b``-balanced cut of conductance below ``gamma`` exists.

    Parameters
    ----------
    g : Graph
        Connected input graph.
    b : float
        Target balance in ``(0, 1/2]``.
    gamma : float
        Target conductance in ``[1/n^2, 1)``.
    cfg : BalSepConfig, optional
    expmv : callable, optional
        Replaces the configured backend; called as ``expmv(P, u, delta)``.
    hook : callable, optional
        Called after every iteration with ``(state, embedding, outcome)`` before
        ``beta`` is updated; used for instrumentation.
    tau : float, optional
        Overrides ``ln n / (12 gamma)``.
    """
    cfg = cfg or BalSepConfig()
    n = g.n
    if not 0 < b <= 0.5:
        raise ValueError("b must lie in (0, 1/2]")
    if not 1.0 / n**2 <= gamma < 1:
        raise ValueError("gamma must lie in [1/n^2, 1)")
    state = AHKState.initial(g, gamma, b)
    if tau is not None:
        state.tau = tau
    T = math.ceil(12 * math.log(n))
    iters = T if cfg.max_iterations is None else min(T, cfg.max_iterations)
    c = cfg.balance_floor(b)
    k_jl = cfg.jl_dim(n)
    delta = cfg.expmv_delta(n)
    alpha = cfg.alpha_factor * gamma
    bound = 40.0 * math.sqrt(gamma)
    increment = 72.0 * gamma / T
    two_m = g.total_volume
    params = {
        "n": n,
        "m": g.m,
        "b": b,
        "gamma": gamma,
        "tau": state.tau,
        "T": T,
        "eps": EPS,
        "c": c,
        "alpha": alpha,
        "k_jl": k_jl,
        "delta_expmv": delta,
        "backend": cfg.backend if expmv is None else "custom",
        "seed": cfg.seed,
    }
    threshold = (1.0 + EPS) / n
    trace = []

    def lam2():
        return lambda2_dense(g, state.beta) if cfg.estimate_lambda2 else None

    for t in range(1, iters + 1):
        state.t = t
        emb = embed(g, state, k_jl, child_rng(cfg.seed, t, STREAM_JL),
                    expmv=expmv or cfg.backend, delta=delta, threads=cfg.threads, jl=cfg.jl)
        psi = emb.psi
        rec = IterationRecord(t=t, psi=psi, case="", beta_max=float(state.beta.max()),
                              removed_volume=int(g.deg[state.removed].sum()))
        trace.append(rec)
        if psi <= threshold:
            rec.case = "certificate"
            if hook:
                hook(state, emb, None)
            return NoCert(iteration=t, trace=trace, params=params, psi=psi,
                          beta=state.beta.copy(), reason="deviation below threshold",
                          lambda2=lam2())

        out = find_cut(g, b, gamma, emb, child_rng(cfg.seed, t, STREAM_ROUND), alpha=alpha, c=c,
                       trials=cfg.trials(n))
        rec.case = out.case
        rec.cut = out.cut
        rec.diagnostics = out.diagnostics
        if hook:
            hook(state, emb, out)
        if out.case == "fail":
            return Fail(iteration=t, trace=trace, params=params,
                        reason=out.diagnostics.get("reason", "find_cut failed"),
                        diagnostics=out.diagnostics)

        cut = out.cut
        if cut.balance >= c:
            return _emit(g, cut, out.case, t, trace, params, bound, c)
        side = np.zeros(n, dtype=bool)
        side[list(cut.side)] = True
        state.removed |= side
        union_vol = int(g.deg[state.removed].sum())
        if union_vol < two_m and min(union_vol, two_m - union_vol) >= c * two_m:
            union = cut_stats(g, np.flatnonzero(state.removed))
            return _emit(g, union, "union", t, trace, params, bound, c)
        state.beta[side] += increment
        if state.beta.max() > 72.0 * gamma * (1 + 1e-12):
            raise AssertionError("beta exceeded 72 gamma")

    return NoCert(iteration=iters, trace=trace, params=params, psi=trace[-1].psi,
                  beta=state.beta.copy(), reason="iterations exhausted", lambda2=lam2())


def _emit(g, cut, source, t, trace, params, bound, c):
    if cut.balance < c or cut.conductance > bound:
        return Fail(iteration=t, trace=trace, params=params,
                    reason="emitted cut violates the balance or conductance guarantee",
                    diagnostics={"cut": cut.to_json(), "source": source})
    return BalancedCut(iteration=t, trace=trace, params=params, cut=cut, source=source, bound=bound)
