"""Sparse undirected graphs, Laplacian products, cut statistics and test-graph generators."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class GraphError(ValueError):
    """Base class for invalid graph input."""


class EdgeListParseError(GraphError):
    pass


class SelfLoopError(GraphError):
    pass


class DisconnectedGraphError(GraphError):
    pass


class InfeasibleSpecError(GraphError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    """Unweighted simple connected graph in CSR layout.

    Every edge is stored in both directions, so ``indices[indptr[i]:indptr[i+1]]``
    is the sorted neighbour list of ``i``. ``labels[i]`` is the id that vertex
    ``i`` carried in the input (identity for generated graphs).
    """

    indptr: np.ndarray
    indices: np.ndarray
    labels: np.ndarray
    deg: np.ndarray = field(init=False)
    _adj: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.indptr) - 1
        deg = np.diff(self.indptr).astype(np.int64)
        adj = sp.csr_matrix(
            (np.ones(len(self.indices)), self.indices, self.indptr), shape=(n, n)
        )
        for arr in (self.indptr, self.indices, self.labels, deg):
            arr.setflags(write=False)
        object.__setattr__(self, "deg", deg)
        object.__setattr__(self, "_adj", adj)

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    @property
    def m(self) -> int:
        return len(self.indices) // 2

    @property
    def total_volume(self) -> int:
        return 2 * self.m

    @property
    def adjacency(self) -> sp.csr_matrix:
        return self._adj

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def edges(self) -> np.ndarray:
        """Return the ``(m, 2)`` array of edges ``u < v`` in lexicographic order."""
        rows = np.repeat(np.arange(self.n), self.deg)
        keep = rows < self.indices
        return np.column_stack([rows[keep], self.indices[keep]])

    def volume(self, side) -> int:
        return int(self.deg[np.asarray(side, dtype=np.int64)].sum())

    def laplacian(self) -> sp.csr_matrix:
        return (sp.diags(self.deg.astype(float)) - self._adj).tocsr()

    def dense_laplacian(self) -> np.ndarray:
        return np.diag(self.deg.astype(float)) - self._adj.toarray()

    def to_edge_list(self) -> str:
        return "".join(f"{u} {v}\n" for u, v in self.edges())

    def same_as(self, other: "Graph") -> bool:
        return (
            np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )


@dataclass(frozen=True)
class Cut:
    side: tuple
    vol: int
    boundary: int
    conductance: float
    balance: float

    def to_json(self) -> dict:
        return {
            "side": list(self.side),
            "conductance": self.conductance,
            "balance": self.balance,
            "boundary": self.boundary,
        }


def from_edges(n: int, edges: Iterable, labels=None) -> Graph:
    """Build a graph on vertices ``0..n-1``; duplicate edges are merged."""
    e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    e = e.reshape(-1, 2)
    loops = e[:, 0] == e[:, 1]
    if loops.any():
        raise SelfLoopError(f"self-loop at vertex {int(e[loops][0, 0])}")
    if n < 2:
        raise GraphError(f"graph needs at least 2 vertices, got {n}")
    if len(e) and (e.min() < 0 or e.max() >= n):
        raise GraphError("edge endpoint out of range")
    both = np.vstack([e, e[:, ::-1]])
    adj = sp.csr_matrix((np.ones(len(both)), (both[:, 0], both[:, 1])), shape=(n, n))
    adj.sum_duplicates()
    adj.data[:] = 1.0
    adj.sort_indices()
    ncomp, _ = connected_components(adj, directed=False)
    if ncomp != 1:
        raise DisconnectedGraphError(f"graph has {ncomp} connected components")
    if labels is None:
        labels = np.arange(n)
    return Graph(
        indptr=adj.indptr.astype(np.int64),
        indices=adj.indices.astype(np.int64),
        labels=np.asarray(labels, dtype=np.int64),
    )


def load_edge_list(text) -> Graph:
    """Parse whitespace-separated ``u v`` pairs, one per line; ``#`` starts a comment.

    Arbitrary non-negative integer ids are compacted to ``0..n-1`` in sorted
    order and the originals are kept in ``Graph.labels``.
    """
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if len(toks) != 2 or not all(re.fullmatch(r"\d+", t) for t in toks):
            raise EdgeListParseError(f"line {lineno}: expected 'u v', got {raw!r}")
        pairs.append((int(toks[0]), int(toks[1])))
    if not pairs:
        raise EdgeListParseError("no edges found")
    raw_edges = np.array(pairs, dtype=np.int64)
    labels, compact = np.unique(raw_edges, return_inverse=True)
    return from_edges(len(labels), compact.reshape(-1, 2), labels=labels)


def laplacian_apply(g: Graph, x: np.ndarray) -> np.ndarray:
    """Return ``(D - A) x``; ``x`` may be a vector or an ``(n, k)`` block."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != g.n:
        raise ValueError(f"dimension mismatch: graph has {g.n} vertices, x has {x.shape[0]}")
    d = g.deg if x.ndim == 1 else g.deg[:, None]
    return d * x - g.adjacency @ x


def cut_stats(g: Graph, side) -> Cut:
    mask = np.zeros(g.n, dtype=bool)
    idx = np.unique(np.asarray(list(side), dtype=np.int64))
    if len(idx) and (idx[0] < 0 or idx[-1] >= g.n):
        raise ValueError("cut side contains an unknown vertex")
    mask[idx] = True
    k = int(mask.sum())
    if k == 0 or k == g.n:
        raise ValueError("cut side must be a nonempty proper subset of V")
    vol = int(g.deg[mask].sum())
    rows = np.repeat(mask, g.deg)
    boundary = int(np.count_nonzero(rows & ~mask[g.indices]))
    small = min(vol, g.total_volume - vol)
    return Cut(
        side=tuple(int(i) for i in idx),
        vol=vol,
        boundary=boundary,
        conductance=boundary / small,
        balance=small / g.total_volume,
    )


# --------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class GraphSpec:
    """Generator descriptor.

    kind is one of ``regular`` (n, d), ``planted`` (n, d, cross), ``clique`` (n),
    ``path`` (n) or ``dumbbell`` (n = clique size, or ``left``/``right`` sizes,
    ``bridge`` = number of edges on the connecting path).
    """

    kind: str
    n: int = 0
    d: int = 3
    cross: int = 1
    left: int = 0
    right: int = 0
    bridge: int = 1

    @classmethod
    def parse(cls, text: str) -> "GraphSpec":
        """Parse ``kind:key=val,key=val`` (e.g. ``planted:n=200,d=3,cross=4``)."""
        kind, _, rest = text.partition(":")
        params = {}
        for item in filter(None, rest.split(",")):
            key, _, val = item.partition("=")
            params[key.strip()] = int(val)
        return cls(kind=kind.strip(), **params)


_MAX_RESTARTS = 2000


def _pair_stubs(rng: np.random.Generator, n: int, d: int, offset: int = 0) -> list:
    """Configuration-model pairing, resampling a partner on collision."""
    for _ in range(_MAX_RESTARTS):
        stubs = list(rng.permutation(np.repeat(np.arange(n), d)))
        seen = set()
        edges = []
        ok = True
        while stubs:
            u = stubs.pop()
            for _try in range(50):
                j = int(rng.integers(len(stubs)))
                v = stubs[j]
                key = (min(u, v), max(u, v))
                if v != u and key not in seen:
                    break
            else:
                ok = False
                break
            stubs[j] = stubs[-1]
            stubs.pop()
            seen.add(key)
            edges.append((int(key[0]) + offset, int(key[1]) + offset))
        if ok:
            return edges
    raise InfeasibleSpecError(f"could not build a simple {d}-regular graph on {n} vertices")


def _connected(n, edges) -> bool:
    e = np.asarray(edges)
    adj = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    return connected_components(adj, directed=False)[0] == 1


def _regular_edges(rng, n, d, offset=0):
    if d < 1 or d >= n or (n * d) % 2:
        raise InfeasibleSpecError(f"no simple {d}-regular graph on {n} vertices")
    for _ in range(_MAX_RESTARTS):
        edges = _pair_stubs(rng, n, d)
        if _connected(n, edges):
            return [(u + offset, v + offset) for u, v in edges]
    raise InfeasibleSpecError(f"could not sample a connected {d}-regular graph on {n} vertices")


def _clique_edges(n, offset=0):
    return [(i + offset, j + offset) for i in range(n) for j in range(i + 1, n)]


def generate(spec, seed: int = 0) -> Graph:
    """Build a test graph; output is a deterministic function of ``(spec, seed)``."""
    if isinstance(spec, str):
        spec = GraphSpec.parse(spec)
    elif isinstance(spec, Mapping):
        spec = GraphSpec(**spec)
    rng = np.random.default_rng(seed)
    kind, n = spec.kind, spec.n

    if kind == "clique":
        if n < 2:
            raise InfeasibleSpecError("clique needs n >= 2")
        return from_edges(n, _clique_edges(n))
    if kind == "path":
        if n < 2:
            raise InfeasibleSpecError("path needs n >= 2")
        return from_edges(n, [(i, i + 1) for i in range(n - 1)])
    if kind == "regular":
        return from_edges(n, _regular_edges(rng, n, spec.d))
    if kind == "planted":
        if n % 2:
            raise InfeasibleSpecError("planted bisection needs even n")
        h = n // 2
        if not 1 <= spec.cross <= h:
            raise InfeasibleSpecError(f"cross must be in [1, {h}]")
        edges = _regular_edges(rng, h, spec.d) + _regular_edges(rng, h, spec.d, offset=h)
        a = rng.choice(h, size=spec.cross, replace=False)
        b = rng.choice(h, size=spec.cross, replace=False) + h
        edges += [(int(u), int(v)) for u, v in zip(a, b)]
        return from_edges(n, edges)
    if kind == "dumbbell":
        left = spec.left or n
        right = spec.right or n
        if left < 2 or right < 2 or spec.bridge < 1:
            raise InfeasibleSpecError("dumbbell needs two cliques of size >= 2 and bridge >= 1")
        inner = spec.bridge - 1
        total = left + inner + right
        edges = _clique_edges(left) + _clique_edges(right, offset=left + inner)
        chain = [left - 1] + list(range(left, left + inner)) + [left + inner]
        edges += list(zip(chain[:-1], chain[1:]))
        return from_edges(total, edges)
    raise InfeasibleSpecError(f"unknown generator kind {kind!r}")
