"""Weighted graphs ``(b, c)`` over a discrete measure space ``(X, m)``.

Edge weights are kept as a symmetric ``scipy.sparse`` CSR matrix so that the
fractal generators can produce graphs with tens of thousands of vertices;
dense matrices only appear once a graph is handed to :mod:`hardygraph.spectral`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph


class GraphError(ValueError):
    """Raised for malformed graph input."""


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Connected, locally finite weighted graph.

    Attributes
    ----------
    ids : tuple of str
        Vertex ids in canonical order. Every dense vector uses this order.
    b : scipy.sparse.csr_matrix
        Symmetric edge weights with zero diagonal.
    c : ndarray
        Killing term, ``c >= 0``.
    m : ndarray
        Vertex measure, ``m > 0``.
    coords : ndarray or None
        Optional integer coordinates, one row per vertex.
    """

    ids: tuple
    b: sp.csr_matrix
    c: np.ndarray
    m: np.ndarray
    coords: np.ndarray | None = None
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.ids)
        b = sp.csr_matrix(self.b, dtype=float)
        b.sum_duplicates()
        b.eliminate_zeros()
        c = np.array(self.c, dtype=float).reshape(-1)
        m = np.array(self.m, dtype=float).reshape(-1)
        if n == 0:
            raise GraphError("graph has no vertices")
        if b.shape != (n, n) or c.shape != (n,) or m.shape != (n,):
            raise GraphError("inconsistent array shapes")
        index = {}
        for i, v in enumerate(self.ids):
            if v in index:
                raise GraphError(f"duplicate vertex id {v!r}")
            index[v] = i
        if not np.all(np.isfinite(m)) or np.any(m <= 0):
            raise GraphError("measure m must be strictly positive")
        if not np.all(np.isfinite(c)) or np.any(c < 0):
            raise GraphError("killing term c must be non-negative")
        if b.nnz and (np.any(b.data < 0) or not np.all(np.isfinite(b.data))):
            raise GraphError("edge weights must be non-negative and finite")
        if b.diagonal().any():
            raise GraphError("edge weights must have zero diagonal")
        if (abs(b - b.T) > 1e-14 * max(1.0, abs(b).max())).nnz:
            raise GraphError("edge weights are not symmetric")
        if n > 1:
            ncomp, _ = csgraph.connected_components(b, directed=False)
            if ncomp != 1:
                raise GraphError(f"graph is disconnected ({ncomp} components)")
        c.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "_index", index)
        if self.coords is not None:
            coords = np.array(self.coords)
            coords.setflags(write=False)
            object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def n_edges(self) -> int:
        return self.b.nnz // 2

    @property
    def deg(self) -> np.ndarray:
        return np.asarray(self.b.sum(axis=1)).ravel()

    def index(self, vertex) -> int:
        """Position of ``vertex`` in the canonical ordering."""
        try:
            return self._index[vertex]
        except KeyError:
            raise GraphError(f"unknown vertex {vertex!r}") from None

    def edges(self):
        """Yield ``(i, j, weight)`` with ``i < j`` in ascending order."""
        coo = sp.triu(self.b, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        for k in order:
            yield int(coo.row[k]), int(coo.col[k]), float(coo.data[k])

    def has_killing(self) -> bool:
        return bool(np.any(self.c > 0))

    def laplacian_matrix(self) -> np.ndarray:
        """Dense matrix of the formal Laplacian, ``(D + C - B) / m`` row-wise."""
        h = -self.b.toarray()
        h[np.diag_indices(self.n)] += self.deg + self.c
        return h / self.m[:, None]


def build_graph(vertex_records: Iterable[Sequence], edge_records: Iterable[Sequence],
                coords=None) -> WeightedGraph:
    """Assemble a graph from ``(id, m, c)`` and ``(id1, id2, b)`` records.

    An edge may be listed in both directions as long as the weights agree.
    """
    ids, m, c = [], [], []
    for rec in vertex_records:
        vid, mv, cv = rec
        ids.append(str(vid))
        m.append(float(mv))
        c.append(float(cv))
    index = {}
    for i, v in enumerate(ids):
        if v in index:
            raise GraphError(f"duplicate vertex id {v!r}")
        index[v] = i

    weights = {}
    for rec in edge_records:
        u, v, w = str(rec[0]), str(rec[1]), float(rec[2])
        if u not in index or v not in index:
            raise GraphError(f"edge ({u}, {v}) references an unknown vertex")
        if u == v:
            raise GraphError(f"self loop at {u!r}")
        if not w > 0:
            raise GraphError(f"edge ({u}, {v}) has nonpositive weight {w}")
        key = (min(index[u], index[v]), max(index[u], index[v]))
        if key in weights and weights[key] != w:
            raise GraphError(f"conflicting weights for edge ({u}, {v})")
        weights[key] = w

    n = len(ids)
    if weights:
        ij = np.array(sorted(weights), dtype=int)
        w = np.array([weights[tuple(k)] for k in ij])
        rows = np.concatenate([ij[:, 0], ij[:, 1]])
        cols = np.concatenate([ij[:, 1], ij[:, 0]])
        b = sp.csr_matrix((np.concatenate([w, w]), (rows, cols)), shape=(n, n))
    else:
        b = sp.csr_matrix((n, n))
    return WeightedGraph(tuple(ids), b, np.array(c), np.array(m), coords)


def _as_vertex_function(G: WeightedGraph, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape[0] != G.n or f.ndim > 2:
        raise GraphError(f"vertex function has shape {f.shape}, graph has {G.n} vertices")
    return f


def apply_laplacian(G: WeightedGraph, f) -> np.ndarray:
    """Formal Laplacian ``(1/m) sum_y b(x,y)(f(x)-f(y)) + (c/m) f``.

    ``f`` may be a vector or a matrix whose columns are vertex functions.
    """
    f = _as_vertex_function(G, f)
    scale = (G.deg + G.c) / G.m
    inv_m = 1.0 / G.m
    if f.ndim == 1:
        return scale * f - inv_m * (G.b @ f)
    return scale[:, None] * f - inv_m[:, None] * (G.b @ f)


def quadratic_form(G: WeightedGraph, f) -> float:
    """Energy ``1/2 sum b(x,y)(f(x)-f(y))^2 + sum c f^2``."""
    f = _as_vertex_function(G, f)
    if f.ndim != 1:
        raise GraphError("quadratic_form expects a single vertex function")
    coo = sp.triu(G.b, k=1).tocoo()
    diff = f[coo.row] - f[coo.col]
    return float(np.sum(coo.data * diff * diff) + np.sum(G.c * f * f))


@dataclass(frozen=True)
class MetricAnnotation:
    """Combinatorial distances from a root and the balls they induce."""

    root: int
    dist: np.ndarray
    balls: tuple

    @property
    def radius(self) -> int:
        return int(self.dist.max())

    def ball(self, r) -> np.ndarray:
        r = int(min(max(r, 0), self.radius))
        return self.balls[r]

    def sphere(self, r) -> np.ndarray:
        return np.flatnonzero(self.dist == r)


def metric_annotation(G: WeightedGraph, o) -> MetricAnnotation:
    """Hop distances from ``o`` over positive-weight edges.

    ``o`` may be a vertex id or an integer position.
    """
    root = o if isinstance(o, (int, np.integer)) and o not in G._index else G.index(o)
    if not 0 <= root < G.n:
        raise GraphError(f"unknown root {o!r}")
    if G.n == 1:
        dist = np.zeros(1, dtype=int)
    else:
        d = csgraph.shortest_path(G.b, directed=False, unweighted=True, indices=root)
        dist = d.astype(int)
    order = np.argsort(dist, kind="stable")
    counts = np.cumsum(np.bincount(dist))
    balls = tuple(np.sort(order[:k]) for k in counts)
    dist.setflags(write=False)
    return MetricAnnotation(int(root), dist, balls)


def dirichlet_restriction(G: WeightedGraph, K) -> WeightedGraph:
    """Induced graph on ``K`` with edges leaving ``K`` folded into the killing term.

    ``K`` is an iterable of vertex ids or a boolean/integer index array.
    """
    idx = _vertex_indices(G, K)
    if idx.size == 0:
        raise GraphError("restriction set is empty")
    mask = np.zeros(G.n, dtype=bool)
    mask[idx] = True
    b_in = G.b[idx][:, idx]
    outgoing = np.asarray(G.b[idx][:, ~mask].sum(axis=1)).ravel()
    coords = None if G.coords is None else G.coords[idx]
    return WeightedGraph(tuple(G.ids[i] for i in idx), b_in, G.c[idx] + outgoing,
                         G.m[idx], coords)


def _vertex_indices(G: WeightedGraph, K) -> np.ndarray:
    arr = np.asarray(list(K) if not isinstance(K, np.ndarray) else K)
    if arr.dtype == bool:
        if arr.shape != (G.n,):
            raise GraphError("boolean mask has wrong length")
        return np.flatnonzero(arr)
    if arr.size and np.issubdtype(arr.dtype, np.integer):
        return np.unique(arr)
    return np.unique(np.array([G.index(v) for v in arr], dtype=int))


def boundary_distance(G: WeightedGraph, metric: MetricAnnotation) -> int:
    """Distance from the root to the nearest killed vertex (or the eccentricity).

    On a Dirichlet exhaustion this is the radius of the largest ball that does
    not touch the folded boundary.
    """
    killed = G.c > 0
    killed[metric.root] = False
    if not killed.any():
        return metric.radius
    return int(metric.dist[killed].min())
