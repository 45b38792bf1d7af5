"""Generators for lattice boxes, Sierpinski gasket and Vicsek graphs.

All generated graphs have unit edge weights and no killing term unless a
Dirichlet exhaustion is requested, in which case the box is cut out of a
slightly larger graph and the severed edges are folded into ``c``.
"""
from __future__ import annotations

import itertools

import numpy as np
import scipy.sparse as sp

from .graph import GraphError, WeightedGraph, dirichlet_restriction

MEASURE_MODES = ("degree", "unit")


def _coord_id(row) -> str:
    return ":".join(str(int(v)) for v in row)


def _from_coord_edges(coords: np.ndarray, edges: np.ndarray, measure_mode: str) -> WeightedGraph:
    """Build a unit-weight graph from vertex coordinates and index pairs."""
    if measure_mode not in MEASURE_MODES:
        raise GraphError(f"measure_mode must be one of {MEASURE_MODES}, got {measure_mode!r}")
    n = len(coords)
    if len(edges):
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        b = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    else:
        b = sp.csr_matrix((n, n))
    deg = np.asarray(b.sum(axis=1)).ravel()
    m = deg.copy() if measure_mode == "degree" else np.ones(n)
    if measure_mode == "degree" and np.any(m == 0):
        m[m == 0] = 1.0
    ids = tuple(_coord_id(r) for r in coords)
    return WeightedGraph(ids, b, np.zeros(n), m, coords)


def _dedupe(coords: np.ndarray, edges_xy: np.ndarray):
    """Map coordinate-valued edges ``(k, 2, dim)`` onto unique sorted vertices."""
    uniq, inverse = np.unique(coords, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    lookup = {tuple(r): i for i, r in enumerate(uniq)}
    e = np.array([[lookup[tuple(a)], lookup[tuple(b)]] for a, b in edges_xy], dtype=int)
    e = np.sort(e, axis=1)
    e = np.unique(e, axis=0)
    return uniq, e


def single_vertex(killing: float = 4.0, measure: float = 1.0, vid: str = "o") -> WeightedGraph:
    """One vertex with killing ``c = killing`` and no edges."""
    return WeightedGraph((vid,), sp.csr_matrix((1, 1)), np.array([killing]), np.array([measure]))


def two_vertex(weight: float = 1.0, killing=(1.0, 1.0), measure=(1.0, 1.0)) -> WeightedGraph:
    b = sp.csr_matrix(np.array([[0.0, weight], [weight, 0.0]]))
    return WeightedGraph(("o", "x"), b, np.asarray(killing, float), np.asarray(measure, float))


def path_graph(n: int, dirichlet: bool = False, measure_mode: str = "unit") -> WeightedGraph:
    """Path on ``n`` vertices, optionally with both ends attached to a killed exterior."""
    if n < 1:
        raise GraphError("path needs at least one vertex")
    total = n + 2 if dirichlet else n
    coords = np.arange(total).reshape(-1, 1) - (1 if dirichlet else 0)
    edges = np.column_stack([np.arange(total - 1), np.arange(1, total)])
    G = _from_coord_edges(coords, edges, measure_mode)
    if dirichlet:
        G = dirichlet_restriction(G, np.arange(1, n + 1))
    return G


def lattice_box(dim: int, radius: int, measure_mode: str = "degree") -> WeightedGraph:
    """Box ``{-radius..radius}^dim`` of the nearest-neighbour lattice."""
    if dim < 1 or radius < 0:
        raise GraphError("dim must be >= 1 and radius >= 0")
    side = 2 * radius + 1
    coords = np.array(list(itertools.product(range(-radius, radius + 1), repeat=dim)), dtype=int)
    flat = np.arange(side ** dim).reshape((side,) * dim)
    pairs = []
    for axis in range(dim):
        lo = np.take(flat, np.arange(side - 1), axis=axis).ravel()
        hi = np.take(flat, np.arange(1, side), axis=axis).ravel()
        pairs.append(np.column_stack([lo, hi]))
    edges = np.concatenate(pairs) if pairs else np.empty((0, 2), int)
    return _from_coord_edges(coords, edges, measure_mode)


def dirichlet_box(dim: int, radius: int, measure_mode: str = "degree") -> WeightedGraph:
    """Lattice box with Dirichlet boundary, emulating ``Z^dim`` near the origin.

    The measure is taken from the surrounding lattice, so with ``"degree"``
    every vertex carries ``m = 2 dim``.
    """
    outer = lattice_box(dim, radius + 1, measure_mode)
    inside = np.all(np.abs(outer.coords) <= radius, axis=1)
    return dirichlet_restriction(outer, inside)


def _gasket_edges(level: int):
    tri = np.array([[0, 0], [1, 0], [0, 1]])
    edges = np.array([[tri[0], tri[1]], [tri[1], tri[2]], [tri[0], tri[2]]])
    for n in range(level):
        s = 2 ** n
        shifts = np.array([[0, 0], [s, 0], [0, s]])
        edges = np.concatenate([edges + sh for sh in shifts])
    return edges


def sierpinski_gasket(level: int, measure_mode: str = "degree") -> WeightedGraph:
    """Level-``n`` Sierpinski gasket graph on ``3 (3^n + 1) / 2`` vertices.

    Vertices carry triangular-lattice coordinates ``(i, j)`` with
    ``i, j >= 0`` and ``i + j <= 2^n``; the corner ``(0, 0)`` comes first.
    """
    if level < 0:
        raise GraphError("level must be >= 0")
    exy = _gasket_edges(level)
    coords, edges = _dedupe(exy.reshape(-1, 2), exy)
    return _from_coord_edges(coords, edges, measure_mode)


def gasket_exhaustion(level: int, measure_mode: str = "degree") -> WeightedGraph:
    """Level-``n`` gasket at the corner ``(0, 0)`` seen as a piece of the infinite gasket.

    Built as the Dirichlet restriction of the level ``n + 1`` gasket, so the two
    far corners keep ``m = 4`` and receive ``c = 2``.
    """
    outer = sierpinski_gasket(level + 1, measure_mode)
    inside = outer.coords.sum(axis=1) <= 2 ** level
    return dirichlet_restriction(outer, inside)


def vicsek(level: int, measure_mode: str = "degree") -> WeightedGraph:
    """Level-``n`` Vicsek graph: a plus sign replicated five-fold per level.

    Copies are glued at arm tips; the vertex count obeys ``V_{n+1} = 5 V_n - 4``.
    """
    if level < 0:
        raise GraphError("level must be >= 0")
    arms = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]])
    edges = np.array([[[0, 0], a] for a in arms])
    for n in range(level):
        s = 2 * 3 ** n
        shifts = np.concatenate([[[0, 0]], s * arms])
        edges = np.concatenate([edges + sh for sh in shifts])
    coords, e = _dedupe(edges.reshape(-1, 2), edges)
    return _from_coord_edges(coords, e, measure_mode)


def natural_root(G: WeightedGraph):
    """Origin for lattices and Vicsek graphs, the corner for gaskets, else the first vertex."""
    if G.coords is not None:
        zero = np.flatnonzero(np.all(G.coords == 0, axis=1))
        if zero.size:
            return G.ids[zero[0]]
    return G.ids[0]


def known_exponents(name: str, dim: int = 2):
    """Volume dimension ``d`` and walk dimension ``beta`` of the infinite model graph, if known."""
    if name in ("lattice", "path"):
        return float(dim if name == "lattice" else 1), 2.0
    if name == "gasket":
        return float(np.log(3) / np.log(2)), float(np.log(5) / np.log(2))
    if name == "vicsek":
        d = float(np.log(5) / np.log(3))
        return d, d + 1.0
    return None, None
