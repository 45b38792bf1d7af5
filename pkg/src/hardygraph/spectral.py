"""Dense spectral calculus for the Laplacian in ``l^2(X, m)``.

The Laplacian is conjugated by ``sqrt(m)`` to a symmetric matrix ``H`` and
diagonalised once; every operator function (fractional powers, heat
semigroup, Green operator) is then a reweighting of the eigenvalues.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy import stats
from scipy.sparse import csgraph

from .graph import WeightedGraph, _as_vertex_function
from .io import write_csv


class SpectralError(ArithmeticError):
    """Raised when a spectral operation is undefined on the given spectrum."""


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Eigendecomposition of a finite graph Laplacian.

    ``vectors`` are orthonormal eigenvectors of ``H = M^{1/2} L M^{-1/2}``;
    the m-orthonormal eigenfunctions are ``vectors / sqrt(m)``.
    """

    graph: WeightedGraph
    eigenvalues: np.ndarray
    vectors: np.ndarray
    gap_tol: float

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def sqrt_m(self) -> np.ndarray:
        return np.sqrt(self.graph.m)

    @property
    def eigenvectors(self) -> np.ndarray:
        """m-orthonormal eigenfunctions as columns (a fresh array)."""
        return self.vectors / self.sqrt_m[:, None]

    @property
    def positive_gap(self) -> bool:
        return bool(self.eigenvalues[0] > self.gap_tol)

    @property
    def bottom(self) -> float:
        return float(self.eigenvalues[0])

    def index(self, v) -> int:
        if isinstance(v, (int, np.integer)) and v not in self.graph._index:
            if not 0 <= v < self.n:
                raise IndexError(f"vertex position {v} out of range")
            return int(v)
        return self.graph.index(v)

    def positive_mask(self) -> np.ndarray:
        return self.eigenvalues > self.gap_tol

    def require_gap(self, what="this operation"):
        if not self.positive_gap:
            raise SpectralError(
                f"{what} needs a positive spectral gap; bottom eigenvalue "
                f"{self.bottom:.3e} <= gap_tol {self.gap_tol:.3e}")


def eigendecompose(G: WeightedGraph, gap_tol: float | None = None) -> SpectralData:
    """Full symmetric eigendecomposition of the graph Laplacian.

    Eigenvalues below zero by rounding are clipped to ``0``. ``gap_tol``
    defaults to ``1e-12`` times the largest eigenvalue.
    """
    s = np.sqrt(G.m)
    h = -G.b.toarray()
    h[np.diag_indices(G.n)] += G.deg + G.c
    h /= s[:, None]
    h /= s[None, :]
    try:
        lam, U = scipy.linalg.eigh(h, overwrite_a=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigendecomposition failed: {exc}") from exc
    lam = np.maximum(lam, 0.0)
    if gap_tol is None:
        gap_tol = 1e-12 * float(lam[-1])
    lam.setflags(write=False)
    U.setflags(write=False)
    return SpectralData(G, lam, U, float(gap_tol))


def _evaluate(S: SpectralData, g, positive_only: bool) -> np.ndarray:
    lam = S.eigenvalues
    mask = S.positive_mask() if positive_only else np.ones(lam.shape, bool)
    vals = np.zeros_like(lam)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        vals[mask] = np.asarray(g(lam[mask]), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = lam[~np.isfinite(vals)]
        raise SpectralError(f"spectral function is singular at eigenvalue(s) {bad[:3]}")
    return vals


def apply_spectral_function(S: SpectralData, g: Callable, f, positive_only: bool = False) -> np.ndarray:
    """``g(L) f = sum_i g(lambda_i) <f, phi_i>_m phi_i``.

    With ``positive_only`` the sum skips eigenvalues at or below ``gap_tol``,
    i.e. ``g`` acts on the orthogonal complement of the kernel.
    """
    f = _as_vertex_function(S.graph, f)
    vals = _evaluate(S, g, positive_only)
    s = S.sqrt_m
    U = S.vectors
    if f.ndim == 1:
        return (U @ (vals * (U.T @ (s * f)))) / s
    return (U @ (vals[:, None] * (U.T @ (s[:, None] * f)))) / s[:, None]


def spectral_matrix(S: SpectralData, g: Callable, positive_only: bool = False, rows=None, cols=None) -> np.ndarray:
    """Matrix of ``g(L)`` acting on vertex functions (optionally a sub-block)."""
    vals = _evaluate(S, g, positive_only)
    s = S.sqrt_m
    U = S.vectors
    r = slice(None) if rows is None else rows
    c = slice(None) if cols is None else cols
    Ur = U[r]
    Uc = U[c]
    return ((Ur * vals) @ Uc.T) * (s[c][None, :] / s[r][:, None])


def spectral_column(S: SpectralData, g: Callable, o, positive_only: bool = False) -> np.ndarray:
    """``g(L) 1_o`` as a vertex function."""
    j = S.index(o)
    vals = _evaluate(S, g, positive_only)
    s = S.sqrt_m
    return (S.vectors @ (vals * S.vectors[j])) * (s[j] / s)


def heat_kernel_column(S: SpectralData, t, o) -> np.ndarray:
    """``p_t(., o)`` for one time or an array of times (rows)."""
    j = S.index(o)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr <= 0):
        raise ValueError("heat kernel needs t > 0")
    s = S.sqrt_m
    decay = np.exp(-np.outer(t_arr, S.eigenvalues))
    vals = (decay * S.vectors[j]) @ S.vectors.T / (s[j] * s)[None, :]
    return vals[0] if np.ndim(t) == 0 else vals


def heat_kernel(S: SpectralData, t: float, x, o) -> float:
    """``p_t(x, o) = sum_i exp(-lambda_i t) phi_i(x) phi_i(o)``."""
    if t <= 0:
        raise ValueError("heat kernel needs t > 0")
    i, j = S.index(x), S.index(o)
    w = np.exp(-t * S.eigenvalues)
    return float(np.sum(w * S.vectors[i] * S.vectors[j]) / (S.sqrt_m[i] * S.sqrt_m[j]))


@dataclass(frozen=True)
class HeatKernelGrid:
    root: int
    times: np.ndarray
    values: np.ndarray


def heat_kernel_grid(S: SpectralData, o, times, method: str = "uniformized") -> HeatKernelGrid:
    """``p_t(x, o)`` for all ``x`` on a time grid (rows are times).

    The default positive series keeps every value strictly positive; the
    spectral sum loses relative accuracy once ``p_t(x, o)`` drops below
    rounding of the diagonal and may even turn slightly negative.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) <= 0) or np.any(times <= 0):
        raise ValueError("time grid must be strictly increasing and positive")
    j = S.index(o)
    if method == "uniformized":
        values = heat_kernel_uniformized(S.graph, times, j)
    elif method == "spectral":
        values = heat_kernel_column(S, times, j)
    else:
        raise ValueError(f"unknown method {method!r}")
    return HeatKernelGrid(j, times, np.atleast_2d(values))


def survival(S: SpectralData, t: float, x=None):
    """``q_t(x) = sum_y p_t(x, y) m(y)``; all vertices when ``x`` is None."""
    if t <= 0:
        raise ValueError("survival needs t > 0")
    q = apply_spectral_function(S, lambda lam: np.exp(-t * lam), np.ones(S.n))
    return q if x is None else float(q[S.index(x)])


def green_column(S: SpectralData, o) -> np.ndarray:
    """``G(., o)``, the solution of ``L u = 1_o``."""
    S.require_gap("the Green function")
    return spectral_column(S, lambda lam: 1.0 / lam, o)


def green_function(S: SpectralData, x, o) -> float:
    return float(green_column(S, o)[S.index(x)])


def green_operator(S: SpectralData, k) -> np.ndarray:
    """``Gk(x) = sum_y G(x, y) k(y)``."""
    S.require_gap("the Green operator")
    return apply_spectral_function(S, lambda lam: 1.0 / lam, k)


def heat_kernel_uniformized(G: WeightedGraph, times, o, kmax: int | None = None) -> np.ndarray:
    """Heat kernel column ``p_t(., o)`` by a positive Poisson series.

    With ``nu >= max (deg + c)/m`` the matrix ``P = I - L/nu`` is entrywise
    non-negative and ``exp(-tL) = sum_k Pois(k; nu t) P^k``. Every term is
    non-negative, so tiny off-diagonal values keep full relative precision.
    Independent of any eigendecomposition.
    """
    j = G.index(o) if not isinstance(o, (int, np.integer)) else int(o)
    t_arr = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(t_arr <= 0):
        raise ValueError("heat kernel needs t > 0")
    rate = (G.deg + G.c) / G.m
    nu = float(rate.max()) if rate.max() > 0 else 1.0
    P = sp.identity(G.n, format="csr") - sp.diags(1.0 / (nu * G.m)) @ (
        sp.diags(G.deg + G.c) - G.b)
    P = sp.csr_matrix(P)
    P.data = np.maximum(P.data, 0.0)
    mu = nu * t_arr
    if kmax is None:
        # terms past the eccentricity decay super-exponentially relative to the leading ones
        ecc = 0 if G.n == 1 else int(csgraph.shortest_path(
            G.b, directed=False, unweighted=True, indices=j).max())
        kmax = int(np.ceil(mu.max() + 20.0 * np.sqrt(mu.max()) + 3 * ecc + 60))
    v = np.zeros(G.n)
    v[j] = 1.0
    out = np.zeros((t_arr.size, G.n))
    for k in range(kmax + 1):
        out += stats.poisson.pmf(k, mu)[:, None] * v[None, :]
        v = P @ v
    out /= G.m[j]
    return out[0] if np.ndim(times) == 0 else out


def write_spectrum_csv(path, S: SpectralData):
    return write_csv(path, ["index", "lambda"], ((i, lam) for i, lam in enumerate(S.eigenvalues)))
