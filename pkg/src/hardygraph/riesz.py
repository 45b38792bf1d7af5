"""Riesz kernels ``k_alpha = L^{-alpha} 1_o``, Hardy weights and their checks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .fractional import FractionalGraph, QuadratureSpec, QuadratureError, SpectralForm, moment_column
from .graph import GraphError, WeightedGraph, _as_vertex_function, apply_laplacian
from .spectral import SpectralData, SpectralError, apply_spectral_function, spectral_column

METHODS = ("spectral", "quadrature")


def _key(alpha) -> float:
    return round(float(alpha), 12)


@dataclass(frozen=True)
class RieszKernel:
    alpha: float
    values: np.ndarray
    method: str
    error: float


@dataclass
class RieszKernelTable:
    """Kernels ``k_alpha`` for one root, keyed by ``alpha``."""

    root: int
    entries: dict = field(default_factory=dict)

    def add(self, kernel: RieszKernel):
        self.entries[_key(kernel.alpha)] = kernel

    def get(self, alpha) -> RieszKernel:
        try:
            return self.entries[_key(alpha)]
        except KeyError:
            raise KeyError(f"no Riesz kernel for alpha={alpha}") from None

    def __contains__(self, alpha) -> bool:
        return _key(alpha) in self.entries

    @property
    def alphas(self) -> list:
        return sorted(self.entries)


def riesz_kernel_spectral(S: SpectralData, alpha: float, o) -> np.ndarray:
    """``k_alpha(x) = sum_i lambda_i^{-alpha} phi_i(x) phi_i(o) m(o)``; ``k_0 = 1_o``."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    j = S.index(o)
    if alpha == 0:
        out = np.zeros(S.n)
        out[j] = 1.0
        return out
    S.require_gap("the Riesz kernel")
    return spectral_column(S, lambda lam: lam ** (-alpha), j)


def riesz_kernel_quadrature(S: SpectralData, alpha: float, o, quad: QuadratureSpec | None = None):
    """``k_alpha`` from its heat-semigroup integral; returns ``(values, error_bound)``."""
    quad = quad or QuadratureSpec()
    values, err = moment_column(S, S.index(o), alpha, quad)
    if err > quad.tol:
        raise QuadratureError(f"Riesz kernel error bound {err:.3e} exceeds tolerance {quad.tol:.3e}")
    return values, err


def riesz_table(S: SpectralData, o, alphas, method: str = "spectral",
                quad: QuadratureSpec | None = None) -> RieszKernelTable:
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    j = S.index(o)
    table = RieszKernelTable(j)
    for a in sorted({_key(a) for a in alphas}):
        if a == 0 or method == "spectral":
            table.add(RieszKernel(a, riesz_kernel_spectral(S, a, j), "spectral", 0.0))
        else:
            vals, err = riesz_kernel_quadrature(S, a, j, quad)
            table.add(RieszKernel(a, vals, "quadrature", err))
    return table


@dataclass(frozen=True)
class HardyWeight:
    """``w = k_{alpha - sigma} / k_alpha`` with its ground-state candidate ``k_alpha``."""

    sigma: float
    alpha: float
    values: np.ndarray
    ground_state: np.ndarray
    root: int

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.values > 0)


def hardy_weight(kernels: RieszKernelTable, sigma: float, alpha: float) -> HardyWeight:
    if alpha < sigma - 1e-12:
        raise ValueError(f"need alpha >= sigma, got alpha={alpha}, sigma={sigma}")
    lower = kernels.get(max(alpha - sigma, 0.0)).values
    k = kernels.get(alpha).values
    if np.any(k <= 0):
        raise SpectralError("Riesz kernel is not strictly positive")
    w = lower / k
    return HardyWeight(float(sigma), float(alpha), w, k, kernels.root)


def hardy_weight_spectral(S: SpectralData, sigma: float, alpha: float, o) -> HardyWeight:
    table = riesz_table(S, o, [alpha, max(alpha - sigma, 0.0)])
    return hardy_weight(table, sigma, alpha)


def _max_rel(a, b) -> float:
    scale = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


def verify_intertwining(S: SpectralData, sigma: float, alpha: float, o) -> dict:
    """Residuals of ``L^sigma k_alpha = k_{alpha-sigma}`` and ``k_alpha = G^sigma k_{alpha-sigma}``.

    Both are relative to the sup norm of the right-hand side.
    """
    if alpha < sigma:
        raise ValueError("need alpha >= sigma")
    S.require_gap("intertwining")
    k = riesz_kernel_spectral(S, alpha, o)
    lower = riesz_kernel_spectral(S, alpha - sigma, o)
    up = apply_spectral_function(S, lambda lam: lam ** sigma, k)
    back = apply_spectral_function(S, lambda lam: lam ** (-sigma), lower)
    return {"operator": _max_rel(up, lower), "green": _max_rel(back, k)}


@dataclass(frozen=True)
class PencilResult:
    """Bottom of ``Q^sigma(f) / sum m w f^2`` and its minimiser on the whole graph."""

    lambda_min: float
    minimizer: np.ndarray
    support: np.ndarray


def _form_of(S, sigma):
    if isinstance(S, SpectralData):
        return SpectralForm(S, sigma)
    return S


def pencil_minimum(form, weight, restrict=None) -> PencilResult:
    """Smallest generalized eigenvalue of ``(A, diag(m w))`` over functions on ``restrict``.

    ``form`` exposes ``m`` and ``submatrix(idx)`` (the form matrix ``M L^sigma``).
    Vertices of ``restrict`` outside ``supp w`` carry no mass; they are
    eliminated by a Schur complement so the minimum is exact over all
    functions supported in ``restrict``.
    """
    w = np.asarray(weight, dtype=float)
    m = np.asarray(form.m, dtype=float)
    n = m.size
    if w.shape != (n,):
        raise GraphError("weight has wrong length")
    if np.any(w < 0):
        raise ValueError("weight must be non-negative")
    R = np.arange(n) if restrict is None else np.asarray(restrict, dtype=int)
    if R.size == 0:
        raise ValueError("empty restriction set")
    wR = w[R]
    on = wR > 0
    if not on.any():
        raise ValueError("weight vanishes identically on the restriction set")
    A = form.submatrix(R)
    P, N = np.flatnonzero(on), np.flatnonzero(~on)
    App = A[np.ix_(P, P)]
    if N.size:
        Anp = A[np.ix_(N, P)]
        cf = scipy.linalg.cho_factor(A[np.ix_(N, N)])
        App = App - Anp.T @ scipy.linalg.cho_solve(cf, Anp)
    d = np.sqrt(m[R][P] * wR[P])
    C = App / d[:, None] / d[None, :]
    C = 0.5 * (C + C.T)
    lam, vec = scipy.linalg.eigh(C, subset_by_index=[0, 0])
    yP = vec[:, 0] / d
    full = np.zeros(R.size)
    full[P] = yP
    if N.size:
        full[N] = -scipy.linalg.cho_solve(cf, Anp @ yP)
    phi = np.zeros(n)
    phi[R] = full
    if phi[np.argmax(np.abs(phi))] < 0:
        phi = -phi
    return PencilResult(float(lam[0]), phi, R[P])


def verify_hardy(S, sigma: float, w) -> PencilResult:
    """Hardy inequality on a finite graph as a generalized eigenproblem.

    ``S`` is a :class:`SpectralData` (the form is ``M L^sigma``) or any form
    object such as a :class:`FractionalGraph`. ``lambda_min >= 1`` iff
    ``Q^sigma(f) >= sum m w f^2`` for every ``f``.
    """
    values = w.values if isinstance(w, HardyWeight) else np.asarray(w, dtype=float)
    if not np.any(values > 0):
        raise ValueError("weight is identically zero")
    return pencil_minimum(_form_of(S, sigma), values)


def cosine_distance(u, v, weight) -> float:
    """``1 - |<u, v>| / (|u| |v|)`` in the inner product with density ``weight``."""
    u, v, weight = (np.asarray(a, dtype=float) for a in (u, v, weight))
    uv = np.sum(weight * u * v)
    nu = np.sqrt(np.sum(weight * u * u))
    nv = np.sqrt(np.sum(weight * v * v))
    return float(max(0.0, 1.0 - abs(uv) / (nu * nv)))


def _upper_edges(b):
    if sp.issparse(b):
        coo = sp.triu(b, k=1).tocoo()
        return coo.row, coo.col, coo.data
    i, j = np.triu_indices(b.shape[0], k=1)
    return i, j, np.asarray(b)[i, j]


def ground_state_transform_check(G, v, phi) -> float:
    """Relative residual of ``Q(phi) = Q_v(phi/v) + sum m (Lv / v) phi^2``.

    ``G`` is a :class:`WeightedGraph` or a :class:`FractionalGraph`.
    The residual is divided by ``max(1, Q(phi))``.
    """
    v = np.asarray(v, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(v <= 0):
        raise ValueError("v must be strictly positive")
    if isinstance(G, FractionalGraph):
        b, c, m = G.b, G.c, G.m
        Lv = G.apply(v)
    else:
        _as_vertex_function(G, v)
        b, c, m = G.b, G.c, G.m
        Lv = apply_laplacian(G, v)
    i, j, bij = _upper_edges(b)
    q = float(np.sum(bij * (phi[i] - phi[j]) ** 2) + np.sum(c * phi * phi))
    psi = phi / v
    qv = float(np.sum(bij * v[i] * v[j] * (psi[i] - psi[j]) ** 2))
    pot = float(np.sum(m * (Lv / v) * phi * phi))
    return abs(q - qv - pot) / max(1.0, abs(q))
