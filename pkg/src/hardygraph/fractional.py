"""Fractional powers ``L^sigma`` as graphs ``(b_sigma, c_sigma)`` over ``(X, m)``.

Two independent routes are provided. The spectral route reads the weights
off the matrix of ``L^sigma``. The quadrature route integrates the heat
semigroup against ``t^{-1-sigma}`` (or ``t^{a-1}`` for Riesz/Green kernels):

* on ``[0, T_split]`` the semigroup is expanded in its Taylor series in the
  symmetrised Laplacian and every power of ``t`` is integrated exactly;
* on ``[T_split, T_max]`` composite Gauss-Legendre in ``s = log t`` is used,
  with ``T_max`` chosen from the bottom of the spectrum so the dropped tail
  stays below a quarter of the tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .graph import WeightedGraph, _as_vertex_function
from .io import write_graph
from .spectral import SpectralData, SpectralError, spectral_column, spectral_matrix


class QuadratureError(ArithmeticError):
    """Raised when the quadrature error bound exceeds the requested tolerance."""


def gamma_magnitude(z: float) -> float:
    """``|Gamma(z)|`` for ``z > 0`` or ``-1 < z < 0``.

    The negative range uses the reflection
    ``Gamma(-s) = -pi / (s sin(pi s) Gamma(s))``.
    """
    if z > 0:
        return math.exp(math.lgamma(z))
    if -1 < z < 0:
        s = -z
        return math.pi / (s * math.sin(math.pi * s) * math.exp(math.lgamma(s)))
    raise ValueError(f"gamma_magnitude is defined here for z > 0 or -1 < z < 0, got {z}")


@dataclass(frozen=True)
class QuadratureSpec:
    """Controls for the semigroup quadrature.

    ``t_split`` defaults to ``0.5 / lambda_max``; ``series_terms`` caps the
    Taylor expansion used below it and ``nodes`` is the Gauss-Legendre order
    per panel of width ``panel_width`` in ``log t`` above it.
    """

    tol: float = 1e-8
    t_split: float | None = None
    series_terms: int = 60
    nodes: int = 16
    panel_width: float = 0.25

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("quadrature tolerance must be positive")
        if self.series_terms < 8 or self.nodes < 8:
            raise ValueError("need at least 8 nodes/terms per regime")
        if self.t_split is not None and not self.t_split > 0:
            raise ValueError("t_split must be positive")
        if not self.panel_width > 0:
            raise ValueError("panel_width must be positive")


def _split_time(S: SpectralData, quad: QuadratureSpec) -> float:
    if quad.t_split is not None:
        return quad.t_split
    top = float(S.eigenvalues[-1])
    return 0.5 / top if top > 0 else 1.0


def _tail_integral(lam0: float, T: float, p: float) -> float:
    """Bound on ``int_T^inf exp(-lam0 t) t^p dt``."""
    a = p + 1.0
    if a > 0:
        return math.exp(math.lgamma(a)) * special.gammaincc(a, lam0 * T) / lam0 ** a
    return T ** p * math.exp(-lam0 * T) / lam0


def _upper_time(lam0: float, T: float, p: float, budget: float) -> float:
    hi = max(T, 1.0 / lam0)
    while _tail_integral(lam0, hi, p) > budget:
        hi *= 2.0
        if hi > 1e300:
            raise QuadratureError("cannot bound the large-time tail")
    return hi


def _gl_moments(lam: np.ndarray, p: float, T0: float, T1: float, quad: QuadratureSpec, nodes: int) -> np.ndarray:
    """``int_{T0}^{T1} exp(-lam t) t^p dt`` per eigenvalue, Gauss-Legendre in ``log t``."""
    if T1 <= T0:
        return np.zeros_like(lam)
    s0, s1 = math.log(T0), math.log(T1)
    panels = max(1, int(math.ceil((s1 - s0) / quad.panel_width)))
    edges = np.linspace(s0, s1, panels + 1)
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    s = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    ws = (half[:, None] * w[None, :]).ravel()
    t = np.exp(s)
    weights = ws * t ** (p + 1.0)
    out = np.zeros_like(lam)
    # chunk over nodes to bound memory on larger spectra
    step = max(1, 2_000_000 // max(1, lam.size))
    for k in range(0, t.size, step):
        out += np.exp(-np.outer(lam, t[k:k + step])) @ weights[k:k + step]
    return out


class _Semigroup:
    """Shared pieces of the two-regime quadrature for one spectral decomposition."""

    def __init__(self, S: SpectralData, quad: QuadratureSpec):
        self.S = S
        self.quad = quad
        self.T = _split_time(S, quad)
        self.top = float(S.eigenvalues[-1])
        self.zero = ~S.positive_mask()
        lam = S.eigenvalues
        self.lam_decay = float(lam[~self.zero][0]) if np.any(~self.zero) else 0.0

    def _h_matrix(self) -> np.ndarray:
        G = self.S.graph
        s = self.S.sqrt_m
        h = -G.b.toarray()
        h[np.diag_indices(G.n)] += G.deg + G.c
        return h / s[:, None] / s[None, :]

    def series_coefficients(self, power: float, first: int):
        """``c_k = (-1)^k T^(k+power+1) / (k! (k+power+1))`` and a remainder bound."""
        T, a = self.T, power + 1.0
        coefs = []
        for k in range(first, first + self.quad.series_terms):
            coefs.append((-1) ** k * T ** (k + a) / (math.factorial(k) * (k + a)))
        K = first + self.quad.series_terms
        remainder = self.top ** K * T ** (K + a) / (math.factorial(K) * (K + a)) * 2.0
        return coefs, remainder

    def series_matrix(self, power: float, first: int):
        """``sum_k c_k H^k`` (full matrix) for the small-time regime."""
        H = self._h_matrix()
        coefs, rem = self.series_coefficients(power, first)
        n = H.shape[0]
        Hk = np.linalg.matrix_power(H, first) if first else np.eye(n)
        acc = np.zeros((n, n))
        for c in coefs:
            acc += c * Hk
            Hk = Hk @ H
        return acc, rem

    def series_vector(self, v: np.ndarray, power: float, first: int):
        """``sum_k c_k H^k v`` for the small-time regime."""
        H = self._h_matrix()
        coefs, rem = self.series_coefficients(power, first)
        vk = v.copy()
        for _ in range(first):
            vk = H @ vk
        acc = np.zeros_like(v)
        for c in coefs:
            acc += c * vk
            vk = H @ vk
        return acc, rem * np.linalg.norm(v)

    def moments(self, power: float, scale: float, allow_zero_modes: bool):
        """Per-eigenvalue ``int_T^inf exp(-lam t) t^power dt`` with error estimate."""
        lam = self.S.eigenvalues
        budget = self.quad.tol / 4.0 / max(scale, 1e-300)
        if np.any(self.zero):
            if not allow_zero_modes:
                raise SpectralError("quadrature needs a positive spectral gap")
            if power >= -1:
                raise SpectralError("zero mode makes the time integral diverge")
        T1 = _upper_time(self.lam_decay, self.T, power, budget) if self.lam_decay > 0 else self.T
        J = _gl_moments(lam, power, self.T, T1, self.quad, self.quad.nodes)
        J_coarse = _gl_moments(lam, power, self.T, T1, self.quad, self.quad.nodes // 2)
        J[self.zero] = self.T ** (power + 1.0) / -(power + 1.0)
        J_coarse[self.zero] = J[self.zero]
        tail = _tail_integral(self.lam_decay, T1, power) if self.lam_decay > 0 else 0.0
        err = float(np.max(np.abs(J - J_coarse))) + tail
        return J, err


def moment_column(S: SpectralData, o, a: float, quad: QuadratureSpec | None = None):
    """``(1/Gamma(a)) int_0^inf m(o) p_t(., o) t^(a-1) dt`` by quadrature.

    This is ``L^{-a} 1_o``: the Riesz kernel ``k_a`` and, for ``a <= 1``, the
    fractional Green function ``G^a(., o)``. Returns ``(values, error_bound)``.
    """
    if not a > 0:
        raise ValueError("moment order must be positive")
    quad = quad or QuadratureSpec()
    S.require_gap("the Riesz kernel integral")
    eng = _Semigroup(S, quad)
    j = S.index(o)
    s = S.sqrt_m
    e = np.zeros(S.n)
    e[j] = 1.0
    small, rem = eng.series_vector(e, a - 1.0, 0)
    ratio = s[j] / s
    scale = float(ratio.max()) / gamma_magnitude(a)
    J, err = eng.moments(a - 1.0, scale, allow_zero_modes=False)
    U = S.vectors
    large = U @ (J * U[j])
    values = ratio * (small + large) / gamma_magnitude(a)
    return values, (err + rem) * scale


@dataclass(frozen=True, eq=False)
class FractionalGraph:
    """Graph ``(b_sigma, c_sigma)`` over ``(X, m)`` representing ``L^sigma``.

    ``b`` is dense: on a connected base graph every off-diagonal entry is
    strictly positive.
    """

    sigma: float
    base: WeightedGraph
    b: np.ndarray
    c: np.ndarray
    method: str = "spectral"
    error: float = 0.0

    @property
    def m(self) -> np.ndarray:
        return self.base.m

    @property
    def n(self) -> int:
        return self.base.n

    def submatrix(self, idx=None) -> np.ndarray:
        """Matrix of the form ``Q^sigma`` on functions supported in ``idx``."""
        diag = self.b.sum(axis=1) + self.c
        A = np.diag(diag) - self.b
        if idx is None:
            return A
        return A[np.ix_(idx, idx)]

    def apply(self, f) -> np.ndarray:
        """``L^sigma f`` through the graph representation."""
        f = _as_vertex_function(self.base, f)
        diag = (self.b.sum(axis=1) + self.c) / self.m
        if f.ndim == 1:
            return diag * f - (self.b @ f) / self.m
        return diag[:, None] * f - (self.b @ f) / self.m[:, None]

    def quadratic_form(self, f) -> float:
        f = np.asarray(f, dtype=float)
        diff = f[:, None] - f[None, :]
        return float(0.5 * np.sum(self.b * diff * diff) + np.sum(self.c * f * f))

    def as_graph(self) -> WeightedGraph:
        import scipy.sparse as sp

        return WeightedGraph(self.base.ids, sp.csr_matrix(self.b), np.maximum(self.c, 0.0),
                             self.base.m, self.base.coords)


class SpectralForm:
    """Lazily evaluated form matrix ``M L^sigma`` straight from a decomposition.

    Avoids materialising the dense ``b_sigma`` on large graphs when only a
    sub-block is needed.
    """

    def __init__(self, S: SpectralData, sigma: float):
        if not 0 < sigma <= 1:
            raise ValueError("sigma must lie in (0, 1]")
        self.S = S
        self.sigma = float(sigma)
        self._vals = np.where(S.positive_mask(), S.eigenvalues, 0.0) ** self.sigma

    @property
    def m(self) -> np.ndarray:
        return self.S.graph.m

    @property
    def n(self) -> int:
        return self.S.n

    def submatrix(self, idx=None) -> np.ndarray:
        U = self.S.vectors if idx is None else self.S.vectors[idx]
        s = self.S.sqrt_m if idx is None else self.S.sqrt_m[idx]
        A = (U * self._vals) @ U.T
        A *= s[:, None]
        A *= s[None, :]
        return 0.5 * (A + A.T)

    def apply(self, f) -> np.ndarray:
        from .spectral import apply_spectral_function

        return apply_spectral_function(self.S, lambda lam: lam ** self.sigma, f, positive_only=True)


def _check_sigma(sigma):
    if not 0 < sigma < 1:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")


def fractional_graph_spectral(S: SpectralData, sigma: float) -> FractionalGraph:
    """``b_sigma(x,y) = -m(x) (L^sigma 1_y)(x)``, ``c_sigma = m L^sigma 1``."""
    _check_sigma(sigma)
    m = S.graph.m
    # kernel eigenvalues are exact zeros; rounding noise ~1e-16 would otherwise leak in as 1e-16**sigma
    P = spectral_matrix(S, lambda lam: lam ** sigma, positive_only=True)
    b = -m[:, None] * P
    b = 0.5 * (b + b.T)
    np.fill_diagonal(b, 0.0)
    if S.positive_gap:
        # c_sigma >= 0 holds exactly; clip rounding noise only
        c = np.maximum(m * (P @ np.ones(S.n)), 0.0)
    else:
        c = np.zeros(S.n)
    return FractionalGraph(float(sigma), S.graph, b, c, "spectral", 0.0)


def fractional_graph_quadrature(S: SpectralData, sigma: float, quad: QuadratureSpec | None = None) -> FractionalGraph:
    """``b_sigma`` and ``c_sigma`` from their semigroup integrals.

    Without killing (``lambda_0 = 0``) ``c_sigma`` is exactly zero and the
    constant eigenvector is integrated analytically in the large-time regime.
    """
    _check_sigma(sigma)
    quad = quad or QuadratureSpec()
    eng = _Semigroup(S, quad)
    gam = gamma_magnitude(-sigma)
    s = S.sqrt_m
    U = S.vectors
    power = -1.0 - sigma
    ss = np.outer(s, s)

    small, rem_b = eng.series_matrix(power, 1)
    J, err_b = eng.moments(power, float(ss.max()) / gam, allow_zero_modes=True)
    large = (U * J) @ U.T
    b = ss * (small + large) / gam
    b = 0.5 * (b + b.T)
    np.fill_diagonal(b, 0.0)
    err = (err_b + rem_b * float(ss.max())) / gam

    if np.any(eng.zero):
        c = np.zeros(S.n)
    else:
        # m(1 - q_t): Taylor part below T_split, then m - m q_t above it
        small_c, rem_c = eng.series_vector(s, power, 1)
        norm_s = float(np.linalg.norm(s))
        Jc, err_c = eng.moments(power, float(s.max()) * norm_s / gam, allow_zero_modes=False)
        large_c = U @ (Jc * (U.T @ s))
        const = S.graph.m * eng.T ** (-sigma) / sigma
        c = (-s * small_c + const - s * large_c) / gam
        err = max(err, (err_c + rem_c * float(s.max())) / gam)
    if err > quad.tol:
        raise QuadratureError(f"quadrature error bound {err:.3e} exceeds tolerance {quad.tol:.3e}")
    return FractionalGraph(float(sigma), S.graph, b, c, "quadrature", float(err))


def fractional_green_column(S: SpectralData, sigma: float, o, method: str = "spectral",
                            quad: QuadratureSpec | None = None) -> np.ndarray:
    """``G^sigma(., o)``; equals ``L^{-sigma} 1_o``."""
    if not 0 < sigma <= 1:
        raise ValueError("sigma must lie in (0, 1]")
    S.require_gap("the fractional Green function")
    if method == "spectral":
        return spectral_column(S, lambda lam: lam ** (-sigma), o)
    if method == "quadrature":
        values, err = moment_column(S, o, sigma, quad)
        tol = (quad or QuadratureSpec()).tol
        if err > tol:
            raise QuadratureError(f"quadrature error bound {err:.3e} exceeds tolerance {tol:.3e}")
        return values
    raise ValueError(f"unknown method {method!r}")


def fractional_green(S: SpectralData, sigma: float, x, o, method: str = "spectral",
                     quad: QuadratureSpec | None = None) -> float:
    return float(fractional_green_column(S, sigma, o, method, quad)[S.index(x)])


def write_fractional_graph(path, F: FractionalGraph):
    return write_graph(path, F.as_graph(), header=[f"sigma={F.sigma!r}", f"method={F.method}"])
