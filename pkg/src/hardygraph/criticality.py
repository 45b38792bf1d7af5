"""Numerical classification of Hardy weights on finite truncations.

Three observables are combined: growth of the partial sums
``S_r = sum_{|x|<=r} k_{alpha-sigma} k_alpha m``, the constrained minima
``tau_K`` of ``Q^sigma - w`` with the root pinned, and the optimality probe.
Labels are indications from a fixed decision rule, not proofs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .asymptotics import ExponentFit, FitError, default_window, fit_exponent, fit_series, shell_profile
from .graph import MetricAnnotation, quadratic_form
from .riesz import HardyWeight, PencilResult, pencil_minimum
from .spectral import SpectralData, apply_spectral_function, green_operator

POSITIVE = "positive-critical-indicated"
NULL = "null-critical-boundary"
UNRESOLVED = "unresolved"
LABELS = (POSITIVE, NULL, UNRESOLVED)


class IndefiniteFormError(ArithmeticError):
    """``Q^sigma - w`` is not positive semidefinite on the truncation."""


def alpha_critical(d: float, beta: float, sigma: float) -> float:
    """Transition exponent ``(d + sigma beta) / (2 beta)``."""
    if d < 1 or beta < 2:
        raise ValueError(f"need d >= 1 and beta >= 2, got d={d}, beta={beta}")
    if not 0 < sigma < d / beta:
        raise ValueError(f"need 0 < sigma < d/beta = {d / beta:.6g}, got sigma={sigma}")
    return (d + sigma * beta) / (2.0 * beta)


@dataclass(frozen=True)
class SummabilityScan:
    """Partial sums per radius and the log-log fit of their increments.

    ``increments[i] = partial_sums[i] - partial_sums[i-1]`` with the root
    term as ``increments[0]``. The fit uses the offset-corrected kernels.
    """

    radii: np.ndarray
    partial_sums: np.ndarray
    increments: np.ndarray
    fit: ExponentFit | None


def summability_scan(k_lower, k_alpha, m, metric: MetricAnnotation, radii, window=None,
                     max_radius: int | None = None, correction: str = "offset") -> SummabilityScan:
    """Partial sums of ``k_{alpha-sigma} k_alpha m`` over balls and their increment exponent.

    ``max_radius`` is the safe inner radius (half the distance to the Dirichlet
    boundary by default in the pipelines); larger radii are rejected.
    With ``correction="offset"`` the increments are recomputed from
    ``k + B``, ``B`` being each kernel's fitted boundary offset.
    """
    radii = np.asarray(sorted(set(int(r) for r in radii)))
    if radii.size == 0 or radii[0] < 0:
        raise ValueError("radii must be non-negative")
    if max_radius is not None and radii[-1] > max_radius:
        raise ValueError(f"radius {radii[-1]} exceeds the safe inner window {max_radius}")
    k_lower = np.asarray(k_lower, float)
    k_alpha = np.asarray(k_alpha, float)
    m = np.asarray(m, float)
    terms = k_lower * k_alpha * m
    shells = np.bincount(metric.dist, weights=terms, minlength=radii[-1] + 1)
    cums = np.cumsum(shells)
    partial = cums[radii]
    inc = shells[radii]

    fit = None
    pos = radii[radii >= 1]
    if pos.size >= 5:
        window = default_window(int(pos[-1])) if window is None else window
        try:
            if correction == "offset":
                rmax = int(pos[-1])
                r, p_low = shell_profile(k_lower, metric, rmax)
                _, p_k = shell_profile(k_alpha, metric, rmax)
                B_low = fit_series(r, p_low, window, "offset").offset
                B_k = fit_series(r, p_k, window, "offset").offset
                corr = (k_lower + B_low) * (k_alpha + B_k) * m
                cshell = np.bincount(metric.dist, weights=corr, minlength=rmax + 1)
                fit = fit_exponent(pos.astype(float), cshell[pos], window)
            else:
                fit = fit_exponent(pos.astype(float), shells[pos], window)
        except FitError:
            fit = None
    return SummabilityScan(radii, partial, inc, fit)


def _ball(metric: MetricAnnotation, K) -> np.ndarray:
    if K is None or K < 0:
        return np.zeros(0, dtype=int)
    return metric.ball(K)


def tau_minimum(form, w, o: int, support) -> float:
    """``min { Q^sigma(phi) - sum m w phi^2 : supp phi in support, phi(o) = 1 }``.

    Solved as a Schur complement of ``A - diag(m w)``. A failed Cholesky
    factorisation of the free block or a negative minimum means the form is
    indefinite there.
    """
    idx = np.asarray(support, dtype=int)
    if o not in set(idx.tolist()):
        raise ValueError("the root must lie in the support")
    w = np.asarray(w, float)
    B = form.submatrix(idx)
    B[np.diag_indices(idx.size)] -= np.asarray(form.m, float)[idx] * w[idx]
    at = int(np.flatnonzero(idx == o)[0])
    rest = np.delete(np.arange(idx.size), at)
    boo = float(B[at, at])
    if rest.size == 0:
        if boo < -1e-12 * max(1.0, abs(float(form.submatrix(idx)[0, 0]))):
            raise IndefiniteFormError("Q - w is negative at the root")
        return boo
    Brr = B[np.ix_(rest, rest)]
    bro = B[rest, at]
    try:
        cf = scipy.linalg.cho_factor(Brr)
    except np.linalg.LinAlgError:
        raise IndefiniteFormError("Q - w is indefinite on the ball; w is not a Hardy weight here") from None
    tau = boo - float(bro @ scipy.linalg.cho_solve(cf, bro))
    if tau < -1e-12 * max(1.0, abs(float(form.submatrix(idx[[at]])[0, 0]))):
        raise IndefiniteFormError("Q - w is negative for a function pinned at the root")
    return tau


def criticality_indicator(form, w, o: int, K_radii, metric: MetricAnnotation) -> np.ndarray:
    """``tau_K`` on the balls ``B_K(o)``; nonincreasing in ``K`` since the balls are nested."""
    values = w.values if isinstance(w, HardyWeight) else np.asarray(w, float)
    return np.array([tau_minimum(form, values, o, metric.ball(K)) for K in K_radii])


def optimality_probe(form, w, metric: MetricAnnotation, K, lam: float, box=None) -> PencilResult:
    """Bottom of ``Q^sigma / sum (1 + lam) w m phi^2`` over functions on ``B_box \\ B_K``.

    A value below 1 comes with a witness supported outside ``B_K``. ``K=None``
    removes nothing and ``box=None`` means the whole graph.
    """
    values = w.values if isinstance(w, HardyWeight) else np.asarray(w, float)
    if lam < 0:
        raise ValueError("lam must be non-negative")
    domain = np.arange(values.size) if box is None else metric.ball(box)
    removed = _ball(metric, K)
    R = np.setdiff1d(domain, removed)
    if R.size == 0:
        raise ValueError("probe domain is empty")
    return pencil_minimum(form, (1.0 + lam) * np.abs(values), restrict=R)


@dataclass(frozen=True)
class DecompositionResult:
    u: np.ndarray
    potential: np.ndarray
    harmonic: np.ndarray
    residual: float


def riesz_decompose(S: SpectralData, u) -> DecompositionResult:
    """``u = G(Lu) + h``. On a gapped graph ``h = 0``; with ``c = 0`` the
    Green operator acts on the complement of the constants and ``h`` is the
    m-weighted mean.
    """
    u = np.asarray(u, float)
    Lu = apply_spectral_function(S, lambda lam: lam, u)
    up = apply_spectral_function(S, lambda lam: 1.0 / lam, Lu, positive_only=True)
    uh = u - up
    res = apply_spectral_function(S, lambda lam: lam, uh)
    return DecompositionResult(u, up, uh, float(np.max(np.abs(res))))


@dataclass(frozen=True)
class EnergyCheck:
    energy: float
    pairing: float
    residual: float
    g2_norm: float


def energy_identity_check(S: SpectralData, k) -> EnergyCheck:
    """``Q(Gk) = sum m k Gk``; the residual is relative to ``sum m |k| G|k|``."""
    k = np.asarray(k, float)
    Gk = green_operator(S, k)
    m = S.graph.m
    energy = quadratic_form(S.graph, Gk)
    pairing = float(np.sum(m * k * Gk))
    g2 = float(np.sum(m * np.abs(k) * green_operator(S, np.abs(k))))
    scale = max(g2, 1e-300)
    return EnergyCheck(energy, pairing, abs(energy - pairing) / scale, g2)


@dataclass(frozen=True)
class DecisionParams:
    slope_margin: float = 0.15
    tau_ratio: float = 0.5


@dataclass
class CriticalityReport:
    sigma: float
    alpha: float
    alpha0: float | None
    scan: SummabilityScan
    K_radii: list
    tau: np.ndarray
    probe: dict = field(default_factory=dict)
    label: str | None = None

    @property
    def slope(self) -> float | None:
        return None if self.scan.fit is None else self.scan.fit.slope


def tau_decreasing(tau, ratio: float = 0.5) -> bool:
    tau = np.asarray(tau, float)
    if tau.size < 2:
        return False
    return bool(np.all(np.diff(tau) < 0) and tau[-1] < ratio * tau[0])


def classify(report: CriticalityReport, params: DecisionParams | None = None) -> str:
    """Label from the increment slope and the ``tau_K`` trend.

    positive-critical-indicated: slope below ``-1 - margin`` and ``tau_K``
    strictly decreasing to below ``tau_ratio`` of its first value;
    null-critical-boundary: slope within ``margin`` of ``-1``;
    unresolved otherwise.
    """
    params = params or DecisionParams()
    slope = report.slope
    if slope is None or not np.isfinite(slope):
        return UNRESOLVED
    if slope < -1.0 - params.slope_margin and tau_decreasing(report.tau, params.tau_ratio):
        return POSITIVE
    if abs(slope + 1.0) <= params.slope_margin:
        return NULL
    return UNRESOLVED


def criticality_report(S: SpectralData, sigma: float, alpha: float, o, metric: MetricAnnotation,
                       radii, K_radii, d: float | None = None, beta: float | None = None,
                       window=None, max_radius: int | None = None, probe_lambda: float | None = None,
                       probe_box: int | None = None, params: DecisionParams | None = None,
                       correction: str = "offset") -> CriticalityReport:
    """Kernels, weight, summability scan, ``tau_K`` and (optionally) probes for one ``(sigma, alpha)``."""
    from .fractional import SpectralForm
    from .riesz import hardy_weight_spectral

    if alpha < sigma:
        raise ValueError(f"need alpha >= sigma, got alpha={alpha}, sigma={sigma}")
    j = S.index(o)
    w = hardy_weight_spectral(S, sigma, alpha, j)
    lower = w.values * w.ground_state
    scan = summability_scan(lower, w.ground_state, S.graph.m, metric, radii, window,
                            max_radius, correction)
    form = SpectralForm(S, sigma)
    tau = criticality_indicator(form, w, j, K_radii, metric)
    probe = {}
    if probe_lambda is not None:
        for K in K_radii:
            try:
                probe[int(K)] = optimality_probe(form, w, metric, K, probe_lambda, probe_box).lambda_min
            except ValueError:
                # nothing left outside B_K
                continue
    a0 = alpha_critical(d, beta, sigma) if d is not None and beta is not None else None
    report = CriticalityReport(float(sigma), float(alpha), a0, scan, [int(K) for K in K_radii], tau, probe)
    report.label = classify(report, params)
    return report
