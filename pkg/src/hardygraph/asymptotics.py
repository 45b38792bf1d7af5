"""Power-law exponent fits and heat-kernel bound diagnostics.

Kernels on a Dirichlet box are the infinite-graph kernels minus a boundary
correction that is nearly constant on the inner window. Fitting shell means
with ``A r^s - B`` (rather than a bare power law) absorbs that constant;
``k + B`` is then the corrected kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .graph import MetricAnnotation, WeightedGraph, boundary_distance, metric_annotation
from .spectral import SpectralData, heat_kernel_column, heat_kernel_uniformized

MIN_POINTS = 5


class FitError(ValueError):
    """Raised when a fit window holds too few usable points."""


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares power law ``value ~ exp(intercept) * r^slope``.

    ``offset`` is the fitted ``B`` of the offset model (0 for a plain fit).
    """

    slope: float
    intercept: float
    window: tuple
    r2: float
    stderr: float
    offset: float = 0.0
    model: str = "power"
    r: np.ndarray = field(default=None, repr=False)
    values: np.ndarray = field(default=None, repr=False)

    @property
    def in_window(self) -> np.ndarray:
        return (self.r >= self.window[0]) & (self.r <= self.window[1])


def _window_mask(r, window):
    lo, hi = window
    if lo > hi:
        raise FitError(f"empty fit window {window}")
    sel = (r >= lo) & (r <= hi)
    if sel.sum() < MIN_POINTS:
        raise FitError(f"fit window {window} holds {int(sel.sum())} points, need {MIN_POINTS}")
    return sel


def _prepare(r, values):
    r = np.asarray(r, dtype=float)
    values = np.asarray(values, dtype=float)
    if r.shape != values.shape or r.ndim != 1:
        raise FitError("r and values must be 1-d arrays of equal length")
    if np.any(np.diff(r) <= 0):
        raise FitError("r must be strictly increasing")
    return r, values


def _r_squared(y, yhat) -> float:
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else 0.0
    return float(min(1.0, max(0.0, 1.0 - ss_res / ss_tot)))


def fit_exponent(r, values, window=None) -> ExponentFit:
    """Straight line through ``(log r, log value)`` on ``window = (lo, hi)``."""
    r, values = _prepare(r, values)
    window = (float(r[0]), float(r[-1])) if window is None else tuple(map(float, window))
    sel = _window_mask(r, window)
    if np.any(values[sel] <= 0) or np.any(r[sel] <= 0):
        raise FitError("log-log fit needs positive r and values in the window")
    x, y = np.log(r[sel]), np.log(values[sel])
    res = stats.linregress(x, y)
    r2 = _r_squared(y, res.intercept + res.slope * x)
    return ExponentFit(float(res.slope), float(res.intercept), window, r2, float(res.stderr),
                       0.0, "power", r, values)


def fit_offset_exponent(r, values, window=None) -> ExponentFit:
    """Fit ``A r^s - B`` with relative weights; ``slope`` is ``s`` and ``offset`` is ``B``."""
    r, values = _prepare(r, values)
    window = (float(r[0]), float(r[-1])) if window is None else tuple(map(float, window))
    sel = _window_mask(r, window)
    rr, yy = r[sel], values[sel]
    if np.any(yy <= 0):
        raise FitError("offset fit needs positive values in the window")
    start = fit_exponent(rr, yy)

    def model(x, logA, s, B):
        return np.exp(logA) * x ** s - B

    try:
        p, cov = optimize.curve_fit(model, rr, yy, p0=(start.intercept, start.slope, 0.0),
                                    sigma=yy, maxfev=20000)
    except (RuntimeError, optimize.OptimizeWarning) as exc:
        raise FitError(f"offset fit did not converge: {exc}") from exc
    logA, s, B = map(float, p)
    stderr = float(np.sqrt(cov[1, 1])) if np.all(np.isfinite(cov)) else float("nan")
    shifted = yy + B
    if np.any(shifted <= 0):
        raise FitError("offset fit produced a non-positive corrected series")
    r2 = _r_squared(np.log(shifted), logA + s * np.log(rr))
    return ExponentFit(s, logA, window, r2, stderr, B, "offset-power", r, values)


def fit_series(r, values, window=None, correction: str = "offset") -> ExponentFit:
    if correction == "offset":
        return fit_offset_exponent(r, values, window)
    if correction == "none":
        return fit_exponent(r, values, window)
    raise ValueError(f"unknown correction {correction!r}")


def shell_profile(values, metric: MetricAnnotation, rmax=None, how: str = "mean"):
    """Per-sphere averages of a vertex function for ``r = 1 .. rmax``."""
    values = np.asarray(values, dtype=float)
    rmax = metric.radius if rmax is None else int(rmax)
    reducer = {"mean": np.mean, "median": np.median}[how]
    radii = np.arange(1, rmax + 1)
    out = np.array([reducer(values[metric.dist == r]) for r in radii])
    return radii.astype(float), out


def inner_radius(G: WeightedGraph, metric: MetricAnnotation, factor: float = 0.5) -> int:
    """Largest radius used for sums and fits: ``factor`` times the distance to the boundary."""
    return max(1, int(math.floor(factor * boundary_distance(G, metric))))


def default_window(rmax: int, lo: float = 3.0):
    return (float(lo), float(rmax))


def volume_growth(G: WeightedGraph, metric: MetricAnnotation, radii=None, window=None) -> ExponentFit:
    """Fit of ``m(B_r(o))`` against ``r``.

    The default window is ``[R/4, R]`` with ``R`` the distance to the boundary;
    lower-order terms of the ball volume are strongest at small ``r``.
    """
    R = boundary_distance(G, metric)
    radii = np.arange(1, R + 1) if radii is None else np.asarray(radii)
    vol = np.cumsum(np.bincount(metric.dist, weights=G.m))
    vals = vol[np.minimum(radii, metric.radius)]
    if window is None:
        window = (max(1.0, R / 4.0), float(R))
    return fit_exponent(radii.astype(float), vals, window)


def on_diagonal(S: SpectralData, o, times) -> np.ndarray:
    j = S.index(o)
    return heat_kernel_column(S, np.asarray(times, dtype=float), j)[:, j]


def spectral_dimension(S: SpectralData, o, times=None, window=None, beta_guess: float = 2.0,
                       volume_dim: float | None = None) -> ExponentFit:
    """Fit of ``p_t(o, o)`` against ``t``; the slope estimates ``-d/beta``.

    Default window ``[4, (R/4)^beta]`` with ``R`` the distance to the boundary
    (or the eccentricity). With ``volume_dim`` a second pass refines ``beta``
    from the first slope.
    """
    G = S.graph
    metric = metric_annotation(G, S.index(o))
    R = boundary_distance(G, metric)
    if R < 1:
        raise FitError("graph has no power-law window")

    def window_for(beta):
        return (4.0, (R / 4.0) ** beta)

    win = window_for(beta_guess) if window is None else tuple(window)
    if times is None:
        times = np.geomspace(1.0, max(win[1], 8.0) * 1.25, 80)
    times = np.asarray(times, dtype=float)
    fit = fit_exponent(times, on_diagonal(S, o, times), win)
    if window is None and volume_dim is not None and fit.slope < 0:
        beta = volume_dim / -fit.slope
        win = window_for(beta)
        times = np.geomspace(1.0, max(win[1], 8.0) * 1.25, 80)
        fit = fit_exponent(times, on_diagonal(S, o, times), win)
    return fit


def riesz_exponent(k, metric: MetricAnnotation, alpha=None, window=None, rmax=None,
                   correction: str = "offset", how: str = "mean") -> ExponentFit:
    """Slope of the sphere-averaged kernel ``k_alpha`` against ``|x|``; expect ``-d + alpha beta``."""
    r, prof = shell_profile(k, metric, rmax, how)
    window = default_window(int(r[-1])) if window is None else window
    return fit_series(r, prof, window, correction)


def hardy_exponent(w, metric: MetricAnnotation, window=None, rmax=None,
                   correction: str = "offset", how: str = "mean") -> ExponentFit:
    """Slope of ``w_{sigma,alpha}`` against ``|x|``; expect ``-beta sigma``.

    With the offset correction both kernels ``k_{alpha-sigma} = w k_alpha``
    and ``k_alpha`` are fitted separately and the slopes subtracted.
    """
    if correction == "none":
        r, prof = shell_profile(w.values, metric, rmax, how)
        window = default_window(int(r[-1])) if window is None else window
        return fit_exponent(r, prof, window)
    if w.alpha - w.sigma <= 0:
        raise FitError("weight with alpha = sigma is supported at the root only")
    lower = w.values * w.ground_state
    r, p_low = shell_profile(lower, metric, rmax, how)
    _, p_k = shell_profile(w.ground_state, metric, rmax, how)
    window = default_window(int(r[-1])) if window is None else window
    f_low = fit_series(r, p_low, window, correction)
    f_k = fit_series(r, p_k, window, correction)
    slope = f_low.slope - f_k.slope
    corrected = (p_low + f_low.offset) / (p_k + f_k.offset)
    sel = _window_mask(r, window)
    yhat = (f_low.intercept - f_k.intercept) + slope * np.log(r[sel])
    r2 = _r_squared(np.log(corrected[sel]), yhat)
    stderr = float(math.hypot(f_low.stderr, f_k.stderr))
    return ExponentFit(slope, f_low.intercept - f_k.intercept, tuple(window), r2, stderr,
                       0.0, "offset-ratio", r, corrected)


def xi(r):
    """``xi(r) = r arcsinh(r) + 1 - sqrt(1 + r^2)``; vanishes at 0 and increases."""
    r = np.asarray(r, dtype=float)
    return r * np.arcsinh(r) + 1.0 - np.sqrt(1.0 + r * r)


@dataclass(frozen=True)
class BoundCheck:
    """Outcome of an inequality ``lhs <= rhs`` evaluated on a grid."""

    points: list
    lhs: np.ndarray
    rhs: np.ndarray
    constants: dict
    validation: np.ndarray

    @property
    def ok(self) -> np.ndarray:
        return self.lhs <= self.rhs

    @property
    def violations(self) -> int:
        return int(np.sum(~self.ok[self.validation]))

    @property
    def worst_margin(self) -> float:
        """Smallest ``log(rhs / lhs)`` over the validation points."""
        v = self.validation
        if not v.any():
            return float("inf")
        return float(np.min(np.log(self.rhs[v]) - np.log(self.lhs[v])))


def davies_gaffney_grid(metric: MetricAnnotation, radii, n_times: int = 6, per_sphere: int = 4,
                        t_min: float = 0.05):
    """``(vertex, t)`` pairs with ``|x| >= 1`` and ``t <= |x|``, ordered by ``(|x|, t)``.

    Each sphere contributes up to ``per_sphere`` evenly spaced vertices.
    """
    pts = []
    for r in sorted(set(int(q) for q in radii)):
        if r < 1:
            continue
        sph = metric.sphere(r)
        if sph.size == 0:
            continue
        take = sph[np.linspace(0, sph.size - 1, min(per_sphere, sph.size)).astype(int)]
        for t in np.geomspace(t_min, r, n_times):
            for x in np.unique(take):
                pts.append((int(x), float(t)))
    return pts


def davies_gaffney_check(G: WeightedGraph, o, metric: MetricAnnotation, grid, C: float | None = None,
                         calibration: float = 0.5) -> BoundCheck:
    """``p_t(x,o) <= C (m(x) m(o))^{-1/2} exp(-t xi(|x|/t))`` on ``grid``.

    Heat-kernel values come from the positive Poisson series, which keeps
    relative accuracy far below machine epsilon of ``p_t(o,o)``. With
    ``C=None`` the constant is the smallest one that holds on the first
    ``calibration`` fraction of the grid and the rest is the validation set;
    with a supplied ``C`` every point is validated.
    """
    j = metric.root
    pts = [(int(x), float(t)) for x, t in grid]
    for x, t in pts:
        if metric.dist[x] < 1 or not 0 < t <= metric.dist[x]:
            raise ValueError("grid points need |x| >= 1 and 0 < t <= |x|")
    if not pts:
        return BoundCheck([], np.zeros(0), np.zeros(0), {"C": C}, np.zeros(0, bool))
    times = np.unique([t for _, t in pts])
    P = heat_kernel_uniformized(G, times, j)
    tpos = {t: i for i, t in enumerate(times)}
    lhs = np.array([P[tpos[t], x] for x, t in pts])
    r = np.array([metric.dist[x] for x, _ in pts], dtype=float)
    t = np.array([t for _, t in pts])
    mx = np.array([G.m[x] for x, _ in pts])
    log_shape = -0.5 * np.log(mx * G.m[j]) - t * xi(r / t)
    validation = np.ones(len(pts), bool)
    if C is None:
        ncal = max(1, int(round(calibration * len(pts))))
        validation[:ncal] = False
        C = float(np.exp(np.max(np.log(lhs[:ncal]) - log_shape[:ncal])))
    rhs = C * np.exp(log_shape)
    return BoundCheck(pts, lhs, rhs, {"C": C}, validation)


@dataclass(frozen=True)
class MeasureCheck:
    radii: np.ndarray
    shell_min: np.ndarray
    flagged: bool


def measure_lower_bound_check(G: WeightedGraph, metric: MetricAnnotation, tol: float = 0.05) -> MeasureCheck:
    """Shell minima of ``log m(x) / |x|``; flagged when the tail trends below ``-tol``."""
    radii = np.arange(1, metric.radius + 1)
    logm = np.log(G.m)
    mins = np.array([np.min(logm[metric.dist == r]) / r for r in radii])
    if mins.size == 0:
        return MeasureCheck(radii, mins, False)
    tail = mins[len(mins) // 2:]
    return MeasureCheck(radii, mins, bool(np.mean(tail) < -tol))


@dataclass(frozen=True)
class TransienceProfile:
    """``k_sigma(o)`` along an exhaustion and the ratio of successive increments."""

    sigma: float
    sizes: list
    values: np.ndarray
    increments: np.ndarray
    ratios: np.ndarray

    @property
    def stabilizing(self) -> bool:
        return bool(np.all(self.ratios < 1.0))

    @property
    def growing(self) -> bool:
        return bool(np.all(self.ratios >= 1.0))


def transience_profile(spectra, roots, sigma: float) -> TransienceProfile:
    """Values ``L^{-sigma} 1_o (o)`` on nested exhaustions (smallest first).

    Geometrically decaying increments (ratio < 1) indicate convergence,
    non-decaying ones indicate divergence of the infinite-graph kernel.
    """
    from .riesz import riesz_kernel_spectral

    vals = []
    for S, o in zip(spectra, roots):
        j = S.index(o)
        vals.append(riesz_kernel_spectral(S, sigma, j)[j])
    vals = np.array(vals)
    inc = np.diff(vals)
    ratios = inc[1:] / inc[:-1] if inc.size > 1 else np.zeros(0)
    return TransienceProfile(float(sigma), [S.n for S in spectra], vals, inc, ratios)
