"""Command line experiment runner.

Settings come from built-in defaults, then an optional flat ``key = value``
config file, then command-line flags (highest precedence). Every command
writes CSV files with a header row into ``--out``; files are replaced
atomically.

Exit codes: 0 success, 1 validation failure, 2 input error.
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import generators as gen
from .asymptotics import (FitError, davies_gaffney_check, davies_gaffney_grid, fit_exponent,
                          hardy_exponent, riesz_exponent, spectral_dimension, volume_growth)
from .criticality import (DecisionParams, IndefiniteFormError, alpha_critical, criticality_report,
                          energy_identity_check, optimality_probe)
from .fractional import (FractionalGraph, QuadratureError, QuadratureSpec, SpectralForm,
                         fractional_graph_quadrature, fractional_graph_spectral, write_fractional_graph)
from .graph import (GraphError, WeightedGraph, apply_laplacian, boundary_distance, dirichlet_restriction,
                    metric_annotation)
from .io import read_graph, write_csv, write_graph
from .riesz import (cosine_distance, ground_state_transform_check, hardy_weight_spectral,
                    riesz_kernel_quadrature, riesz_kernel_spectral, verify_hardy, verify_intertwining)
from .spectral import SpectralError, eigendecompose, heat_kernel_grid, write_spectrum_csv

log = logging.getLogger("hardygraph")

EXIT_OK, EXIT_VALIDATION, EXIT_INPUT = 0, 1, 2

GRAPHS = ("lattice", "gasket", "vicsek", "path", "two-vertex", "single-vertex", "file")
COMMANDS = ("gen", "spectrum", "heat", "riesz", "weight", "verify", "scan", "fit", "probe")

TOL = {"intertwining": 1e-8, "form": 1e-8, "operator": 1e-8, "pencil": 1e-8, "pencil_cosdist": 1e-6,
       "gst": 1e-10, "energy": 1e-9, "killing_sum": 1e-10}


class ConfigError(ValueError):
    """Malformed or inconsistent experiment settings."""


def _floats(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _ints(text):
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _bool(text):
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _opt(conv):
    return lambda v: None if v is None or (isinstance(v, str) and v.strip().lower() in ("", "none")) else conv(v)


# key -> (converter, default, help)
OPTIONS = {
    "graph": (str, "lattice", f"graph generator, one of {', '.join(GRAPHS)}"),
    "dim": (int, 2, "lattice dimension"),
    "radius": (int, 10, "lattice box radius"),
    "level": (int, 4, "gasket/Vicsek level"),
    "n": (int, 10, "path length"),
    "measure_mode": (str, "degree", "vertex measure: degree or unit"),
    "boundary": (str, "free", "free, or dirichlet to fold an outer layer into the killing term"),
    "input": (_opt(str), None, "graph file for --graph file"),
    "gamma": (float, 4.0, "killing term of the single-vertex graph"),
    "root": (_opt(str), None, "root vertex id (default: origin or corner)"),
    "sigma": (float, 0.5, "fractional order sigma"),
    "alphas": (_floats, (0.6,), "comma separated Riesz orders"),
    "radii": (_opt(_ints), None, "comma separated radii for partial sums"),
    "k_radii": (_opt(_ints), None, "comma separated ball radii for tau_K and probes"),
    "inner_factor": (float, 0.5, "inner window as a fraction of the boundary distance"),
    "times": (_opt(_floats), None, "comma separated heat-kernel times"),
    "quad_tol": (float, 1e-8, "quadrature tolerance"),
    "method": (str, "spectral", "kernel method: spectral, quadrature or both"),
    "window_lo": (float, 3.0, "lower end of radial fit windows"),
    "window_hi": (_opt(float), None, "upper end of radial fit windows (default: inner radius)"),
    "correction": (str, "offset", "finite-size correction for radial fits: offset or none"),
    "d": (_opt(float), None, "volume dimension (default: known value for the generator)"),
    "beta": (_opt(float), None, "walk dimension (default: known value for the generator)"),
    "probe_lambda": (float, 0.5, "lambda of the optimality probe"),
    "probe_k": (_opt(int), None, "radius of the ball removed by the probe"),
    "probe_box": (_opt(int), None, "radius of the probe domain (default: inner radius)"),
    "dg": (_bool, False, "also run the Davies-Gaffney bound check (heat)"),
    "dg_radius": (_opt(int), None, "largest distance on the Davies-Gaffney grid"),
    "slope_margin": (float, 0.15, "classification slope margin"),
    "tau_ratio": (float, 0.5, "classification tau trend ratio"),
    "fault": (float, 0.0, "add this amount to one fractional edge weight (fault injection)"),
    "samples": (int, 50, "random functions per identity check"),
    "fractional": (_bool, False, "spectrum: also write the fractional graph"),
    "series_csv": (_opt(str), None, "fit: CSV with columns r,value to fit instead of graph series"),
    "output": (str, "graph.txt", "gen: output file name inside --out"),
}


@dataclass
class ExperimentConfig:
    command: str
    out: Path
    seed: int
    threads: int | None
    values: dict
    explicit: set = field(default_factory=set)

    def __getattr__(self, key):
        try:
            return self.values[key]
        except KeyError:
            raise AttributeError(key) from None

    def validate(self):
        v = self.values
        if v["graph"] not in GRAPHS:
            raise ConfigError(f"unknown graph {v['graph']!r}; choose from {', '.join(GRAPHS)}")
        if v["graph"] == "file" and not v["input"]:
            raise ConfigError("--graph file needs --input")
        if v["measure_mode"] not in gen.MEASURE_MODES:
            raise ConfigError(f"measure_mode must be one of {gen.MEASURE_MODES}")
        if v["boundary"] not in ("free", "dirichlet"):
            raise ConfigError("boundary must be free or dirichlet")
        if v["method"] not in ("spectral", "quadrature", "both"):
            raise ConfigError("method must be spectral, quadrature or both")
        if v["correction"] not in ("offset", "none"):
            raise ConfigError("correction must be offset or none")
        if not v["quad_tol"] > 0:
            raise ConfigError("quad_tol must be positive")
        if not 0 < v["sigma"] <= 1:
            raise ConfigError("sigma must lie in (0, 1]")
        if any(a < 0 for a in v["alphas"]):
            raise ConfigError("alphas must be non-negative")
        if not 0 < v["inner_factor"] <= 1:
            raise ConfigError("inner_factor must lie in (0, 1]")
        if v["times"] is not None and any(t <= 0 for t in v["times"]):
            raise ConfigError("times must be positive")
        return self


def read_config_file(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key in ("out", "seed", "threads"):
            out[key] = value
            continue
        if key not in OPTIONS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _global_flags(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="flat key = value config file")
    p.add_argument("--out", default=d, help="output directory (default .)")
    p.add_argument("--seed", type=int, default=d, help="seed for randomized checks (default 0)")
    p.add_argument("--threads", type=int, default=d, help="BLAS thread limit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hardygraph", description="Potential theory experiments on weighted graphs.")
    _global_flags(parser, suppress=False)
    shared = argparse.ArgumentParser(add_help=False)
    _global_flags(shared, suppress=True)
    for key, (_, default, text) in OPTIONS.items():
        shared.add_argument("--" + key.replace("_", "-"), dest=key, default=argparse.SUPPRESS,
                            help=f"{text} (default {default})")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "gen": "write a generated graph file",
        "spectrum": "eigenvalues (spectrum.csv)",
        "heat": "heat kernel columns (heat.csv), optional Davies-Gaffney check",
        "riesz": "Riesz kernels (riesz.csv)",
        "weight": "Hardy weights and pencils (hardy.csv, pencil.csv)",
        "verify": "exact identity checks (pencil.csv, residuals.csv)",
        "scan": "criticality scan (scan.csv, fitsummary.csv)",
        "fit": "exponent fits (fit.csv, fitsummary.csv)",
        "probe": "optimality probe (probe.csv)",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[shared], help=helps[name])
    return parser


def parse_config(argv=None) -> ExperimentConfig:
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    file_values = read_config_file(ns["config"]) if ns.get("config") else {}
    merged, explicit = {}, set()
    for key, (conv, default, _) in OPTIONS.items():
        if key in ns:
            raw, src = ns[key], "cli"
        elif key in file_values:
            raw, src = file_values[key], "config"
        else:
            merged[key] = default
            continue
        explicit.add(key)
        try:
            merged[key] = conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key} from {src}: {raw!r} ({exc})") from None

    def glob(key, conv, default):
        if ns.get(key) is not None:
            return conv(ns[key])
        if key in file_values:
            try:
                return conv(file_values[key])
            except ValueError:
                raise ConfigError(f"bad value for {key} in config: {file_values[key]!r}") from None
        return default

    cfg = ExperimentConfig(command, Path(glob("out", str, ".")), glob("seed", int, 0),
                           glob("threads", int, None), merged, explicit)
    if cfg.seed < 0 or cfg.seed >= 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg.threads is not None and cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    return cfg.validate()


# graph construction ---------------------------------------------------------

def _vicsek_dirichlet(level, measure_mode):
    outer = gen.vicsek(level + 1, measure_mode)
    metric = metric_annotation(outer, gen.natural_root(outer))
    return dirichlet_restriction(outer, metric.ball(3 ** level))


def make_graph(cfg: ExperimentConfig) -> WeightedGraph:
    name, dirichlet, mm = cfg.graph, cfg.boundary == "dirichlet", cfg.measure_mode
    if name == "lattice":
        return gen.dirichlet_box(cfg.dim, cfg.radius, mm) if dirichlet else gen.lattice_box(cfg.dim, cfg.radius, mm)
    if name == "gasket":
        return gen.gasket_exhaustion(cfg.level, mm) if dirichlet else gen.sierpinski_gasket(cfg.level, mm)
    if name == "vicsek":
        return _vicsek_dirichlet(cfg.level, mm) if dirichlet else gen.vicsek(cfg.level, mm)
    if name == "path":
        return gen.path_graph(cfg.n, dirichlet=dirichlet, measure_mode=mm)
    if name == "two-vertex":
        return gen.two_vertex()
    if name == "single-vertex":
        return gen.single_vertex(cfg.gamma)
    try:
        return read_graph(cfg.input)
    except OSError as exc:
        raise ConfigError(f"cannot read graph file {cfg.input}: {exc}") from None


def describe_graph(cfg: ExperimentConfig) -> str:
    keys = {"lattice": ("dim", "radius", "measure_mode", "boundary"), "gasket": ("level", "measure_mode", "boundary"),
            "vicsek": ("level", "measure_mode", "boundary"), "path": ("n", "measure_mode", "boundary"),
            "two-vertex": (), "single-vertex": ("gamma",), "file": ("input",)}[cfg.graph]
    return " ".join([f"generator={cfg.graph}"] + [f"{k}={cfg.values[k]}" for k in keys])


def graph_root(cfg, G):
    if cfg.root is None:
        return gen.natural_root(G)
    G.index(cfg.root)
    return cfg.root


def exponents(cfg):
    d, beta = gen.known_exponents(cfg.graph, cfg.dim)
    return (cfg.d if cfg.d is not None else d), (cfg.beta if cfg.beta is not None else beta)


@dataclass
class Context:
    cfg: ExperimentConfig
    G: WeightedGraph
    root: object
    metric: object
    inner: int
    _S: object = None

    @property
    def S(self):
        if self._S is None:
            self._S = eigendecompose(self.G)
        return self._S

    def window(self):
        hi = self.cfg.window_hi if self.cfg.window_hi is not None else float(self.inner)
        return (self.cfg.window_lo, hi)


def load_context(cfg) -> Context:
    G = make_graph(cfg)
    root = graph_root(cfg, G)
    metric = metric_annotation(G, root)
    inner = int(math.floor(cfg.inner_factor * boundary_distance(G, metric)))
    return Context(cfg, G, root, metric, inner)


def _check_alphas(cfg, strict=True):
    bad = [a for a in cfg.alphas if a < cfg.sigma]
    if bad and strict:
        raise ConfigError(f"alpha values {bad} are below sigma={cfg.sigma}; Hardy weights need alpha >= sigma")


def _path(cfg, name) -> Path:
    return cfg.out / name


# commands -------------------------------------------------------------------

def cmd_gen(cfg) -> int:
    G = make_graph(cfg)
    path = write_graph(_path(cfg, cfg.output), G, header=[describe_graph(cfg)])
    print(f"vertices={G.n} edges={G.n_edges} file={path}")
    return EXIT_OK


def cmd_spectrum(cfg) -> int:
    ctx = load_context(cfg)
    S = ctx.S
    write_spectrum_csv(_path(cfg, "spectrum.csv"), S)
    if cfg.fractional:
        if not 0 < cfg.sigma < 1:
            raise ConfigError("the fractional graph needs 0 < sigma < 1")
        if cfg.method == "quadrature":
            F = fractional_graph_quadrature(S, cfg.sigma, QuadratureSpec(tol=cfg.quad_tol))
        else:
            F = fractional_graph_spectral(S, cfg.sigma)
        write_fractional_graph(_path(cfg, "fractional.txt"), F)
    print(f"vertices={S.n} lambda_min={S.bottom:.6g} lambda_max={S.eigenvalues[-1]:.6g} gap={S.positive_gap}")
    return EXIT_OK


def cmd_heat(cfg) -> int:
    ctx = load_context(cfg)
    S, G, metric = ctx.S, ctx.G, ctx.metric
    times = np.asarray(cfg.times if cfg.times is not None else np.geomspace(0.1, 100.0, 25))
    if np.any(np.diff(times) <= 0):
        raise ConfigError("times must be strictly increasing")
    P = heat_kernel_grid(S, ctx.root, times).values
    rows = ((G.ids[x], int(metric.dist[x]), t, P[i, x]) for i, t in enumerate(times) for x in range(G.n))
    write_csv(_path(cfg, "heat.csv"), ["vertex_id", "distance", "t", "p_t"], rows)
    status = EXIT_OK
    if cfg.dg:
        R = boundary_distance(G, metric)
        if cfg.dg_radius is not None:
            R = min(R, cfg.dg_radius)
        grid = davies_gaffney_grid(metric, range(1, R + 1))
        bc = davies_gaffney_check(G, ctx.root, metric, grid)
        write_csv(_path(cfg, "boundcheck.csv"), ["x_id", "t", "lhs", "rhs", "ok"],
                  ((G.ids[x], t, l, r, int(ok)) for (x, t), l, r, ok in zip(bc.points, bc.lhs, bc.rhs, bc.ok)))
        print(f"davies_gaffney C={bc.constants['C']:.6g} violations={bc.violations} "
              f"validation_points={int(bc.validation.sum())}")
        if bc.violations:
            status = EXIT_VALIDATION
    print(f"heat rows={len(times) * G.n}")
    return status


def _kernels(cfg, ctx, alpha):
    """``[(method, values, err)]`` for one alpha."""
    S = ctx.S
    out = []
    if cfg.method in ("spectral", "both") or alpha == 0:
        out.append(("spectral", riesz_kernel_spectral(S, alpha, ctx.root), 0.0))
    if cfg.method in ("quadrature", "both") and alpha > 0:
        vals, err = riesz_kernel_quadrature(S, alpha, ctx.root, QuadratureSpec(tol=cfg.quad_tol))
        out.append(("quadrature", vals, err))
    return out


def cmd_riesz(cfg) -> int:
    ctx = load_context(cfg)
    G, metric = ctx.G, ctx.metric
    rows = []
    for a in cfg.alphas:
        for method, vals, err in _kernels(cfg, ctx, a):
            rows.extend((G.ids[x], int(metric.dist[x]), a, vals[x], method, err) for x in range(G.n))
    write_csv(_path(cfg, "riesz.csv"), ["vertex_id", "distance", "alpha", "k_value", "method", "err"], rows)
    print(f"riesz alphas={len(cfg.alphas)} rows={len(rows)}")
    return EXIT_OK


def _pencil_row(S, sigma, alpha, root):
    w = hardy_weight_spectral(S, sigma, alpha, root)
    res = verify_hardy(S, sigma, w)
    cos = cosine_distance(res.minimizer, w.ground_state, S.graph.m * w.values)
    return w, res, cos


def cmd_weight(cfg) -> int:
    _check_alphas(cfg)
    ctx = load_context(cfg)
    G, metric, S = ctx.G, ctx.metric, ctx.S
    hardy_rows, pencil_rows = [], []
    for a in cfg.alphas:
        w, res, cos = _pencil_row(S, cfg.sigma, a, ctx.root)
        hardy_rows.extend((G.ids[x], int(metric.dist[x]), cfg.sigma, a, w.values[x]) for x in range(G.n))
        pencil_rows.append((cfg.sigma, a, res.lambda_min, cos))
    write_csv(_path(cfg, "hardy.csv"), ["vertex_id", "distance", "sigma", "alpha", "w_value"], hardy_rows)
    write_csv(_path(cfg, "pencil.csv"), ["sigma", "alpha", "lambda_min", "minimizer_cosdist"], pencil_rows)
    for s, a, lam, cos in pencil_rows:
        print(f"sigma={s} alpha={a} lambda_min={lam:.12g} cosdist={cos:.3g}")
    return EXIT_OK


def _fractional_for(S, sigma, fault) -> FractionalGraph:
    G = S.graph
    if sigma < 1:
        F = fractional_graph_spectral(S, sigma)
        b, c = F.b.copy(), F.c.copy()
    else:
        F = None
        b, c = G.b.toarray(), G.c.copy()
    if fault:
        if G.n >= 2:
            i, j = 0, 1
            b[i, j] += fault
            b[j, i] += fault
        else:
            c[0] += fault
    return FractionalGraph(float(sigma), G, b, c, "spectral" if F is None else F.method, 0.0)


def _rel(a, b) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def run_identity_suite(name, G, sigma, alphas, rng, samples, fault=0.0):
    """Rows ``(graph, check, sigma, alpha, residual, tol)`` and pencil rows for one graph."""
    S = eigendecompose(G)
    root = gen.natural_root(G)
    j = S.index(root)
    rows, pencils = [], []
    F = _fractional_for(S, sigma, fault)
    form = SpectralForm(S, sigma)

    def power(f):
        return form.apply(f)

    form_res = op_res = 0.0
    for _ in range(samples):
        f = rng.standard_normal(G.n)
        lhs = F.quadratic_form(f)
        rhs = float(np.sum(G.m * f * power(f)))
        form_res = max(form_res, _rel(lhs, rhs))
        ref = power(f)
        op_res = max(op_res, float(np.max(np.abs(F.apply(f) - ref)) / max(np.max(np.abs(ref)), 1e-300)))
    rows.append((name, "form", sigma, "", form_res, TOL["form"]))
    rows.append((name, "operator", sigma, "", op_res, TOL["operator"]))

    ks = 0.0
    for _ in range(samples):
        f = rng.standard_normal(G.n)
        lhs = float(np.sum(G.m * apply_laplacian(G, f * f)))
        rhs = float(np.sum(G.c * f * f))
        ks = max(ks, abs(lhs - rhs) / max(1.0, float(np.sum(G.m * f * f))))
    rows.append((name, "killing_sum", "", "", ks, TOL["killing_sum"]))

    gst = 0.0
    for _ in range(samples):
        v = np.exp(rng.uniform(-1.0, 1.0, G.n))
        phi = rng.standard_normal(G.n)
        gst = max(gst, ground_state_transform_check(G, v, phi))
    rows.append((name, "gst", "", "", gst, TOL["gst"]))

    if S.positive_gap:
        en = 0.0
        for _ in range(samples):
            en = max(en, energy_identity_check(S, rng.standard_normal(G.n)).residual)
        rows.append((name, "energy", "", "", en, TOL["energy"]))
        for a in alphas:
            if a < sigma:
                continue
            r = verify_intertwining(S, sigma, a, j)
            rows.append((name, "intertwining", sigma, a, max(r["operator"], r["green"]), TOL["intertwining"]))
            w, res, cos = _pencil_row(S, sigma, a, j)
            rows.append((name, "pencil", sigma, a, abs(res.lambda_min - 1.0), TOL["pencil"]))
            rows.append((name, "pencil_cosdist", sigma, a, cos, TOL["pencil_cosdist"]))
            pencils.append((name, sigma, a, res.lambda_min, cos))
            # ground state transform on the fractional graph with v = k_alpha
            phi = rng.standard_normal(G.n)
            rows.append((name, "gst_fractional", sigma, a,
                         ground_state_transform_check(F, w.ground_state, phi), TOL["gst"]))
    return rows, pencils


def cmd_verify(cfg) -> int:
    rng = np.random.default_rng(cfg.seed)
    graph_keys = {"graph", "input", "dim", "radius", "level", "n", "boundary", "measure_mode", "gamma"}
    if cfg.explicit & graph_keys:
        suite = [(cfg.graph, make_graph(cfg))]
    else:
        suite = [("path-dirichlet", gen.path_graph(10, dirichlet=True)), ("two-vertex", gen.two_vertex()),
                 ("single-vertex", gen.single_vertex(cfg.gamma))]
    rows, pencils = [], []
    for name, G in suite:
        r, p = run_identity_suite(name, G, cfg.sigma, cfg.alphas, rng, cfg.samples, cfg.fault)
        rows.extend(r)
        pencils.extend(p)
    out_rows = [(g, c, s, a, res, tol, int(res <= tol)) for g, c, s, a, res, tol in rows]
    write_csv(_path(cfg, "residuals.csv"), ["graph", "check", "sigma", "alpha", "residual", "tol", "ok"], out_rows)
    write_csv(_path(cfg, "pencil.csv"), ["graph", "sigma", "alpha", "lambda_min", "minimizer_cosdist"], pencils)
    failed = [r for r in out_rows if not r[-1]]
    for g, c, s, a, res, tol, ok in out_rows:
        print(f"{'ok  ' if ok else 'FAIL'} {g} {c} sigma={s} alpha={a} residual={res:.3e} tol={tol:.0e}")
    return EXIT_VALIDATION if failed else EXIT_OK


def _default_k_radii(inner):
    if inner < 1:
        return [0]
    ks, k = [], 1
    while k <= inner:
        ks.append(k)
        k *= 2
    return ks


def cmd_scan(cfg) -> int:
    _check_alphas(cfg)
    ctx = load_context(cfg)
    S, metric = ctx.S, ctx.metric
    S.require_gap("the criticality scan")
    radii = list(cfg.radii) if cfg.radii is not None else list(range(0, ctx.inner + 1))
    if max(radii) > ctx.inner:
        raise ConfigError(f"radius {max(radii)} exceeds the safe inner window {ctx.inner}")
    k_radii = list(cfg.k_radii) if cfg.k_radii is not None else _default_k_radii(ctx.inner)
    d, beta = exponents(cfg)
    try:
        a0 = alpha_critical(d, beta, cfg.sigma) if d is not None else None
    except ValueError:
        a0 = None
    params = DecisionParams(cfg.slope_margin, cfg.tau_ratio)
    probe_box = cfg.probe_box if cfg.probe_box is not None else ctx.inner
    scan_rows, summary = [], []
    for a in cfg.alphas:
        rep = criticality_report(S, cfg.sigma, a, ctx.root, metric, radii, k_radii, window=ctx.window(),
                                 max_radius=ctx.inner, probe_lambda=cfg.probe_lambda, probe_box=probe_box,
                                 params=params, correction=cfg.correction)
        probes = rep.probe
        tau = dict(zip(rep.K_radii, rep.tau))
        slope = "" if rep.slope is None else rep.slope
        for r, ps, inc in zip(rep.scan.radii, rep.scan.partial_sums, rep.scan.increments):
            r = int(r)
            scan_rows.append((cfg.sigma, a, "" if a0 is None else a0, r, ps, inc, slope,
                              tau.get(r, ""), probes.get(r, ""), rep.label))
        fit = rep.scan.fit
        if fit is not None:
            summary.append((f"increments:sigma={cfg.sigma}:alpha={a}", fit.slope, fit.stderr, fit.r2,
                            fit.window[0], fit.window[1]))
        print(f"sigma={cfg.sigma} alpha={a} slope={slope if slope == '' else f'{slope:.4f}'} label={rep.label}")
    write_csv(_path(cfg, "scan.csv"), ["sigma", "alpha", "alpha0", "radius", "partial_sum", "increment",
                                       "slope_fit", "tau_K", "probe", "label"], scan_rows)
    write_csv(_path(cfg, "fitsummary.csv"), ["series_name", "slope", "stderr", "r2", "window_lo", "window_hi"],
              summary)
    return EXIT_OK


def cmd_fit(cfg) -> int:
    fits = []
    if cfg.series_csv:
        import csv

        try:
            with open(cfg.series_csv, newline="", encoding="utf-8") as fh:
                data = [(float(r["r"]), float(r["value"])) for r in csv.DictReader(fh)]
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot read series {cfg.series_csv}: {exc}") from None
        data.sort()
        r, y = np.array(data).T
        window = (cfg.window_lo, cfg.window_hi if cfg.window_hi is not None else float(r[-1]))
        fits.append((Path(cfg.series_csv).stem, fit_exponent(r, y, window)))
    else:
        ctx = load_context(cfg)
        G, metric = ctx.G, ctx.metric
        attempts = [("volume", lambda: volume_growth(G, metric))]
        d, beta = exponents(cfg)
        attempts.append(("heat_diagonal", lambda: spectral_dimension(ctx.S, ctx.root, volume_dim=d)))
        for a in cfg.alphas:
            if a > 0:
                attempts.append((f"riesz:alpha={a}", lambda a=a: riesz_exponent(
                    riesz_kernel_spectral(ctx.S, a, ctx.root), metric, a, ctx.window(), ctx.inner, cfg.correction)))
            if a > cfg.sigma:
                attempts.append((f"hardy:sigma={cfg.sigma}:alpha={a}", lambda a=a: hardy_exponent(
                    hardy_weight_spectral(ctx.S, cfg.sigma, a, ctx.root), metric, ctx.window(), ctx.inner,
                    cfg.correction)))
        for name, run in attempts:
            try:
                fits.append((name, run()))
            except (FitError, SpectralError) as exc:
                log.warning("skipping %s: %s", name, exc)
    rows, summary = [], []
    for name, f in fits:
        rows.extend((name, r, v, int(iw)) for r, v, iw in zip(f.r, f.values, f.in_window))
        summary.append((name, f.slope, f.stderr, f.r2, f.window[0], f.window[1]))
        print(f"{name} slope={f.slope:.4f} stderr={f.stderr:.2g} r2={f.r2:.4f}")
    write_csv(_path(cfg, "fit.csv"), ["series_name", "r_or_t", "value", "in_window"], rows)
    write_csv(_path(cfg, "fitsummary.csv"), ["series_name", "slope", "stderr", "r2", "window_lo", "window_hi"],
              summary)
    return EXIT_OK


def cmd_probe(cfg) -> int:
    _check_alphas(cfg)
    ctx = load_context(cfg)
    S, metric = ctx.S, ctx.metric
    form = SpectralForm(S, cfg.sigma)
    box = cfg.probe_box if cfg.probe_box is not None else None
    rows = []
    for a in cfg.alphas:
        w = hardy_weight_spectral(S, cfg.sigma, a, ctx.root)
        res = optimality_probe(form, w, metric, cfg.probe_k, cfg.probe_lambda, box)
        rows.append((cfg.sigma, a, "" if cfg.probe_k is None else cfg.probe_k, cfg.probe_lambda,
                     "" if box is None else box, res.lambda_min, int(res.lambda_min < 1.0)))
        print(f"sigma={cfg.sigma} alpha={a} probe={res.lambda_min:.10g} witness={res.lambda_min < 1.0}")
    write_csv(_path(cfg, "probe.csv"), ["sigma", "alpha", "K", "lambda", "box", "probe_value", "witness"], rows)
    return EXIT_OK


HANDLERS = {"gen": cmd_gen, "spectrum": cmd_spectrum, "heat": cmd_heat, "riesz": cmd_riesz,
            "weight": cmd_weight, "verify": cmd_verify, "scan": cmd_scan, "fit": cmd_fit, "probe": cmd_probe}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INPUT
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    limits = threadpool_limits(limits=cfg.threads) if cfg.threads else contextlib.nullcontext()
    try:
        with limits:
            return HANDLERS[cfg.command](cfg)
    except (ConfigError, GraphError, SpectralError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (QuadratureError, IndefiniteFormError, FitError) as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
