"""Command-line experiments.

Every command writes one table (CSV or JSON) plus ``manifest.json`` with
sha256 checksums into ``--out``.  Parameters come from built-in defaults,
then an optional ``--config`` JSON file, then explicit flags.

Exit codes: 0 success, 2 invalid arguments, 3 numerical-quality failure,
4 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import counterexamples as cx
from . import harmonic as hm
from . import lorentz as lz
from . import maximal as mx
from . import symbols as sy
from .dyadic import DyadicSpace
from .matrices import Matrix
from .reporting import emit, log2_or_nan, write_manifest

EXIT_OK, EXIT_ARGS, EXIT_QUALITY, EXIT_IO = 0, 2, 3, 4


class QualityFailure(RuntimeError):
    """Results were produced but miss their stated tolerance."""


# ---------------------------------------------------------------------------
# parameter parsing

def int_list(v) -> list[int]:
    """'2..10', '1,3,5', '-5..5' or a JSON list."""
    if isinstance(v, (list, tuple)):
        return [int(x) for x in v]
    if isinstance(v, int):
        return [v]
    out = []
    for part in str(v).split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ValueError(f"empty integer list {v!r}")
    return out


def float_list(v) -> list[float]:
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    if isinstance(v, (int, float)):
        return [float(v)]
    return [float(x) for x in str(v).split(",") if x.strip()]


def str_list(v) -> list[str]:
    if isinstance(v, (list, tuple)):
        return [str(x) for x in v]
    return [x.strip() for x in str(v).split(",") if x.strip()]


def opt_float(v):
    return None if v in (None, "", "none") else float(v)


@dataclass
class ExperimentConfig:
    command: str
    params: dict = field(default_factory=dict)
    out: str = "results"
    format: str = "csv"
    seed: int = 0


@dataclass
class Table:
    header: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def append(self, row):
        self.rows.append(row)


@dataclass
class Command:
    name: str
    help: str
    run: object
    params: dict  # name -> (default, converter)


COMMANDS: dict[str, Command] = {}


def command(name: str, help: str, **params):
    def register(fn):
        COMMANDS[name] = Command(name, help, fn, params)
        return fn
    return register


# ---------------------------------------------------------------------------
# commands fill a Table (header first, then rows) and may raise
# QualityFailure once every row is in

def _load_matrix(params, rng) -> Matrix:
    if params["matrix"]:
        return Matrix.from_json(Path(params["matrix"]).read_text())
    rows, cols = (int(x) for x in str(params["random"]).lower().split("x"))
    return Matrix(rng.standard_normal((rows, cols)))


@command("h-estimate", "estimate h_p / weak / mixed constants of a matrix",
         matrix=(None, str), random=("3x3", str), mode=("strong", str), p=(2.0, float),
         q=(None, opt_float), restarts=(8, int), max_iters=(60, int), bounds=("bv,trivial", str_list))
def _h_estimate(params, seed, sink):
    rng = np.random.default_rng(seed)
    A = _load_matrix(params, rng)
    est = mx.estimate_h(A, params["mode"], params["p"], params["q"], restarts=params["restarts"],
                        max_iters=params["max_iters"], seed=seed, bounds=tuple(params["bounds"]))
    sink.header = ["quantity", "p", "q", "lower_bound", "upper_bound", "upper_kind", "iterations",
              "restarts", "seed", "status"]
    sink.append([est.quantity, est.p, est.q, est.lower_bound, est.upper_bound, est.upper_kind,
                 est.iterations, est.restarts, est.seed, est.status])


@command("oracle-check", "compare the estimator with the brute-force oracle on random matrices",
         trials=(20, int), levels=(3, int), max_rows=(3, int), max_cols=(3, int), tol=(1e-6, float))
def _oracle_check(params, seed, sink):
    rng = np.random.default_rng(seed)
    sink.header = ["trial", "rows", "cols", "estimate", "oracle", "abs_error", "ok"]
    bad = 0
    for t in range(params["trials"]):
        m = int(rng.integers(1, params["max_rows"] + 1))
        n = int(rng.integers(1, min(params["max_cols"], params["levels"]) + 1))
        A = Matrix(rng.standard_normal((m, n)))
        est = mx.estimate_h(A, seed=seed + t).lower_bound
        orc = mx.exact_h2_oracle(A, DyadicSpace(params["levels"]))
        err = abs(est - orc)
        ok = err <= params["tol"]
        bad += not ok
        sink.append([t, m, n, est, orc, err, ok])
    if bad:
        raise QualityFailure(f"{bad} of {params['trials']} trials exceed tolerance {params['tol']}")


@command("counterexample", "sign-matrix ratios against N^(1/2 - theta)",
         n=("2..10", int_list), theta=("0,0.25,0.4", float_list))
def _counterexample(params, seed, sink):
    sink.header = list(cx.CounterexampleReport.CSV_FIELDS)
    bad = 0
    for theta in params["theta"]:
        for N in params["n"]:
            rep = cx.verify_counterexample(N, theta)
            bad += not rep.exact_match
            sink.append([rep.N, rep.theta, rep.ratio, rep.target, rep.exact_match])
    if bad:
        raise QualityFailure(f"{bad} counterexample ratios miss their target")


@command("band-bound", "h estimates of banded weight matrices with their upper functionals",
         kind=("log", str), theta=(2.0, float), sizes=("4..12", int_list), restarts=(4, int))
def _band_bound(params, seed, sink):
    sizes = params["sizes"]
    w = lz.make_weight(params["kind"], params["theta"], max(sizes))
    sink.header = ["size", "h_estimate", "bv_bound", "lorentz_column", "lorentz_crude", "status"]
    for n in sizes:
        A = cx.band_matrix(w, n)
        est = mx.estimate_h(A, restarts=params["restarts"], seed=seed)
        lb = lz.lorentz_column_bound(A, w)
        sink.append([n, est.lower_bound, mx.bv_upper_bound(A), lb.column, lb.crude, est.status])


@command("lorentz", "finite-horizon diagnostics of the weight conditions",
         kind=("log", str), theta=("0.5,1,2", float_list), horizon=(1 << 20, int))
def _lorentz(params, seed, sink):
    sink.header = ["kind", "theta", "horizon", "cdn1_ratio_bound", "cdn2_partial_sum", "decay_exponent",
              "cdn2_blocks_decreasing", "cdn2_converges"]
    for theta in params["theta"]:
        w = lz.make_weight(params["kind"], theta, params["horizon"])
        rep = lz.check_conditions(w, params["horizon"])
        sink.append([params["kind"], theta, params["horizon"], rep.cdn1_ratio_bound, rep.cdn2_partial_sum,
                     rep.decay_exponent, rep.flags["cdn2_blocks_decreasing"], rep.flags["cdn2_converges"]])


@command("lp-decay", "norms of Delta_k composed with Littlewood-Paley pieces",
         M=(1024, int), L=(2.0, float), k=(0, int), j=("0..6", int_list), tol=(1e-10, float))
def _lp_decay(params, seed, sink):
    grid = hm.PeriodicGrid(params["M"], params["L"])
    sink.header = ["j", "norm", "log2_norm", "converged"]
    for j in params["j"]:
        r = hm.cross_norm("mart_then_lp", grid, k=params["k"], j=j, tol=params["tol"], seed=seed)
        sink.append([j, r.value, log2_or_nan(r.value), r.converged])


@command("vr-decay", "norms of V_r = sum_j Delta_j LP_(j+r)",
         M=(1024, int), L=(2.0, float), r=("-5..5", int_list), tol=(1e-10, float))
def _vr_decay(params, seed, sink):
    grid = hm.PeriodicGrid(params["M"], params["L"])
    sink.header = ["r", "norm", "log2_norm", "converged", "terms"]
    for r in params["r"]:
        res = hm.cross_norm("v_r", grid, r=r, tol=params["tol"], seed=seed)
        sink.append([r, res.value, log2_or_nan(res.value), res.converged, len(res.terms)])


def _symbol_by_name(name: str, theta: float, grid: hm.PeriodicGrid) -> hm.Symbol:
    if name == "one":
        return hm.constant_symbol(1.0)
    if name in ("lower", "upper", "diagonal"):
        return hm.paraproduct_symbol(name)
    return sy.marcinkiewicz_symbol(name, theta, grid=grid)


def _load_grid_function(path, grid=None) -> hm.GridFunction:
    return hm.GridFunction.from_json(Path(path).read_text())


@command("bilinear-apply", "evaluate W_sigma(f, g) on a periodic grid",
         symbol=("one", str), theta=(2.0, float), M=(256, int), L=(1.0, float),
         f=(None, str), g=(None, str), method=("auto", str))
def _bilinear_apply(params, seed, sink):
    if params["f"] and params["g"]:
        f, g = _load_grid_function(params["f"]), _load_grid_function(params["g"])
        grid = f.grid
    else:
        grid = hm.PeriodicGrid(params["M"], params["L"])
        rng = np.random.default_rng(seed)
        f = hm.GridFunction(grid, rng.standard_normal(grid.M))
        g = hm.GridFunction(grid, rng.standard_normal(grid.M))
    sigma = _symbol_by_name(params["symbol"], params["theta"], grid)
    W = hm.apply_bilinear(sigma, f, g, method=params["method"])
    sink.header = ["x", "re", "im"]
    for x, z in zip(grid.x.tolist(), W.values.tolist()):
        sink.append([x, z.real, z.imag])


def _family(name: str, params) -> list:
    if name == "sign":
        return [(N, cx.sign_matrix(N, params["theta"])) for N in params["n"]]
    if name == "diag":
        return [(c, Matrix(np.eye(params["size"]) * c)) for c in params["scales"]]
    if name == "band":
        w = lz.make_weight("log", params["theta"], max(params["n"]))
        return [(n, cx.band_matrix(w, n)) for n in params["n"]]
    raise ValueError(f"unknown family {name!r}; use sign, diag or band")


@command("equivalence", "H(A) against multiplier certificates of sigma_A",
         family=("sign", str), n=("2..6", int_list), theta=(0.25, float), size=(4, int),
         scales=("0.5,1,2,4", float_list), p1=(2.0, float), p2=(2.0, float), L=(1.0, float),
         max_M=(1 << 18, int), restarts=(2, int), max_iters=(10, int))
def _equivalence(params, seed, sink):
    sink.header = list(sy.EquivalenceRow.CSV_FIELDS)
    family = _family(params["family"], params)
    rows = sy.equivalence_experiment(family, params["p1"], params["p2"], params["L"], params["max_M"],
                                     restarts=params["restarts"], max_iters=params["max_iters"], seed=seed)
    for r in rows:
        sink.append([r.label, r.size, r.H_est, r.mult_cert, r.ratio, r.required_M, r.flags])


@command("resynth", "sup error of the truncated local Fourier expansion",
         symbol=("log_theta", str), theta=(2.0, float), K=("0,1,2,4,8,16", int_list),
         j=("-4..4", int_list), per_octave=(16, int))
def _resynth(params, seed, sink):
    sink.header = ["K", "sup_error", "log2_error", "worst_xi", "worst_eta"]
    sigma = sy.marcinkiewicz_symbol(params["symbol"], params["theta"])
    reps = sy.resynthesis_errors(sigma, params["K"], js=params["j"], per_octave=params["per_octave"])
    for r in reps:
        sink.append([r.K, r.sup_error, log2_or_nan(r.sup_error), r.worst_point[0], r.worst_point[1]])


@command("paraproduct", "frequency support of paraproduct summands and the partition identity",
         M=(1024, int), L=(2.0, float))
def _paraproduct(params, seed, sink):
    grid = hm.PeriodicGrid(params["M"], params["L"])
    rng = np.random.default_rng(seed)
    f = hm.GridFunction(grid, rng.standard_normal(grid.M))
    g = hm.GridFunction(grid, rng.standard_normal(grid.M))
    sink.header = ["j", "support_min", "support_max", "annulus_lo", "annulus_hi", "exact_ok", "fft_leak"]
    bad = 0
    for j in grid.lp_cover():
        if 2.0 ** (j + 2) > grid.nyquist:
            continue
        c = hm.paraproduct_spectrum(f, g, j)
        bad += not c.exact_ok
        sink.append([j, c.support_min, c.support_max, c.annulus[0], c.annulus[1], c.exact_ok, c.fft_leak])
    if bad:
        raise QualityFailure(f"{bad} summands leave their annulus")


@command("symbol-h", "sampled H functional of a symbol for growing index ranges",
         symbol=("log_theta", str), theta=(2.0, float), n=(3, int), J=("1..3", int_list),
         samples=(4, int), order=(0, int), restarts=(2, int))
def _symbol_h(params, seed, sink):
    sink.header = ["J", "value", "worst_xi", "worst_eta"]
    name = params["symbol"]
    if name == "plain_counterexample":
        sigma = sy.marcinkiewicz_symbol(name, params["theta"], N=params["n"])
    else:
        sigma = sy.marcinkiewicz_symbol(name, params["theta"])
    opts = mx.EstimateOptions(restarts=params["restarts"], max_iters=30, seed=seed)
    for J in params["J"]:
        rep = sy.h_norm_estimate(sigma, J, samples=params["samples"], order=params["order"], options=opts)
        sink.append([J, rep.value, rep.worst_point[0] if rep.worst_point else None,
                     rep.worst_point[1] if rep.worst_point else None])


# ---------------------------------------------------------------------------
# driver

def resolve_params(cmd: Command, file_params: dict, flag_params: dict) -> dict:
    unknown = set(file_params) - set(cmd.params)
    if unknown:
        raise ValueError(f"unknown parameters for {cmd.name}: {sorted(unknown)}")
    merged = {}
    for name, (default, conv) in cmd.params.items():
        value = default
        if name in file_params:
            value = file_params[name]
        if flag_params.get(name) is not None:
            value = flag_params[name]
        merged[name] = value if value is None else conv(value)
    return merged


def run(config: ExperimentConfig) -> Path:
    """Execute one experiment; returns the manifest path.

    If the command fails after producing rows, those rows are still written
    and the manifest is marked failed before the exception propagates.
    """
    cmd = COMMANDS.get(config.command)
    if cmd is None:
        raise ValueError(f"unknown command {config.command!r}")
    params = resolve_params(cmd, config.params, {})
    out = Path(config.out)
    record = dict(params, seed=config.seed)
    table = Table()
    try:
        cmd.run(params, config.seed, table)
    except Exception as exc:
        if table.rows or isinstance(exc, QualityFailure):
            path = emit(out, cmd.name, table.header, table.rows, config.format)
            write_manifest(out, cmd.name, record, [path], "failed", str(exc) or repr(exc))
        raise
    path = emit(out, cmd.name, table.header, table.rows, config.format)
    return write_manifest(out, cmd.name, record, [path])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="marcin-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS.values():
        p = sub.add_parser(cmd.name, help=cmd.help)
        p.add_argument("--out", default=None, help="output directory (default: results)")
        p.add_argument("--format", choices=["csv", "json"], default=None)
        p.add_argument("--config", default=None, help="JSON file with parameters")
        p.add_argument("--seed", type=int, default=None)
        for name, (default, _) in cmd.params.items():
            p.add_argument("--" + name.replace("_", "-"), dest=name, default=None,
                           help=f"default: {default}")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cmd = COMMANDS[args.command]
    try:
        file_cfg = json.loads(Path(args.config).read_text()) if args.config else {}
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_ARGS
    file_params = dict(file_cfg.get("params", {k: v for k, v in file_cfg.items()
                                                if k not in ("out", "format", "seed", "command")}))
    flags = {name: getattr(args, name) for name in cmd.params}
    seed = args.seed if args.seed is not None else int(file_cfg.get("seed", 0))
    out = args.out or file_cfg.get("out", "results")
    fmt = args.format or file_cfg.get("format", "csv")
    try:
        params = resolve_params(cmd, file_params, flags)
        config = ExperimentConfig(cmd.name, params, out, fmt, seed)
        manifest = run(config)
    except QualityFailure as exc:
        print(f"quality failure: {exc}", file=sys.stderr)
        return EXIT_QUALITY
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, OverflowError, KeyError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    print(manifest)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
