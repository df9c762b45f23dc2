"""Command line entry point: ``kaclab <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .datum import parse_datum
from .finiteness import (
    CustomRemainder,
    LogRemainder,
    OrderRemainder,
    PowerRemainder,
    TailSpec,
    check_finiteness,
    steady_tail_spec,
)
from .fixed_point import build_pool, load_pool, sample_steady, save_pool
from .fourier import evolve_cf, make_grid, wild_partial_sum
from .kernels import find_alpha, parse_kernel, rate_constant, s_function, spectral_profile
from .metrics import wasserstein_coupled, wasserstein_empirical
from .streams import block_rng
from .wild import simulate_v_t

VALUE_COLUMNS = ("value", "estimate")


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    return x


def _emit_json(obj, out):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_text(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _need_seed(args):
    if args.seed is None:
        raise SystemExit(f"error: {args.command} is stochastic and requires --seed")
    return args.seed


def _stable_arg(text, alpha, datum=None):
    spec = json.loads(text) if text else None
    return ex.stable_from_config(spec, alpha, datum)


def read_values(path) -> np.ndarray:
    """Values column of a CSV written by this tool (``value`` or ``estimate``), or a bare column."""
    text = Path(path).read_text()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return np.empty(0)
    header = rows[0]
    for name in VALUE_COLUMNS:
        if name in header:
            k = header.index(name)
            return np.array([float(r[k]) for r in rows[1:] if r], float)
    return np.array([float(r[-1]) for r in rows if r], float)


def cmd_spectral(args):
    k = parse_kernel(args.kernel)
    prof = spectral_profile(k)
    out = {"kernel": k.to_spec(), "alpha": ex.snap_alpha(prof.alpha), "p0": prof.p0, "p_bar": prof.p_bar}
    if args.q:
        out["S"] = {repr(q): s_function(k, q) for q in args.q}
    _emit_json(out, args.out)


def cmd_rates(args):
    k = parse_kernel(args.kernel)
    alpha = ex.snap_alpha(find_alpha(k))
    r = rate_constant(k, args.p, args.regime, alpha)
    _emit_json({"rate": r.rate, "log_correction": r.log_correction, "form": r.form, "regime": r.regime, "p": r.p, "alpha": r.alpha}, args.out)


def _value_csv(values) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("sample_index", "value"))
    for i, v in enumerate(values):
        w.writerow((i, repr(float(v))))
    return buf.getvalue()


def cmd_simulate(args):
    seed = _need_seed(args)
    b = simulate_v_t(parse_kernel(args.kernel), parse_datum(args.datum), args.t, args.samples, seed, 0, args.threads)
    if b.truncated:
        sys.stderr.write(f"{b.truncated} replicas dropped (N_t above cap)\n")
    _emit_text(_value_csv(b.values), args.out)


def cmd_steady(args):
    seed = _need_seed(args)
    k = parse_kernel(args.kernel)
    alpha = ex.snap_alpha(find_alpha(k))
    stable = _stable_arg(args.stable, alpha, parse_datum(args.datum) if args.datum else None)
    if args.pool_cache and Path(args.pool_cache).exists():
        pool = load_pool(args.pool_cache)
    else:
        pool = build_pool(k, alpha, args.pool_size, args.depth, seed, args.threads)
        if args.pool_cache:
            save_pool(args.pool_cache, pool)
    v = sample_steady(k, stable, pool, block_rng(seed, "steady"), args.samples)
    _emit_text(_value_csv(v), args.out)


def cmd_distance(args):
    a, b = read_values(args.a), read_values(args.b)
    if args.estimator == "coupled":
        est = wasserstein_coupled(a, b, args.p)
    else:
        est = wasserstein_empirical(a, b, args.p)
    _emit_json(est.as_dict(), args.out)


def cmd_oracle(args):
    k = parse_kernel(args.kernel)
    datum = parse_datum(args.datum)
    grid = make_grid(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t", "xi", "re", "im"))
    for t in args.t:
        if args.method == "wild":
            g = wild_partial_sum(k, datum.cf, t, args.terms, grid)
        else:
            g = evolve_cf(k, datum.cf, t, grid, args.dt)
        for x, v in zip(g.xi, g.values):
            w.writerow((repr(float(t)), repr(float(x)), repr(float(v.real)), repr(float(v.imag))))
    _emit_text(buf.getvalue(), args.out)


def cmd_decay(args):
    d = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        d["seed"] = args.seed
    if args.threads is not None:
        d["threads"] = args.threads
    cfg = ex.ExperimentConfig.from_dict(d)
    report = ex.run_experiment(cfg)
    out = args.out or cfg.outputs.get("dir") or "."
    paths = ex.emit_report(report, out)
    sys.stdout.write(json.dumps({k: str(v) for k, v in paths.items()}) + "\n")
    return 0 if report.passed else 1


def _remainder(d: dict):
    kind = d.get("type", "power")
    if kind == "power":
        return PowerRemainder(float(d["eps"]))
    if kind == "log":
        return LogRemainder(float(d["eps"]))
    if kind == "order":
        return OrderRemainder(float(d["order"]))
    if kind == "custom":
        return CustomRemainder(None, d.get("integrable"))
    raise ValueError(f"unknown remainder type {kind!r}")


def cmd_check_finiteness(args):
    d = json.loads(Path(args.config).read_text())
    k = parse_kernel(d["kernel"])
    alpha = ex.snap_alpha(find_alpha(k))
    stable = ex.stable_from_config(d.get("stable"), alpha)
    p = float(d["p"])
    tail = d.get("tail", "steady")
    if tail == "steady":
        spec = steady_tail_spec(k, stable, p)
    else:
        spec = TailSpec(
            tail["c_minus"], tail["c_plus"], _remainder(tail.get("remainder", {})), float(tail.get("gamma0", 0.0)),
            tail.get("one_sided_moment"), tail.get("finite_p_moment"),
        )
    _emit_json(check_finiteness(spec, k, stable, p).as_dict(), args.out)


def _global_flags(default):
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=default, help="64-bit seed (required for stochastic commands)")
    g.add_argument("--threads", type=int, default=default)
    g.add_argument("--out", default=default, help="output file (directory for decay); stdout when omitted")
    return g


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    common = _global_flags(argparse.SUPPRESS)
    ap = argparse.ArgumentParser(prog="kaclab", parents=[_global_flags(None)], description="Kac-type kinetic models: simulation and rate checks")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=fn)
        return p

    p = add("spectral", cmd_spectral, "alpha, p0, p_bar and S values of a kernel")
    p.add_argument("--kernel", required=True)
    p.add_argument("--q", type=float, nargs="*", default=[])

    p = add("rates", cmd_rates, "theoretical decay exponent")
    p.add_argument("--kernel", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--regime", required=True)

    p = add("simulate", cmd_simulate, "samples of V_t as CSV sample_index,value")
    p.add_argument("--kernel", required=True)
    p.add_argument("--datum", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--samples", type=int, default=10_000)

    p = add("steady", cmd_steady, "samples of the steady state")
    p.add_argument("--kernel", required=True)
    p.add_argument("--stable", default=None, help='JSON, e.g. {"lambda": 1.0} or {"c0_plus": 0.5, "c0_minus": 0.5}')
    p.add_argument("--datum", default=None, help="derive the stable parameters from this datum")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--pool-size", type=int, default=100_000)
    p.add_argument("--depth", type=int, default=1 << 14)
    p.add_argument("--pool-cache", default=None)

    p = add("distance", cmd_distance, "d_p between two CSV samples")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--estimator", choices=("quantile", "coupled"), default="quantile")

    p = add("oracle", cmd_oracle, "characteristic function on the closed grid as CSV t,xi,re,im")
    p.add_argument("--kernel", required=True)
    p.add_argument("--datum", required=True)
    p.add_argument("--t", type=float, nargs="+", required=True)
    p.add_argument("--method", choices=("ode", "wild"), default="ode")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--terms", type=int, default=60)

    p = add("decay", cmd_decay, "run a decay or stationarity experiment from a JSON config")
    p.add_argument("--config", required=True)

    p = add("check-finiteness", cmd_check_finiteness, "sufficient check for d_p(mu_0, mu_inf) < inf")
    p.add_argument("--config", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    return int(rc or 0)


if __name__ == "__main__":
    sys.exit(main())
