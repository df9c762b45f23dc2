"""Config-driven decay and stationarity experiments with CSV/JSON report output."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .datum import InitialDatum, parse_datum
from .fixed_point import build_pool, load_pool, sample_steady, save_pool, MixtureLaw
from .kernels import RateUndefined, find_alpha, parse_kernel, rate_constant, validate_h0
from .metrics import (
    DistanceEstimate,
    FitUnavailable,
    kolmogorov_distance,
    ks_critical,
    ks_two_sample,
    decay_fit,
    wasserstein_coupled,
    wasserstein_empirical,
)
from .stable import StableParams, params_from_tails, stable_cdf
from .streams import block_rng
from .wild import simulate_coupled, simulate_v_t, steady_quantile

ESTIMATORS = ("coupled", "quantile", "ks")
DEFAULT_TOLERANCE = 0.03
ALPHA_SNAP = 1e-9
CSV_COLUMNS = ("t", "p", "estimate", "stderr", "n_samples", "estimator")


class ConfigError(ValueError):
    pass


class ExperimentError(RuntimeError):
    """A module error raised while processing time index ``t_index``."""

    def __init__(self, message: str, t: float, t_index: int):
        super().__init__(f"t={t!r} (index {t_index}): {message}")
        self.t = t
        self.t_index = t_index


def load_schema(name: str) -> dict:
    return json.loads(resources.files("kaclab").joinpath("schemas", name).read_text())


def snap_alpha(alpha: float) -> float:
    """Round alpha to 1 or 2 when within root-finding tolerance."""
    for v in (1.0, 2.0):
        if abs(alpha - v) <= ALPHA_SNAP:
            return v
    return alpha


def stable_from_config(spec: Optional[dict], alpha: float, datum: Optional[InitialDatum] = None) -> StableParams:
    """StableParams from {alpha, lambda, beta, gamma0}, {c0_plus, c0_minus[, alpha]} or datum metadata."""
    if spec is None:
        if datum is None:
            raise ConfigError("need stable parameters, tail constants or a datum")
        if alpha == 2:
            var = getattr(datum, "variance", None)
            if var is None:
                raise ConfigError("alpha = 2 needs the datum variance or explicit stable parameters")
            return StableParams(2.0, var / 2.0)
        return params_from_tails(datum.c0_plus, datum.c0_minus, alpha, datum.gamma0 if alpha == 1 else 0.0)
    if "lambda" in spec:
        return StableParams(float(spec.get("alpha", alpha)), float(spec["lambda"]), float(spec.get("beta", 0.0)), float(spec.get("gamma0", 0.0)))
    if "c0_plus" in spec:
        return params_from_tails(float(spec["c0_plus"]), float(spec["c0_minus"]), float(spec.get("alpha", alpha)), float(spec.get("gamma0", 0.0)))
    raise ConfigError("stable block needs 'lambda' or 'c0_plus'/'c0_minus'")


@dataclass(frozen=True)
class ExperimentConfig:
    kernel: str
    datum: str
    t_grid: tuple[float, ...]
    samples: int
    seed: int
    p: float = 2.0
    estimator: str = "coupled"
    regime: Optional[str] = None
    stable: Optional[dict] = None
    tolerance: float = DEFAULT_TOLERANCE
    replica_budget: Optional[int] = None
    pool_size: int = 100_000
    pool_depth: int = 1 << 14
    pool_cache: Optional[str] = None
    threads: Optional[int] = None
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        t = tuple(float(x) for x in self.t_grid)
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "p", float(self.p))
        if not t:
            raise ConfigError("t_grid must be nonempty")
        if any(b <= a for a, b in zip(t, t[1:])) or t[0] < 0:
            raise ConfigError("t_grid must be nonnegative and strictly increasing")
        if self.seed is None:
            raise ConfigError("seed is mandatory")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}")
        if self.estimator in ("coupled", "quantile") and self.samples < 1000:
            raise ConfigError("distance estimation needs samples >= 1000")
        if self.samples < 1:
            raise ConfigError("samples must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        jsonschema.validate(d, load_schema("experiment_config.schema.json"))
        kw = dict(d)
        kw["t_grid"] = tuple(kw["t_grid"])
        return cls(**kw)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class DecayReport:
    rows: list[dict]
    slope: Optional[float]
    intercept: Optional[float]
    slope_stderr: Optional[float]
    theory_rate: Optional[float]
    log_correction: bool
    passed: bool
    tolerance: float
    truncations: list[int]
    partial: bool
    wall_time: float
    alpha: float
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "theory_rate": self.theory_rate,
            "pass": self.passed,
            "tolerance": self.tolerance,
            "log_correction": self.log_correction,
            "partial": self.partial,
            "alpha": self.alpha,
            "truncations": self.truncations,
            "notes": self.notes,
        }


def _get_pool(cfg: ExperimentConfig, kernel, alpha) -> MixtureLaw | np.ndarray:
    if cfg.pool_cache and Path(cfg.pool_cache).exists():
        return load_pool(cfg.pool_cache)
    pool = build_pool(kernel, alpha, cfg.pool_size, cfg.pool_depth, cfg.seed, cfg.threads)
    if cfg.pool_cache:
        save_pool(cfg.pool_cache, pool)
    return pool


def run_experiment(cfg: ExperimentConfig) -> DecayReport:
    start = time.perf_counter()
    kernel = parse_kernel(cfg.kernel)
    datum = parse_datum(cfg.datum)
    h0 = validate_h0(kernel, cfg.p)
    if not h0.passed:
        raise ConfigError("kernel fails the standing assumptions: " + "; ".join(h0.messages))
    alpha = snap_alpha(find_alpha(kernel))
    stable = stable_from_config(cfg.stable, alpha, datum)
    notes = []
    if cfg.estimator == "quantile" and alpha < 2 and cfg.p >= alpha:
        notes.append("estimator unreliable: p-th moments of the summands are infinite")

    steady_q = None
    pool = None
    if cfg.estimator == "coupled":
        steady_q = steady_quantile(kernel, stable)
    else:
        pool = _get_pool(cfg, kernel, alpha)

    rows, truncs = [], []
    partial = False
    used = 0
    for ti, t in enumerate(cfg.t_grid):
        if cfg.replica_budget is not None and used + cfg.samples > cfg.replica_budget:
            partial = True
            notes.append(f"replica budget {cfg.replica_budget} reached before t={t!r}")
            break
        try:
            est, trunc = _estimate_at(cfg, kernel, datum, stable, steady_q, pool, t, ti)
        except Exception as exc:  # surface with the offending time index
            raise ExperimentError(str(exc), t, ti) from exc
        used += cfg.samples
        truncs.append(trunc)
        rows.append(
            {"t": t, "p": cfg.p, "estimate": est.value, "stderr": est.stderr, "n_samples": cfg.samples - trunc, "estimator": est.estimator}
        )

    slope = intercept = slope_se = None
    try:
        fit = decay_fit([r["t"] for r in rows], [r["estimate"] for r in rows], [r["stderr"] for r in rows] if cfg.estimator != "ks" else None)
        slope, intercept, slope_se = fit.slope, fit.intercept, fit.slope_stderr
    except FitUnavailable as exc:
        notes.append(f"fit unavailable: {exc}")

    theory, logc = None, False
    if cfg.regime:
        try:
            dr = rate_constant(kernel, cfg.p, cfg.regime, alpha)
            theory, logc = dr.rate, dr.log_correction
        except (RateUndefined, ValueError) as exc:
            notes.append(f"no theoretical rate: {exc}")
    if cfg.estimator == "ks":
        passed = all(r["estimate"] <= ks_critical(r["n_samples"]) for r in rows) and not partial
    else:
        passed = slope is not None and theory is not None and slope <= -theory + cfg.tolerance and not partial
    return DecayReport(
        rows, slope, intercept, slope_se, theory, logc, bool(passed), cfg.tolerance, truncs, partial,
        time.perf_counter() - start, alpha, notes,
    )


def _estimate_at(cfg, kernel, datum, stable, steady_q, pool, t, ti) -> tuple[DistanceEstimate, int]:
    if cfg.estimator == "coupled":
        b = simulate_coupled(kernel, datum, steady_q, t, cfg.samples, cfg.seed, ti, cfg.threads)
        return wasserstein_coupled(b.initial, b.steady, cfg.p), b.truncated
    b = simulate_v_t(kernel, datum, t, cfg.samples, cfg.seed, ti, cfg.threads)
    exact = isinstance(pool, MixtureLaw) and pool.exact and stable.alpha in (1.0, 2.0) and stable.beta == 0
    if cfg.estimator == "ks" and exact:
        return DistanceEstimate(kolmogorov_distance(b.values, lambda x: stable_cdf(stable, x)), None, "ks"), b.truncated
    steady = sample_steady(kernel, stable, pool, block_rng(cfg.seed, "steady", ti), b.values.size)
    if cfg.estimator == "ks":
        return DistanceEstimate(ks_two_sample(b.values, steady), None, "ks"), b.truncated
    return wasserstein_empirical(b.values, steady, cfg.p), b.truncated


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_csv(report: DecayReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def emit_report(report: DecayReport, out_dir, formats=("csv", "json")) -> dict[str, Path]:
    """Write report.csv and summary.json into ``out_dir``; the summary is schema-checked."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    if "csv" in formats:
        paths["csv"] = out / "report.csv"
        paths["csv"].write_text(report_csv(report))
    if "json" in formats:
        summary = report.summary()
        jsonschema.validate(summary, load_schema("report_summary.schema.json"))
        paths["json"] = out / "summary.json"
        paths["json"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return paths
