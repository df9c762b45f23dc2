"""Distances between laws on the line and exponential-rate fitting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats


class FitUnavailable(ValueError):
    """Too few points above the noise floor to fit a slope."""


@dataclass(frozen=True)
class EmpiricalMeasure:
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size < 1:
            raise ValueError("empirical measure needs at least one value")
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return int(self.values.size)

    def cdf(self, x):
        return np.searchsorted(self.values, x, side="right") / self.size


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    stderr: Optional[float]
    estimator: str
    p: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "estimator": self.estimator, "p": self.p}


def _exponent(p: float) -> float:
    return min(1.0, 1.0 / p)


def _as_values(a) -> np.ndarray:
    return a.values if isinstance(a, EmpiricalMeasure) else np.sort(np.asarray(a, float).ravel())


def wasserstein_empirical(a, b, p: float) -> DistanceEstimate:
    """d_p between two empirical laws through the sorted (quantile) coupling.

    Unequal sizes are handled exactly by integrating the two step quantile
    functions over the merged grid of breakpoints i/n and j/m. The stderr is a
    delta-method value from the spread of the matched costs (equal sizes only).
    """
    if not p > 0:
        raise ValueError("p must be positive")
    x, y = _as_values(a), _as_values(b)
    e = _exponent(p)
    if x.size == y.size:
        cost = np.abs(x - y) ** p
        mean = float(np.mean(cost))
        se_mean = float(np.std(cost, ddof=1) / math.sqrt(cost.size)) if cost.size > 1 else math.nan
    else:
        n, m = x.size, y.size
        # common refinement of the two step quantile functions
        grid = np.union1d(np.arange(1, n + 1) / n, np.arange(1, m + 1) / m)
        grid[-1] = 1.0
        widths = np.diff(np.concatenate(([0.0], grid)))
        mids = grid - widths / 2
        ix = np.minimum((mids * n).astype(np.int64), n - 1)
        iy = np.minimum((mids * m).astype(np.int64), m - 1)
        mean = float(np.sum(widths * np.abs(x[ix] - y[iy]) ** p))
        se_mean = None
    value = mean**e
    if se_mean is None or not math.isfinite(se_mean):
        se = None
    elif mean > 0:
        se = e * mean ** (e - 1) * se_mean
    else:
        se = 0.0
    return DistanceEstimate(value, se, "quantile", p)


def wasserstein_coupled(v, w, p: float) -> DistanceEstimate:
    """(mean |v - w|^p)^(1 ^ 1/p) over coupled pairs, with jackknife stderr.

    Any coupling gives an upper bound on d_p of the marginals.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    v = np.asarray(v, float).ravel()
    w = np.asarray(w, float).ravel()
    if v.size == 0 or v.size != w.size:
        raise ValueError("need a nonempty set of pairs")
    e = _exponent(p)
    cost = np.abs(v - w) ** p
    n = cost.size
    mean = float(np.mean(cost))
    if n < 2:
        return DistanceEstimate(mean**e, None, "coupled", p)
    loo = ((n * mean - cost) / (n - 1)) ** e
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return DistanceEstimate(mean**e, se, "coupled", p)


def kolmogorov_distance(a, cdf: Callable) -> float:
    x = _as_values(a)
    n = x.size
    f = np.clip(np.asarray(cdf(x), float), 0.0, 1.0)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_two_sample(a, b) -> float:
    """sup_x |F_a(x) - F_b(x)| with exact handling of ties."""
    x, y = _as_values(a), _as_values(b)
    pts = np.concatenate((x, y))
    fa = np.searchsorted(x, pts, side="right") / x.size
    fb = np.searchsorted(y, pts, side="right") / y.size
    return float(np.max(np.abs(fa - fb)))


def ks_critical(n: int, m: Optional[int] = None, level: float = 0.01) -> float:
    """KS critical value: exact one-sample quantile, asymptotic for two samples."""
    if m is None:
        return float(stats.kstwo.ppf(1 - level, n))
    c = math.sqrt(-0.5 * math.log(level / 2))
    return c * math.sqrt((n + m) / (n * m))


def default_xi_grid(n: int = 64, lo: float = 1e-3, hi: float = 1e2) -> np.ndarray:
    return np.geomspace(lo, hi, n)


def fourier_distance(cf_a: Callable, cf_b: Callable, s: float, grid=None, refine: bool = False, rtol: float = 0.01, max_refine: int = 8) -> float:
    """max over a xi grid of |cf_a - cf_b| / |xi|^s, a lower bound for the chi_s distance.

    With ``refine`` the log grid is repeatedly bisected (old nodes kept) until the
    value changes by less than ``rtol`` relative.
    """
    if not s > 0:
        raise ValueError("s must be positive")

    def evaluate(g):
        g = np.asarray(g, float)
        if np.any(g == 0):
            raise ValueError("grid must exclude 0")
        d = np.abs(np.asarray(cf_a(g)) - np.asarray(cf_b(g))) / np.abs(g) ** s
        return float(np.max(d))

    g = default_xi_grid() if grid is None else np.asarray(grid, float)
    val = evaluate(g)
    if not refine:
        return val
    for _ in range(max_refine):
        lg = np.log(np.sort(g))
        g = np.exp(np.sort(np.concatenate((lg, 0.5 * (lg[1:] + lg[:-1])))))
        new = evaluate(g)
        done = abs(new - val) <= rtol * max(val, 1e-300)
        val = new
        if done:
            break
    return val


def d1_constant(second_moment_bound: float, delta: float) -> float:
    """Constant C of the d_1 <= C chi_{2+delta}^(1/(3(2+delta))) inequality."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if second_moment_bound < 0:
        raise ValueError("second moment bound must be nonnegative")
    d = delta
    return (
        (2 ** (2 / 3) + 2 ** (-1 / 3))
        * second_moment_bound ** (1 / 3)
        / math.pi
        * (2 ** ((3 + 2 * d) / (2 + d)) / (3 + 2 * d) + 4 / 2 ** (1 / (2 + d)))
    )


def d1_bound_from_chi(chi_value: float, second_moment_bound: float, delta: float) -> float:
    return d1_constant(second_moment_bound, delta) * chi_value ** (1 / (3 * (2 + delta)))


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    residual: float  # weighted residual sum of squares
    slope_stderr: float
    n_used: int
    used: tuple[bool, ...]


def decay_fit(times: Sequence[float], estimates: Sequence[float], stderrs: Optional[Sequence[float]] = None, min_points: int = 4) -> DecayFit:
    """Weighted least squares of log(estimate) on t.

    A point is used only when estimate > 3 * stderr. Weights are the inverse
    squared relative stderrs; without stderrs the fit is ordinary least squares.
    """
    t = np.asarray(times, float)
    y = np.asarray(estimates, float)
    se = np.zeros_like(y) if stderrs is None else np.array([np.nan if s is None else s for s in stderrs], float)
    use = (y > 0) & np.isfinite(y) & ~(y <= 3 * np.nan_to_num(se, nan=0.0))
    if use.sum() < min_points:
        raise FitUnavailable(f"only {int(use.sum())} usable points, need {min_points}")
    tt, ly = t[use], np.log(y[use])
    rel = np.nan_to_num(se[use], nan=0.0) / y[use]
    weighted = stderrs is not None and np.all(rel > 0)
    wts = 1.0 / rel**2 if weighted else np.ones_like(tt)
    X = np.column_stack((tt, np.ones_like(tt)))
    XtW = X.T * wts
    cov = np.linalg.inv(XtW @ X)
    slope, intercept = cov @ (XtW @ ly)
    res = ly - (slope * tt + intercept)
    rss = float(np.sum(wts * res**2))
    if weighted:
        slope_se = math.sqrt(cov[0, 0])
    else:
        dof = max(1, tt.size - 2)
        slope_se = math.sqrt(cov[0, 0] * rss / dof)
    return DecayFit(float(slope), float(intercept), rss, slope_se, int(use.sum()), tuple(bool(u) for u in use))
