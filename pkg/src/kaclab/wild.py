"""Probabilistic representation of the solution: V_t = sum_j beta_{j,N_t} X_j.

Weights are grown by replace-and-append: the split entry keeps its slot
(multiplied by L) and the R-child goes to the end. Since the X_j are i.i.d.
only the multiset of weights matters, which this growth reproduces exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from . import _engine
from .datum import InitialDatum
from .kernels import CollisionKernel, s_function
from .stable import StableParams, stable_ppf
from .streams import block_rng, parallel_map, split_blocks

N_T_CAP = 1 << 20
VT_BLOCK = 1024
LEAF_BATCH = 1 << 21  # leaves per compiled call, bounds memory per worker


class CouplingUnavailable(ValueError):
    """No exact steady-state quantile function is available."""


@dataclass(frozen=True)
class WeightArray:
    weights: np.ndarray

    @classmethod
    def initial(cls) -> "WeightArray":
        return cls(np.ones(1))

    @property
    def n(self) -> int:
        return int(self.weights.size)

    def split(self, index: int, l: float, r: float) -> "WeightArray":
        """Replace entry ``index`` by w*l and append w*r."""
        w = self.weights
        b = w[index]
        out = np.empty(w.size + 1)
        out[:-1] = w
        out[index] = b * l
        out[-1] = b * r
        return WeightArray(out)

    def power_sum(self, p: float) -> float:
        w = self.weights
        return float(np.sum(w[w > 0] ** p))


def draw_splits(kernel: CollisionKernel, rng: np.random.Generator, m: int):
    """Uniforms for the split indices and m fresh (L, R) pairs, in a fixed order."""
    u = rng.random(m)
    left, right = kernel.sample(rng, m)
    return u, np.ascontiguousarray(left, float), np.ascontiguousarray(right, float)


def grow_weights(array: WeightArray, steps: int, kernel: CollisionKernel, rng: np.random.Generator) -> WeightArray:
    if steps < 0:
        raise ValueError("steps must be >= 0")
    u, left, right = draw_splits(kernel, rng, steps)
    w = array
    for k in range(steps):
        n = w.n
        w = w.split(min(int(u[k] * n), n - 1), left[k], right[k])
    return w


def grow_batch(kernel: CollisionKernel, sizes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Flat buffer with one freshly grown weight array per entry of ``sizes``."""
    sizes = np.asarray(sizes, dtype=np.int64)
    total = int(sizes.sum())
    u, left, right = draw_splits(kernel, rng, total - sizes.size)
    return _engine.grow_segments(sizes, u, left, right, np.empty(total))


def sample_n_t(t: float, rng: np.random.Generator, size=None):
    """Geometric N_t on {1, 2, ...} with success probability e^-t."""
    if t < 0:
        raise ValueError("t must be >= 0")
    n = 1 if size is None else size
    if t == 0:
        out = np.ones(n, dtype=np.int64)
    else:
        u = 1.0 - rng.random(n)  # in (0, 1]
        denom = math.log1p(-math.exp(-t))
        out = 1 + np.floor(np.log(u) / denom)
        out = np.minimum(out, 2.0**62).astype(np.int64)
    return int(out[0]) if size is None else out


def truncation_mass(t: float, cap: int = N_T_CAP) -> float:
    """P{N_t > cap} = (1 - e^-t)^cap."""
    if t == 0:
        return 0.0
    return math.exp(cap * math.log1p(-math.exp(-t)))


def _leaf_batches(sizes: np.ndarray, limit: int):
    """Contiguous index ranges of ``sizes`` with at most ``limit`` leaves each (or one replica)."""
    start, acc = 0, 0
    for i, n in enumerate(sizes):
        if acc and acc + n > limit:
            yield start, i
            start, acc = i, 0
        acc += int(n)
    if start < len(sizes):
        yield start, len(sizes)


@dataclass(frozen=True)
class VtBatch:
    values: np.ndarray  # truncated replicas removed
    truncated: int
    leaves: int
    t: float

    @property
    def truncation_rate(self) -> float:
        total = self.values.size + self.truncated
        return self.truncated / total if total else 0.0


def _vt_block(kernel, t, n, rng, leaf_fn, cap):
    sizes = sample_n_t(t, rng, n)
    keep = sizes <= cap
    sizes = sizes[keep]
    outs = []
    for a, b in _leaf_batches(sizes, LEAF_BATCH):
        sz = sizes[a:b]
        w = grow_batch(kernel, sz, rng)
        outs.append(leaf_fn(sz, w, rng))
    trunc = int((~keep).sum())
    if not outs:
        return None, trunc, 0
    parts = list(zip(*outs)) if isinstance(outs[0], tuple) else [outs]
    return tuple(np.concatenate(p) for p in parts), trunc, int(sizes.sum())


def _run_vt(kernel, t, n_samples, seed, t_index, threads, cap, purpose, leaf_fn):
    blocks = split_blocks(n_samples, VT_BLOCK)

    def work(ib):
        i, (a, b) = ib
        return _vt_block(kernel, t, b - a, block_rng(seed, purpose, t_index, i), leaf_fn, cap)

    res = parallel_map(work, list(enumerate(blocks)), threads)
    trunc = sum(r[1] for r in res)
    leaves = sum(r[2] for r in res)
    cols = [r[0] for r in res if r[0] is not None]
    ncol = len(cols[0]) if cols else 1
    arrays = tuple(np.concatenate([c[k] for c in cols]) if cols else np.empty(0) for k in range(ncol))
    return arrays, trunc, leaves


def simulate_v_t(
    kernel: CollisionKernel,
    datum: InitialDatum,
    t: float,
    n_samples: int,
    seed: int,
    t_index: int = 0,
    threads: Optional[int] = None,
    cap: int = N_T_CAP,
) -> VtBatch:
    """n_samples independent draws of V_t, reproducible for a given seed."""

    def leaf_fn(sz, w, rng):
        x = datum.ppf(rng.random(w.size))
        return _engine.segment_dot(sz, w, np.ascontiguousarray(x, float))

    (vals,), trunc, leaves = _run_vt(kernel, t, n_samples, seed, t_index, threads, cap, "vt", leaf_fn)
    return VtBatch(vals, trunc, leaves, t)


def sample_v_t(kernel: CollisionKernel, datum: InitialDatum, t: float, rng: np.random.Generator, cap: int = N_T_CAP) -> float:
    """One draw of V_t; returns nan when N_t exceeds ``cap``."""
    n = sample_n_t(t, rng)
    if n > cap:
        return math.nan
    w = grow_weights(WeightArray.initial(), n - 1, kernel, rng).weights
    return float(np.dot(w, datum.ppf(rng.random(n))))


def steady_quantile(kernel: CollisionKernel, stable: StableParams) -> Callable:
    """Exact quantile function of the steady state, when one exists in closed form.

    Needs the mixing law to be a point mass at 1 (L^a + R^a = 1 a.s.) and
    a in {1, 2}, where the steady law is Cauchy or Gaussian.
    """
    if not kernel.conserves(stable.alpha):
        raise CouplingUnavailable("mixing law is not a point mass; steady quantile unknown")
    if stable.alpha not in (1.0, 2.0) or (stable.alpha == 1 and stable.beta != 0):
        raise CouplingUnavailable("closed-form steady quantile only for alpha = 2 or symmetric alpha = 1")
    return lambda u: stable_ppf(stable, u)


@dataclass(frozen=True)
class CoupledBatch:
    initial: np.ndarray  # sum beta_j F0^-1(U_j)
    steady: np.ndarray  # sum beta_j Finf^-1(U_j)
    truncated: int
    t: float


def coupled_pair(kernel, datum, steady_q, t, rng, cap: int = N_T_CAP) -> tuple[float, float]:
    n = sample_n_t(t, rng)
    if n > cap:
        return math.nan, math.nan
    w = grow_weights(WeightArray.initial(), n - 1, kernel, rng).weights
    u = rng.random(n)
    return float(np.dot(w, datum.ppf(u))), float(np.dot(w, steady_q(u)))


def simulate_coupled(
    kernel: CollisionKernel,
    datum: InitialDatum,
    steady_q: Callable,
    t: float,
    n_samples: int,
    seed: int,
    t_index: int = 0,
    threads: Optional[int] = None,
    cap: int = N_T_CAP,
) -> CoupledBatch:
    """Pairs driven by one weight array and one uniform per leaf; the second coordinate is exactly steady."""

    def leaf_fn(sz, w, rng):
        u = rng.random(w.size)
        x0 = np.ascontiguousarray(datum.ppf(u), float)
        xs = np.ascontiguousarray(steady_q(u), float)
        return _engine.segment_dot(sz, w, x0), _engine.segment_dot(sz, w, xs)

    (a, b), trunc, _ = _run_vt(kernel, t, n_samples, seed, t_index, threads, cap, "coupled", leaf_fn)
    return CoupledBatch(a, b, trunc, t)


def weight_moment_reference(kernel: CollisionKernel, p: float, n: int) -> float:
    """E sum_j beta_{j,n}^p = Gamma(n + S) / (Gamma(n) Gamma(S + 1))."""
    s = s_function(kernel, p)
    if not s > -1:
        raise ValueError(f"needs S(p) > -1, got {s}")
    return math.exp(gammaln(n + s) - gammaln(n) - gammaln(s + 1))


def _as_rng(rng_or_seed, purpose):
    if isinstance(rng_or_seed, np.random.Generator):
        return rng_or_seed
    return block_rng(int(rng_or_seed), purpose)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan


def weight_power_sums(kernel: CollisionKernel, p: float, sizes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=np.int64)
    out = []
    for a, b in _leaf_batches(sizes, LEAF_BATCH):
        w = grow_batch(kernel, sizes[a:b], rng)
        out.append(_engine.segment_power_sums(sizes[a:b], w, float(p)))
    return np.concatenate(out)


def weight_p_sum_stats(kernel: CollisionKernel, p: float, n: int, replicas: int, rng) -> tuple[float, float]:
    """Monte Carlo (mean, stderr) of sum_j beta_{j,n}^p."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _as_rng(rng, "weight-moment")
    x = weight_power_sums(kernel, p, np.full(replicas, n), rng)
    return _mean_se(x)


def weight_p_sum_time_stats(kernel: CollisionKernel, p: float, t: float, replicas: int, rng) -> tuple[float, float]:
    """Monte Carlo (mean, stderr) of sum_j beta_{j,N_t}^p; its expectation is e^{t S(p)}."""
    rng = _as_rng(rng, "weight-moment-time")
    sizes = sample_n_t(t, rng, replicas)
    return _mean_se(weight_power_sums(kernel, p, sizes, rng))
