"""Fixed point of the alpha-power smoothing transform and the steady state it generates.

M = lim_n sum_j beta_{j,n}^alpha solves M = L^a M1 + R^a M2 in law with E M = 1,
and the steady state is the scale mixture V = S_alpha * M^(1/alpha) of a
centered stable law (for alpha = 1: V = (S_1 + gamma0) * M).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Optional

import numpy as np

from . import _engine
from .kernels import CollisionKernel, s_function
from .metrics import ks_two_sample
from .stable import StableParams, TailCoefficients, cf_stable, sample_stable, tail_coefficients
from .streams import block_rng, parallel_map, split_blocks
from .wild import grow_batch

POOL_MAGIC = b"KFPOOL01"
DEFAULT_DEPTH = 1 << 14
MAX_DEPTH = 1 << 18
DEFAULT_POOL_SIZE = 100_000
_FEAS = 1.0 + 1e-9  # evaluate S just above an order to test strict feasibility


@dataclass(frozen=True)
class MomentTable:
    """m[i-1] = E[M^i]; math.inf where S(alpha * i) >= 0."""

    m: tuple[float, ...]
    finite: tuple[bool, ...]
    alpha: float

    def __getitem__(self, i: int) -> float:
        """1-based moment access."""
        return self.m[i - 1]


def moments_recursive(kernel: CollisionKernel, alpha: float, k: int) -> MomentTable:
    """Integer moments of the fixed point from the binomial recursion."""
    if k < 1:
        raise ValueError("k must be >= 1")
    m = [1.0]
    fin = [True]
    for i in range(2, k + 1):
        s = s_function(kernel, alpha * i)
        if not (fin[-1] and s < 0):
            m.append(math.inf)
            fin.append(False)
            continue
        acc = 0.0
        for j in range(1, i):
            acc += comb(i, j) * kernel.mixed_moment(alpha * j, alpha * (i - j)) * m[j - 1] * m[i - j - 1]
        m.append(acc / (-s))
        fin.append(True)
    return MomentTable(tuple(m), tuple(fin), alpha)


def sample_m_infinity(kernel: CollisionKernel, alpha: float, depth: int, rng: np.random.Generator) -> float:
    """sum_j beta_{j,depth}^alpha for one fresh weight array."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    sizes = np.array([depth], dtype=np.int64)
    w = grow_batch(kernel, sizes, rng)
    return float(_engine.segment_power_sums(sizes, w, float(alpha))[0])


@dataclass(frozen=True)
class MixtureLaw:
    """Sorted pool of approximate draws of M (the mixing law)."""

    pool: np.ndarray
    alpha: float
    kernel: Optional[CollisionKernel] = field(default=None, repr=False)
    depth: int = 0  # 0 for the exact point mass at 1
    exact: bool = False
    converged: Optional[bool] = None
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return int(self.pool.size)

    @property
    def mean(self) -> float:
        return float(np.mean(self.pool))

    @property
    def m2(self) -> float:
        return float(np.mean(self.pool**2))

    def moment(self, i: int) -> tuple[float, float]:
        """(mean, stderr) of M^i over the pool."""
        x = self.pool**i
        return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


def _pool_draws(kernel, alpha, depth, n, seed, threads, purpose="pool"):
    per_block = max(1, (1 << 20) // depth)
    blocks = split_blocks(n, per_block)

    def work(ib):
        i, (a, b) = ib
        rng = block_rng(seed, purpose, depth, i)
        sizes = np.full(b - a, depth, dtype=np.int64)
        w = grow_batch(kernel, sizes, rng)
        return _engine.segment_power_sums(sizes, w, float(alpha))

    return np.concatenate(parallel_map(work, list(enumerate(blocks)), threads))


def build_pool(
    kernel: CollisionKernel,
    alpha: float,
    size: int = DEFAULT_POOL_SIZE,
    depth: int = DEFAULT_DEPTH,
    seed: int = 0,
    threads: Optional[int] = None,
    adaptive: bool = True,
    max_depth: int = MAX_DEPTH,
) -> MixtureLaw:
    """Pool of M draws; exact point mass when L^alpha + R^alpha = 1 a.s.

    With ``adaptive`` the depth doubles until the pool second moment agrees with
    the recursion within 4 standard errors, or ``max_depth`` is reached.
    """
    if kernel.conserves(alpha):
        return MixtureLaw(np.ones(size), alpha, kernel, 0, True, True, {"reason": "L^a+R^a=1 a.s."})
    mt = moments_recursive(kernel, alpha, 2)
    history = []
    while True:
        pool = np.sort(_pool_draws(kernel, alpha, depth, size, seed, threads))
        x2 = pool**2
        m2, se2 = float(np.mean(x2)), float(np.std(x2, ddof=1) / math.sqrt(size))
        z = (m2 - mt[2]) / se2 if mt.finite[1] and se2 > 0 else math.nan
        history.append({"depth": depth, "m2": m2, "m2_se": se2, "z": z})
        ok = (not mt.finite[1]) or abs(z) <= 4
        if ok or not adaptive or depth * 2 > max_depth:
            break
        depth *= 2
    diag = {"m2_reference": mt[2], "history": history}
    return MixtureLaw(pool, alpha, kernel, depth, False, ok if mt.finite[1] else None, diag)


def fixed_point_residual(pool, kernel: CollisionKernel, alpha: float, rng: np.random.Generator) -> float:
    """KS distance between the pool and L^a M1 + R^a M2 built from it."""
    x = pool.pool if isinstance(pool, MixtureLaw) else np.asarray(pool, float)
    n = x.size
    m1 = x[rng.integers(0, n, n)]
    m2 = x[rng.integers(0, n, n)]
    left, right = kernel.sample(rng, n)
    with np.errstate(invalid="ignore"):
        y = np.where(left > 0, left**alpha, 0.0) * m1 + np.where(right > 0, right**alpha, 0.0) * m2
    return ks_two_sample(np.round(x, 12), np.round(y, 12))


def _pool_array(pool) -> np.ndarray:
    return pool.pool if isinstance(pool, MixtureLaw) else np.asarray(pool, float)


def sample_steady(kernel: CollisionKernel, stable: StableParams, pool, rng: np.random.Generator, size=None):
    """V = S * M^(1/alpha), or (S_1 + gamma0) * M for alpha = 1."""
    x = _pool_array(pool)
    n = 1 if size is None else size
    s = sample_stable(stable, rng, n)
    m = x[rng.integers(0, x.size, n)]
    out = s * m ** (1.0 / stable.alpha)
    return float(out[0]) if size is None else out


def steady_cf(pool, stable: StableParams, xi):
    """Pool average of the stable cf at xi * M^(1/alpha) (at xi * M for alpha = 1)."""
    xi_arr = np.atleast_1d(np.asarray(xi, float))
    if isinstance(pool, MixtureLaw) and pool.exact:
        out = np.atleast_1d(cf_stable(stable, xi_arr))
    else:
        scale = _pool_array(pool) ** (1.0 / stable.alpha)
        out = np.empty(xi_arr.shape, complex)
        for k, v in enumerate(xi_arr.flat):
            out.flat[k] = np.mean(cf_stable(stable, v * scale))
    return complex(out[0]) if np.ndim(xi) == 0 else out


def feasible_terms(kernel: CollisionKernel, alpha: float, k: int) -> int:
    """Number of leading steady tail terms (up to k) whose moment conditions hold."""
    n = 0
    for i in range(k):
        order = 2 * i + 1 if alpha == 1 else alpha * (i + 1)
        if s_function(kernel, order * _FEAS) < 0:
            n += 1
        else:
            break
    return n


def _remainder_order(kernel, alpha, n_terms, delta_max):
    """Largest remainder exponent base + delta (delta <= delta_max) allowed by S < 0."""
    base = 2 * n_terms - 1 if alpha == 1 else alpha * n_terms
    step = 1.0 if alpha == 1 else alpha
    if s_function(kernel, base + step * delta_max) < 0:
        return base + step * delta_max
    lo, hi = 0.0, delta_max
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if s_function(kernel, base + step * mid) < 0:
            lo = mid
        else:
            hi = mid
    return base + step * lo


def steady_tail_expansion(kernel: CollisionKernel, stable: StableParams, k: int) -> TailCoefficients:
    """Tail series of the steady state: stable coefficients times mixing moments."""
    a = stable.alpha
    n = feasible_terms(kernel, a, k)
    if n == 0:
        raise ValueError("no feasible tail term: S is not negative just above alpha")
    if a == 1:
        mt = moments_recursive(kernel, 1.0, 2 * n - 1)
        tc = tail_coefficients(stable, n)
        c = tuple(tc.c_minus[i] * mt[2 * i + 1] for i in range(n))
        return TailCoefficients(
            n, c, c, tc.orders, tc.lambda_tilde, 0.0, 1.0,
            truncated=n < k, requested_k=k, remainder_order=_remainder_order(kernel, 1.0, n, 2.0),
        )
    mt = moments_recursive(kernel, a, n)
    tc = tail_coefficients(stable, n)
    cp = tuple(tc.c_plus[i] * mt[i + 1] for i in range(n))
    cm = tuple(tc.c_minus[i] * mt[i + 1] for i in range(n))
    return TailCoefficients(
        n, cp, cm, tc.orders, tc.lambda_tilde, tc.beta_tilde, a, tc.thin_plus, tc.thin_minus,
        truncated=n < k, requested_k=k, remainder_order=_remainder_order(kernel, a, n, 1.0),
    )


def save_pool(path, pool) -> None:
    x = np.ascontiguousarray(_pool_array(pool), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(POOL_MAGIC)
        fh.write(struct.pack("<Q", x.size))
        fh.write(x.tobytes())


def load_pool(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:8] != POOL_MAGIC:
        raise ValueError(f"{path}: bad pool header")
    (n,) = struct.unpack("<Q", data[8:16])
    if len(data) != 16 + 8 * n:
        raise ValueError(f"{path}: expected {n} values, file size {len(data)}")
    return np.frombuffer(data, dtype="<f8", offset=16).astype(float)
