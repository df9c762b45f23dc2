"""Collision kernels (L, R) and the spectral machinery built on S(q) = E[L^q + R^q] - 1."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import betaln, digamma, gammaln

TWO_PI = 2.0 * math.pi
_QUAD_EPSABS = 1e-10
_ANGLE_PROBE = 1 << 16  # midpoint grid used for indicator probabilities of AngleMap kernels

# tolerance for the phi(p) == phi(i) style dichotomies
EQUALITY_TOL = 1e-9


class NoRootInRange(ValueError):
    """S has no sign change on (0, 2]."""


class RateUndefined(ValueError):
    """The requested decay rate does not exist (S(p) >= 0)."""


def _pow0(x, q):
    """x**q with the convention 0**0 = 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > 0, np.power(np.where(x > 0, x, 1.0), q), 0.0)


def _xlogx(x, q):
    """x**q * log(x), with 0**q * log 0 := 0."""
    x = np.asarray(x, dtype=float)
    safe = np.where(x > 0, x, 1.0)
    return np.where(x > 0, np.power(safe, q) * np.log(safe), 0.0)


class CollisionKernel:
    """Law of the nonnegative pair (L, R).

    Subclasses provide sampling and exact (or quadrature) moment evaluation.
    Instances are immutable.
    """

    name = "kernel"

    def sample(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def power_moment(self, q: float) -> float:
        """E[L^q + R^q] with 0^0 = 0."""
        raise NotImplementedError

    def log_moment(self, q: float) -> float:
        """E[L^q log L + R^q log R] with 0^q log 0 = 0."""
        raise NotImplementedError

    def mixed_moment(self, a: float, b: float) -> float:
        """E[L^a R^b] (ordinary powers, so L^0 = 1)."""
        raise NotImplementedError

    def prob_positive(self) -> tuple[float, float]:
        """(P{L>0}, P{R>0})."""
        raise NotImplementedError

    def prob_corner(self) -> float:
        """P{(L,R) in {0,1}^2}."""
        raise NotImplementedError

    def conserves(self, alpha: float, tol: float = 1e-12) -> bool:
        """True if L^alpha + R^alpha = 1 almost surely."""
        raise NotImplementedError

    def atoms(self) -> Optional[list[tuple[float, float, float]]]:
        """Finite support as (l, r, weight) triples, or None for continuous kernels."""
        return None

    def to_spec(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(CollisionKernel):
    """L = U, R = 1 - U with U uniform on (0, 1)."""

    name = "uniform"

    def sample(self, rng, size):
        u = rng.random(size)
        return u, 1.0 - u

    def power_moment(self, q):
        if q == 0:
            return 2.0
        return 2.0 / (1.0 + q)

    def log_moment(self, q):
        return -2.0 / (1.0 + q) ** 2

    def mixed_moment(self, a, b):
        return math.exp(betaln(a + 1.0, b + 1.0))

    def prob_positive(self):
        return 1.0, 1.0

    def prob_corner(self):
        return 0.0

    def conserves(self, alpha, tol=1e-12):
        return abs(alpha - 1.0) <= tol

    def to_spec(self):
        return "uniform"


@dataclass(frozen=True)
class InelasticKac(CollisionKernel):
    """L = |cos t|^(1+d), R = |sin t|^(1+d), t uniform on (0, 2 pi)."""

    d: float = 0.0
    name = "inelastic-kac"

    def __post_init__(self):
        if not self.d >= 0:
            raise ValueError(f"inelasticity d must be >= 0, got {self.d}")

    @property
    def _c(self) -> float:
        return (1.0 + self.d) / 2.0

    def sample(self, rng, size):
        theta = TWO_PI * rng.random(size)
        e = 1.0 + self.d
        return np.abs(np.cos(theta)) ** e, np.abs(np.sin(theta)) ** e

    def power_moment(self, q):
        if q == 0:
            return 2.0
        u = self._c * q
        return 2.0 / math.sqrt(math.pi) * math.exp(gammaln(u + 0.5) - gammaln(u + 1.0))

    def log_moment(self, q):
        u = self._c * q
        return self.power_moment(q) * self._c * (digamma(u + 0.5) - digamma(u + 1.0))

    def mixed_moment(self, a, b):
        A = (1.0 + self.d) * a
        B = (1.0 + self.d) * b
        return math.exp(gammaln((A + 1) / 2) + gammaln((B + 1) / 2) - gammaln((A + B) / 2 + 1)) / math.pi

    def prob_positive(self):
        return 1.0, 1.0

    def prob_corner(self):
        return 0.0

    def conserves(self, alpha, tol=1e-12):
        return abs(alpha - 2.0 / (1.0 + self.d)) <= tol

    def to_spec(self):
        return f"inelastic-kac:d={self.d!r}"


@dataclass(frozen=True)
class Deterministic(CollisionKernel):
    l: float
    r: float
    name = "deterministic"

    def __post_init__(self):
        if self.l < 0 or self.r < 0:
            raise ValueError("deterministic kernel needs l, r >= 0")

    def sample(self, rng, size):
        return np.full(size, float(self.l)), np.full(size, float(self.r))

    def power_moment(self, q):
        return float(_pow0(self.l, q) + _pow0(self.r, q))

    def log_moment(self, q):
        return float(_xlogx(self.l, q) + _xlogx(self.r, q))

    def mixed_moment(self, a, b):
        return float(self.l) ** a * float(self.r) ** b

    def prob_positive(self):
        return float(self.l > 0), float(self.r > 0)

    def prob_corner(self):
        return float(self.l in (0.0, 1.0) and self.r in (0.0, 1.0))

    def conserves(self, alpha, tol=1e-12):
        return abs(self.power_moment(alpha) - 1.0) <= tol

    def atoms(self):
        return [(float(self.l), float(self.r), 1.0)]

    def to_spec(self):
        return f"deterministic:l={self.l!r},r={self.r!r}"


@dataclass(frozen=True)
class Discrete(CollisionKernel):
    """Finitely many atoms (l, r) with probabilities w."""

    atom_list: tuple[tuple[float, float, float], ...]
    name = "discrete"

    def __post_init__(self):
        atoms = tuple((float(l), float(r), float(w)) for l, r, w in self.atom_list)
        if not atoms:
            raise ValueError("discrete kernel needs at least one atom")
        if any(l < 0 or r < 0 for l, r, _ in atoms):
            raise ValueError("atoms must be nonnegative")
        if any(w < 0 for _, _, w in atoms):
            raise ValueError("weights must be nonnegative")
        if abs(sum(w for _, _, w in atoms) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")
        object.__setattr__(self, "atom_list", atoms)

    @property
    def _arrays(self):
        a = np.array(self.atom_list)
        return a[:, 0], a[:, 1], a[:, 2]

    def sample(self, rng, size):
        l, r, w = self._arrays
        cum = np.cumsum(w)
        idx = np.minimum(np.searchsorted(cum, rng.random(size) * cum[-1], side="right"), len(w) - 1)
        return l[idx], r[idx]

    def power_moment(self, q):
        l, r, w = self._arrays
        return float(np.sum(w * (_pow0(l, q) + _pow0(r, q))))

    def log_moment(self, q):
        l, r, w = self._arrays
        return float(np.sum(w * (_xlogx(l, q) + _xlogx(r, q))))

    def mixed_moment(self, a, b):
        l, r, w = self._arrays
        return float(np.sum(w * l**a * r**b))

    def prob_positive(self):
        l, r, w = self._arrays
        return float(np.sum(w[l > 0])), float(np.sum(w[r > 0]))

    def prob_corner(self):
        l, r, w = self._arrays
        mask = np.isin(l, (0.0, 1.0)) & np.isin(r, (0.0, 1.0))
        return float(np.sum(w[mask]))

    def conserves(self, alpha, tol=1e-12):
        l, r, w = self._arrays
        dev = np.abs(_pow0(l, alpha) + _pow0(r, alpha) - 1.0)
        return bool(np.all(dev[w > 0] <= tol))

    def atoms(self):
        return list(self.atom_list)

    def to_spec(self):
        return "discrete:" + ";".join(f"{l!r},{r!r},{w!r}" for l, r, w in self.atom_list)


@dataclass(frozen=True)
class AngleMap(CollisionKernel):
    """L = l(theta), R = r(theta) for theta uniform on (0, 2 pi).

    ``l`` and ``r`` must be vectorised and nonnegative. Moments are computed by
    adaptive quadrature split at the quarter periods.
    """

    l: Callable[[np.ndarray], np.ndarray]
    r: Callable[[np.ndarray], np.ndarray]
    label: str = "angle-map"
    name = "angle-map"

    def sample(self, rng, size):
        theta = TWO_PI * rng.random(size)
        return np.asarray(self.l(theta), float), np.asarray(self.r(theta), float)

    def _average(self, f) -> float:
        pts = [0.0, math.pi / 2, math.pi, 3 * math.pi / 2, TWO_PI]
        total = 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            for a, b in zip(pts[:-1], pts[1:]):
                try:
                    val, _ = integrate.quad(
                        lambda th: float(f(np.array([th]))[0]), a, b,
                        epsabs=_QUAD_EPSABS / 4, epsrel=1e-12, limit=400,
                    )
                except (integrate.IntegrationWarning, ZeroDivisionError, OverflowError):
                    return math.inf
                if not math.isfinite(val):
                    return math.inf
                total += val
        return total / TWO_PI

    def power_moment(self, q):
        return self._average(lambda th: _pow0(self.l(th), q) + _pow0(self.r(th), q))

    def log_moment(self, q):
        return self._average(lambda th: _xlogx(self.l(th), q) + _xlogx(self.r(th), q))

    def mixed_moment(self, a, b):
        return self._average(lambda th: np.asarray(self.l(th), float) ** a * np.asarray(self.r(th), float) ** b)

    def _probe(self):
        th = (np.arange(_ANGLE_PROBE) + 0.5) * (TWO_PI / _ANGLE_PROBE)
        return np.asarray(self.l(th), float), np.asarray(self.r(th), float)

    def prob_positive(self):
        l, r = self._probe()
        return float(np.mean(l > 0)), float(np.mean(r > 0))

    def prob_corner(self):
        l, r = self._probe()
        return float(np.mean(np.isin(l, (0.0, 1.0)) & np.isin(r, (0.0, 1.0))))

    def conserves(self, alpha, tol=1e-12):
        l, r = self._probe()
        return bool(np.all(np.abs(_pow0(l, alpha) + _pow0(r, alpha) - 1.0) <= tol))

    def to_spec(self):
        return self.label


def inelastic_kac_angle_map(d: float) -> AngleMap:
    """The inelastic Kac kernel written as a generic AngleMap (quadrature path)."""
    e = 1.0 + d
    return AngleMap(lambda th: np.abs(np.cos(th)) ** e, lambda th: np.abs(np.sin(th)) ** e, label=f"angle-kac:d={d}")


# ---------------------------------------------------------------- parsing

def _kv(body: str) -> dict[str, float]:
    out = {}
    for part in body.split(","):
        key, _, val = part.partition("=")
        if not _:
            raise ValueError(f"expected key=value, got {part!r}")
        out[key.strip()] = float(val.strip())
    return out


def parse_kernel(spec: str) -> CollisionKernel:
    """Parse ``uniform``, ``inelastic-kac:d=..``, ``deterministic:l=..,r=..`` or
    ``discrete:l,r,w;l,r,w``. Dot-decimal only."""
    spec = spec.strip()
    head, _, body = spec.partition(":")
    head = head.lower()
    if head == "uniform":
        if body:
            raise ValueError("uniform kernel takes no parameters")
        return Uniform()
    if head == "inelastic-kac":
        return InelasticKac(d=_kv(body)["d"])
    if head == "deterministic":
        kv = _kv(body)
        return Deterministic(kv["l"], kv["r"])
    if head == "discrete":
        atoms = []
        for chunk in body.split(";"):
            vals = [float(v) for v in chunk.split(",")]
            if len(vals) != 3:
                raise ValueError(f"discrete atom needs l,r,w: {chunk!r}")
            atoms.append(tuple(vals))
        return Discrete(tuple(atoms))
    raise ValueError(f"unknown kernel spec {spec!r}")


# ---------------------------------------------------------------- spectral functions

def s_function(kernel: CollisionKernel, q: float) -> float:
    """S(q) = E[L^q + R^q] - 1 (0^0 = 0); may return +inf."""
    if q < 0:
        raise ValueError(f"q must be >= 0, got {q}")
    if q == 0:
        pl, pr = kernel.prob_positive()
        return pl + pr - 1.0
    val = kernel.power_moment(q)
    return math.inf if not math.isfinite(val) else val - 1.0


def phi(kernel: CollisionKernel, q: float) -> float:
    """Spectral function S(q)/q."""
    if q <= 0:
        raise ValueError("phi needs q > 0")
    return s_function(kernel, q) / q


def s_derivative(kernel: CollisionKernel, q: float) -> float:
    val = kernel.log_moment(q)
    if not math.isfinite(val):
        raise ValueError(f"E[L^q log L + R^q log R] is not finite at q={q}")
    return val


def find_alpha(kernel: CollisionKernel, eps: float = 1e-6, n_grid: int = 64) -> float:
    """Root of S in (0, 2]: sign scan followed by bisection."""
    grid = np.linspace(eps, 2.0, n_grid)
    vals = [s_function(kernel, q) for q in grid]
    if vals[0] <= 0:
        raise NoRootInRange("S(q) <= 0 near q = 0, positivity part of (H0) fails")
    for i in range(n_grid - 1):
        if vals[i] > 0 and vals[i + 1] <= 0:
            lo, hi = grid[i], grid[i + 1]
            if abs(vals[i + 1]) <= 1e-12:
                return float(hi)
            break
    else:
        if abs(vals[-1]) <= 1e-12:
            return 2.0
        raise NoRootInRange("S(q) > 0 on all of (0, 2]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s = s_function(kernel, mid)
        if s > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    root = 0.5 * (lo + hi)
    if abs(s_function(kernel, root)) > 1e-9:
        root = hi
    return float(root)


def _finite_domain_end(kernel, start: float, cap: float = 1024.0) -> float:
    """Largest q (up to cap) with S(q) finite, located by doubling then bisection."""
    q = start
    while q < cap:
        nxt = min(2 * q, cap)
        if not math.isfinite(s_function(kernel, nxt)):
            lo, hi = q, nxt
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if math.isfinite(s_function(kernel, mid)):
                    lo = mid
                else:
                    hi = mid
            return lo
        q = nxt
    return cap


def _golden_min(f, a: float, b: float, tol: float = 1e-6) -> float:
    invphi = (math.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class SpectralProfile:
    alpha: float
    p0: Optional[float]
    p_bar: float  # math.inf when phi stays negative up to the search cap
    kernel: CollisionKernel = field(repr=False)

    def s(self, q):
        return s_function(self.kernel, q)

    def phi(self, q):
        return phi(self.kernel, q)

    def s_prime(self, q):
        return s_derivative(self.kernel, q)


def find_p_bar(kernel: CollisionKernel, alpha: Optional[float] = None, cap: float = 1024.0) -> float:
    """sup{q > alpha : phi(q) < 0}; math.inf if phi < 0 up to ``cap``."""
    alpha = find_alpha(kernel) if alpha is None else alpha
    q_max = _finite_domain_end(kernel, max(2 * alpha, 1.0), cap)
    grid = np.geomspace(alpha * (1 + 1e-6), q_max, 512)
    vals = np.array([s_function(kernel, q) for q in grid])
    if vals[0] >= 0:
        return float(alpha)
    pos = np.nonzero(vals >= 0)[0]
    if len(pos) == 0:
        return math.inf if q_max >= cap else float(q_max)
    lo, hi = grid[pos[0] - 1], grid[pos[0]]
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if s_function(kernel, mid) < 0:
            lo = mid
        else:
            hi = mid
    return float(lo)


def find_p0(kernel: CollisionKernel, alpha: Optional[float] = None, cap: float = 1024.0) -> Optional[float]:
    """Interior minimiser of phi on (alpha, p_bar), or None when phi is strictly decreasing there."""
    alpha = find_alpha(kernel) if alpha is None else alpha
    p_bar = find_p_bar(kernel, alpha, cap)
    hi = min(p_bar, _finite_domain_end(kernel, max(2 * alpha, 1.0), cap))
    lo = alpha + 1e-4
    if hi <= lo:
        return None
    x = _golden_min(lambda q: phi(kernel, q), lo, hi, tol=1e-6)
    if hi - x < 1e-5:
        return None
    return float(x)


def spectral_profile(kernel: CollisionKernel) -> SpectralProfile:
    alpha = find_alpha(kernel)
    return SpectralProfile(alpha=alpha, p0=find_p0(kernel, alpha), p_bar=find_p_bar(kernel, alpha), kernel=kernel)


# ---------------------------------------------------------------- decay rates

REGIMES = ("alpha_lt_1", "alpha_in_[1,2)", "alpha_eq_2", "wasserstein_low", "chi")
_REGIME_ALIASES = {"alpha_in_1_2": "alpha_in_[1,2)", "alpha_in_[1,2]": "alpha_in_[1,2)"}


@dataclass(frozen=True)
class DecayRate:
    """Exponent r of a bound C e^{-rt} (or C t e^{-rt} when ``log_correction``)."""

    rate: float
    log_correction: bool
    regime: str
    p: float
    alpha: float

    @property
    def form(self) -> str:
        return "C*t*exp(-r*t)" if self.log_correction else "C*exp(-r*t)"


def fractional_part(p: float) -> float:
    """Fractional part in (0, 1], so that p = k + eps with k integer."""
    eps = p - math.floor(p)
    return 1.0 if eps == 0 else eps


def rate_constant(kernel: CollisionKernel, p: float, regime: str, alpha: Optional[float] = None) -> DecayRate:
    regime = _REGIME_ALIASES.get(regime, regime)
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    alpha = find_alpha(kernel) if alpha is None else alpha
    s_p = s_function(kernel, p)
    if not s_p < -EQUALITY_TOL:
        raise RateUndefined(f"S({p}) = {s_p:.3g} is not negative")
    ph = s_p / p

    if regime == "alpha_lt_1":
        if not (alpha < 1 and p > 1):
            raise ValueError("alpha_lt_1 needs alpha < 1 < p")
        ref = phi(kernel, 1.0)
        return DecayRate(abs(max(ref, ph)), abs(ph - ref) <= EQUALITY_TOL, regime, p, alpha)
    if regime == "alpha_in_[1,2)":
        if not (1 - EQUALITY_TOL <= alpha < 2 - EQUALITY_TOL and p > 2):
            raise ValueError("alpha_in_[1,2) needs 1 <= alpha < 2 and p > 2")
        ref = phi(kernel, 2.0)
        return DecayRate(abs(max(ref, ph)), abs(ph - ref) <= EQUALITY_TOL, regime, p, alpha)
    if regime == "alpha_eq_2":
        if not (abs(alpha - 2) <= EQUALITY_TOL and p > 2):
            raise ValueError("alpha_eq_2 needs alpha = 2 and p > 2")
        eps = fractional_part(p)
        ph_low = phi(kernel, 2.0 + eps)
        rate = -max(ph, ph_low / (3 * p))
        return DecayRate(rate, abs(s_p - ph_low / 3) <= EQUALITY_TOL, regime, p, alpha)
    if regime == "wasserstein_low":
        a1 = abs(alpha - 1) <= EQUALITY_TOL
        ok = (1 < alpha < p <= 2) or (alpha < p <= 1) or (a1 and 1 < p <= 2)
        if not ok:
            raise ValueError("wasserstein_low needs 1 < alpha < p <= 2, alpha < p <= 1, or alpha = 1 < p <= 2")
        return DecayRate(abs(ph) * min(p, 1.0), False, regime, p, alpha)
    # chi
    if not p > alpha:
        raise ValueError("chi regime needs p > alpha")
    return DecayRate(abs(s_p), False, regime, p, alpha)


# ---------------------------------------------------------------- (H0)

@dataclass(frozen=True)
class ValidationReport:
    alpha: Optional[float]
    positivity_mass: bool  # P{L>0} + P{R>0} > 1
    alpha_exists: bool
    moment_condition: bool  # S(p) < 0
    not_corner: bool  # P{(L,R) in {0,1}^2} < 1
    s_p: float
    messages: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return self.positivity_mass and self.alpha_exists and self.moment_condition and self.not_corner


def validate_h0(kernel: CollisionKernel, p: float) -> ValidationReport:
    msgs = []
    pl, pr = kernel.prob_positive()
    positivity = pl + pr > 1
    if not positivity:
        msgs.append("P{L>0}+P{R>0}>1 fails")
    try:
        alpha = find_alpha(kernel)
        alpha_ok = True
    except NoRootInRange as exc:
        alpha, alpha_ok = None, False
        msgs.append(f"no alpha in (0,2]: {exc}")
    s_p = s_function(kernel, p)
    moment_ok = s_p < 0
    if not moment_ok:
        msgs.append(f"S(p)<0 fails (S({p})={s_p:.6g})")
    corner_ok = kernel.prob_corner() < 1
    if not corner_ok:
        msgs.append("P{(L,R) in {0,1}^2}<1 fails")
    return ValidationReport(alpha, positivity, alpha_ok, moment_ok, corner_ok, s_p, tuple(msgs))
