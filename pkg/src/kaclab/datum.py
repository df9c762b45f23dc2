"""Initial data: one-dimensional laws sampled by inverse CDF from a single uniform.

Every datum also carries its tail metadata: c0_plus = lim x^a P{X > x},
c0_minus = lim |x|^a P{X < x} (for the tail index ``tail_alpha``) and
gamma0, the principal-value mean lim_R int_{(-R,R)} x dF.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize
from scipy.special import ndtr, ndtri


class InitialDatum:
    c0_plus: float = 0.0
    c0_minus: float = 0.0
    gamma0: float = 0.0
    tail_alpha: Optional[float] = None  # None: all moments finite

    def ppf(self, u):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def cf(self, xi):
        """Characteristic function E[exp(i xi X)], vectorised."""
        raise NotImplementedError

    def cfm1(self, xi):
        """cf(xi) - 1; overridden where it can be computed without cancellation."""
        return np.asarray(self.cf(xi)) - 1.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.ppf(rng.random(size))

    def abs_moment(self, p: float) -> float:
        """E|X|^p (math.inf if it diverges)."""
        if self.tail_alpha is not None and p >= self.tail_alpha:
            return math.inf
        val, _ = integrate.quad(lambda u: abs(float(self.ppf(u))) ** p, 0, 1, limit=400)
        return val

    def to_spec(self) -> str:
        raise NotImplementedError


def _num_cf_from_ppf(ppf, xi):
    xi = np.atleast_1d(np.asarray(xi, float))
    out = np.empty(xi.shape, complex)
    for k, x in enumerate(xi.flat):
        re, _ = integrate.quad(lambda u: math.cos(x * float(ppf(u))), 0, 1, limit=2000)
        im, _ = integrate.quad(lambda u: math.sin(x * float(ppf(u))), 0, 1, limit=2000)
        out.flat[k] = re + 1j * im
    return out


def expim1(theta):
    """exp(i theta) - 1 without cancellation."""
    theta = np.asarray(theta, float)
    return 2j * np.sin(theta / 2) * np.exp(0.5j * theta)


def sincm1(x):
    """sin(x)/x - 1 without cancellation near 0."""
    x = np.asarray(x, float)
    x2 = x * x
    small = -x2 / 6 * (1 - x2 / 20 * (1 - x2 / 42 * (1 - x2 / 72)))
    with np.errstate(invalid="ignore", divide="ignore"):
        big = np.sin(x) / np.where(x == 0, 1.0, x) - 1.0
    return np.where(np.abs(x) < 0.1, small, big)


def _scalar(out, xi):
    return complex(out.flat[0]) if np.ndim(xi) == 0 else out


@dataclass(frozen=True)
class PointMass(InitialDatum):
    a: float = 0.0

    @property
    def gamma0(self):
        return self.a

    def ppf(self, u):
        return np.full(np.shape(u), float(self.a)) if np.ndim(u) else float(self.a)

    def cdf(self, x):
        return np.where(np.asarray(x) >= self.a, 1.0, 0.0)

    def cf(self, xi):
        return np.exp(1j * self.a * np.asarray(xi, float))

    def cfm1(self, xi):
        return expim1(self.a * np.asarray(xi, float))

    def to_spec(self):
        return f"point:a={self.a!r}"


@dataclass(frozen=True)
class UniformInterval(InitialDatum):
    a: float = -1.0
    b: float = 1.0

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("need b > a")

    @property
    def gamma0(self):
        return 0.5 * (self.a + self.b)

    @property
    def variance(self):
        return (self.b - self.a) ** 2 / 12.0

    def ppf(self, u):
        return self.a + (self.b - self.a) * np.asarray(u, float)

    def cdf(self, x):
        return np.clip((np.asarray(x, float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def cf(self, xi):
        xi = np.asarray(xi, float)
        h = 0.5 * (self.b - self.a)
        return np.exp(1j * self.gamma0 * xi) * np.sinc(h * xi / math.pi)

    def cfm1(self, xi):
        xi = np.asarray(xi, float)
        h = 0.5 * (self.b - self.a)
        shift = np.exp(1j * self.gamma0 * xi)
        return shift * sincm1(h * xi) + expim1(self.gamma0 * xi)

    def abs_moment(self, p):
        if self.a >= 0 or self.b <= 0:
            lo, hi = sorted((abs(self.a), abs(self.b)))
            return (hi ** (p + 1) - lo ** (p + 1)) / ((p + 1) * (self.b - self.a))
        return (abs(self.a) ** (p + 1) + self.b ** (p + 1)) / ((p + 1) * (self.b - self.a))

    def to_spec(self):
        return f"uniform:a={self.a!r},b={self.b!r}"


@dataclass(frozen=True)
class Gaussian(InitialDatum):
    mean: float = 0.0
    var: float = 1.0

    def __post_init__(self):
        if not self.var > 0:
            raise ValueError("variance must be positive")

    @property
    def gamma0(self):
        return self.mean

    @property
    def variance(self):
        return self.var

    def ppf(self, u):
        return self.mean + math.sqrt(self.var) * ndtri(u)

    def cdf(self, x):
        return ndtr((np.asarray(x, float) - self.mean) / math.sqrt(self.var))

    def cf(self, xi):
        xi = np.asarray(xi, float)
        return np.exp(1j * self.mean * xi - 0.5 * self.var * xi * xi)

    def cfm1(self, xi):
        xi = np.asarray(xi, float)
        g = np.expm1(-0.5 * self.var * xi * xi)
        return np.exp(1j * self.mean * xi) * g + expim1(self.mean * xi)

    def to_spec(self):
        return f"gaussian:mean={self.mean!r},var={self.var!r}"


@dataclass(frozen=True)
class Cauchy(InitialDatum):
    scale: float = 1.0
    pos: float = 0.0
    tail_alpha = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @property
    def c0_plus(self):
        return self.scale / math.pi

    @property
    def c0_minus(self):
        return self.scale / math.pi

    @property
    def gamma0(self):
        return self.pos

    def ppf(self, u):
        return self.pos + self.scale * np.tan(math.pi * (np.asarray(u, float) - 0.5))

    def cdf(self, x):
        return 0.5 + np.arctan((np.asarray(x, float) - self.pos) / self.scale) / math.pi

    def cf(self, xi):
        xi = np.asarray(xi, float)
        return np.exp(1j * self.pos * xi - self.scale * np.abs(xi))

    def cfm1(self, xi):
        xi = np.asarray(xi, float)
        return np.exp(1j * self.pos * xi) * np.expm1(-self.scale * np.abs(xi)) + expim1(self.pos * xi)

    def to_spec(self):
        return f"cauchy:scale={self.scale!r},pos={self.pos!r}"


@dataclass(frozen=True)
class ParetoSymmetric(InitialDatum):
    """Symmetric law with P{|X| > x} = 2 c0 x^-alpha beyond x_c and a flat core.

    The core density equals the tail density at x_c, which fixes
    x_c = (2 c0 (1 + alpha))^(1/alpha).
    """

    alpha: float = 1.5
    c0: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0 or not self.c0 > 0:
            raise ValueError("alpha and c0 must be positive")

    @property
    def tail_alpha(self):
        return self.alpha

    @property
    def c0_plus(self):
        return self.c0

    @property
    def c0_minus(self):
        return self.c0

    @property
    def x_c(self) -> float:
        return (2 * self.c0 * (1 + self.alpha)) ** (1 / self.alpha)

    @property
    def _tau(self) -> float:
        # mass of each tail
        return 1.0 / (2 * (1 + self.alpha))

    @property
    def _h(self) -> float:
        return self.alpha * self.c0 * self.x_c ** (-self.alpha - 1)

    def ppf(self, u):
        u = np.asarray(u, float)
        tau, xc = self._tau, self.x_c
        with np.errstate(divide="ignore"):
            lo = -((self.c0 / np.maximum(u, 1e-300)) ** (1 / self.alpha))
            hi = (self.c0 / np.maximum(1 - u, 1e-300)) ** (1 / self.alpha)
        core = -xc + (u - tau) / self._h
        return np.where(u < tau, lo, np.where(u > 1 - tau, hi, core))

    def cdf(self, x):
        x = np.asarray(x, float)
        xc = self.x_c
        ax = np.maximum(np.abs(x), xc)
        tail = self.c0 * ax ** (-self.alpha)
        core = self._tau + (x + xc) * self._h
        return np.where(x < -xc, tail, np.where(x > xc, 1 - tail, core))

    def cf(self, xi):
        xi_arr = np.atleast_1d(np.asarray(xi, float))
        out = np.empty(xi_arr.shape, complex)
        xc, a, c0 = self.x_c, self.alpha, self.c0
        for k, x in enumerate(xi_arr.flat):
            if x == 0:
                out.flat[k] = 1.0
                continue
            w = abs(x)
            core = 2 * self._h * math.sin(w * xc) / w
            tail, _ = integrate.quad(lambda y: a * c0 * y ** (-a - 1), xc, np.inf, weight="cos", wvar=w)
            out.flat[k] = core + 2 * tail
        return _scalar(out, xi)

    def to_spec(self):
        return f"pareto-sym:alpha={self.alpha!r},c0={self.c0!r}"


def _default_g(u):
    return 2.0 * np.asarray(u, float) - 1.0


@dataclass(frozen=True)
class PerturbedQuantile(InitialDatum):
    """Quantile function base.ppf(u) + eps * g(u) with g bounded, odd about 1/2 and increasing.

    The perturbation shifts mass by at most eps * sup|g|, so the tails (and
    hence the tail metadata) of ``base`` are kept.
    """

    base: InitialDatum = field(default_factory=lambda: Cauchy(1.0, 0.0))
    eps: float = 0.5
    g: Callable = _default_g
    g_sup: float = 1.0

    @property
    def c0_plus(self):
        return self.base.c0_plus

    @property
    def c0_minus(self):
        return self.base.c0_minus

    @property
    def gamma0(self):
        return self.base.gamma0

    @property
    def tail_alpha(self):
        return self.base.tail_alpha

    def ppf(self, u):
        return self.base.ppf(u) + self.eps * self.g(u)

    def cdf(self, x):
        x_arr = np.atleast_1d(np.asarray(x, float))
        out = np.empty(x_arr.shape)
        for k, v in enumerate(x_arr.flat):
            f = lambda u: float(self.ppf(u)) - v
            lo, hi = 1e-300, 1 - 1e-16
            if f(lo) >= 0:
                out.flat[k] = 0.0
            elif f(hi) <= 0:
                out.flat[k] = 1.0
            else:
                out.flat[k] = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=1e-14)
        return out if np.ndim(x) else float(out[0])

    def cf(self, xi):
        return _scalar(_num_cf_from_ppf(self.ppf, xi), xi)

    def to_spec(self):
        return f"perturbed:eps={self.eps!r};base={self.base.to_spec()}"


@dataclass(frozen=True)
class QuantileTable(InitialDatum):
    """Piecewise-linear quantile function through (probs[i], values[i])."""

    probs: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.probs, float)
        v = np.asarray(self.values, float)
        if p.shape != v.shape or p.size < 2:
            raise ValueError("probs and values need equal length >= 2")
        if p[0] != 0 or p[-1] != 1 or np.any(np.diff(p) <= 0):
            raise ValueError("probs must increase strictly from 0 to 1")
        if np.any(np.diff(v) < 0):
            raise ValueError("values must be nondecreasing")
        object.__setattr__(self, "probs", tuple(float(x) for x in p))
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    @property
    def gamma0(self):
        p, v = np.asarray(self.probs), np.asarray(self.values)
        return float(np.sum(np.diff(p) * 0.5 * (v[1:] + v[:-1])))

    def ppf(self, u):
        return np.interp(u, self.probs, self.values)

    def cdf(self, x):
        v = np.asarray(self.values)
        p = np.asarray(self.probs)
        x = np.asarray(x, float)
        # right-continuous inverse of a piecewise-linear quantile
        idx = np.searchsorted(v, x, side="right")
        out = np.where(idx >= len(v), 1.0, 0.0)
        inner = (idx > 0) & (idx < len(v))
        i = np.clip(idx, 1, len(v) - 1)
        span = v[i] - v[i - 1]
        frac = np.where(span > 0, (x - v[i - 1]) / np.where(span > 0, span, 1.0), 1.0)
        return np.where(inner, p[i - 1] + frac * (p[i] - p[i - 1]), out)

    def cf(self, xi):
        return _scalar(_num_cf_from_ppf(self.ppf, xi), xi)

    def to_spec(self):
        return "table:" + ";".join(f"{p!r},{v!r}" for p, v in zip(self.probs, self.values))


def _kv(body: str) -> dict[str, str]:
    out = {}
    for part in body.split(","):
        k, sep, v = part.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {part!r}")
        out[k.strip()] = v.strip()
    return out


def parse_datum(spec: str) -> InitialDatum:
    """Parse datum spec strings such as ``cauchy:scale=3.1416,pos=0``.

    Forms: ``point:a=``, ``uniform:a=,b=``, ``gaussian:mean=,var=``,
    ``cauchy:scale=,pos=``, ``pareto-sym:alpha=,c0=``,
    ``perturbed:eps=<f>;base=<datum spec>``, ``table:<p>,<v>;<p>,<v>;...``
    and ``table-file:<csv path with columns u,value>``.
    """
    spec = spec.strip()
    head, _, body = spec.partition(":")
    head = head.lower()
    if head == "perturbed":
        first, _, rest = body.partition(";")
        eps = float(_kv(first)["eps"])
        if not rest.startswith("base="):
            raise ValueError("perturbed datum needs ';base=<spec>'")
        return PerturbedQuantile(parse_datum(rest[len("base="):]), eps)
    if head == "table":
        pairs = [tuple(float(x) for x in c.split(",")) for c in body.split(";")]
        return QuantileTable(tuple(p for p, _ in pairs), tuple(v for _, v in pairs))
    if head == "table-file":
        arr = np.loadtxt(body, delimiter=",", skiprows=1, ndmin=2)
        return QuantileTable(tuple(arr[:, 0]), tuple(arr[:, 1]))
    kv = {k: float(v) for k, v in _kv(body).items()} if body else {}
    if head == "point":
        return PointMass(kv.get("a", 0.0))
    if head == "uniform":
        return UniformInterval(kv["a"], kv["b"])
    if head == "gaussian":
        return Gaussian(kv.get("mean", 0.0), kv["var"])
    if head == "cauchy":
        return Cauchy(kv["scale"], kv.get("pos", 0.0))
    if head == "pareto-sym":
        return ParetoSymmetric(kv["alpha"], kv["c0"])
    raise ValueError(f"unknown datum spec {spec!r}")
