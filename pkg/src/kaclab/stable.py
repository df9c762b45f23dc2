"""Centered alpha-stable laws in the (lambda, beta) parameterisation.

The characteristic function is

    exp(-lam |xi|^a (1 - i beta tan(pi a / 2) sign xi))          a != 1, 2
    exp(-lam |xi| (1 + 2 i beta / pi log|xi| sign xi)) e^{i g0 xi} a == 1
    exp(-lam xi^2)                                                a == 2

so ``lam`` is sigma**alpha in the usual S1 notation. Sampling goes through the
Chambers-Mallows-Stuck transform written in the converted (lam~, beta~)
parameters, which are also the natural ones for the tail series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats
from scipy.special import gammaln


class RequestOutOfAsymptoticRange(ValueError):
    """|x| is too small for the truncated tail series to meet the tolerance."""


class _ThinTail:
    """Marker for a tail that decays faster than every power."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "THIN_TAIL"

    def __float__(self):
        return 0.0


THIN_TAIL = _ThinTail()


@dataclass(frozen=True)
class StableParams:
    alpha: float
    lam: float
    beta: float = 0.0
    gamma0: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not self.lam >= 0 or not math.isfinite(self.lam):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")
        if not abs(self.beta) <= 1:
            raise ValueError(f"|beta| must be <= 1, got {self.beta}")
        if self.alpha == 2 and self.beta != 0:
            object.__setattr__(self, "beta", 0.0)
        if self.gamma0 != 0 and self.alpha != 1:
            raise ValueError("gamma0 is only meaningful for alpha = 1")

    @property
    def degenerate(self) -> bool:
        """True for lam = 0, i.e. the point mass at gamma0."""
        return self.lam == 0

    def converted(self) -> tuple[float, float]:
        """(lam~, beta~) used by the sampler and the tail series."""
        return convert_params(self.alpha, self.lam, self.beta)


def _k_alpha(alpha: float) -> float:
    return alpha if alpha <= 1 else alpha - 2.0


def convert_params(alpha: float, lam: float, beta: float) -> tuple[float, float]:
    if alpha == 1:
        return lam, 0.0 if beta == 0 else beta
    bt = 2.0 / math.pi * math.atan(beta * math.tan(_k_alpha(alpha) * math.pi / 2))
    return lam / math.cos(bt * math.pi / 2), bt


def unconvert_params(alpha: float, lam_t: float, beta_t: float) -> tuple[float, float]:
    """Inverse of :func:`convert_params` for alpha != 1."""
    lam = lam_t * math.cos(beta_t * math.pi / 2)
    t = math.tan(_k_alpha(alpha) * math.pi / 2)
    beta = math.tan(beta_t * math.pi / 2) / t if t != 0 else 0.0
    return lam, beta


def cf_stable(params: StableParams, xi):
    """Characteristic function, vectorised over ``xi``."""
    out = np.exp(_cf_exponent(params, np.asarray(xi, dtype=float)))
    return out if out.ndim else complex(out)


def _cf_exponent(params: StableParams, xi: np.ndarray) -> np.ndarray:
    a, lam, b = params.alpha, params.lam, params.beta
    ax = np.abs(xi)
    sg = np.sign(xi)
    if a == 2:
        return -lam * xi * xi + 0j
    if a == 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            logterm = np.where(ax > 0, np.log(np.where(ax > 0, ax, 1.0)), 0.0)
        return -lam * ax * (1 + 2j * b / math.pi * logterm * sg) + 1j * params.gamma0 * xi
    return -lam * ax**a * (1 - 1j * b * math.tan(math.pi * a / 2) * sg)


def cf_stable_m1(params: StableParams, xi):
    """cf_stable(xi) - 1 computed without cancellation for small |xi|."""
    z = _cf_exponent(params, np.asarray(xi, dtype=float))
    # exp(z) - 1 = expm1(Re z) e^{i Im z} + (e^{i Im z} - 1)
    rot = np.exp(1j * z.imag)
    out = np.expm1(z.real) * rot + 2j * np.sin(z.imag / 2) * np.exp(0.5j * z.imag)
    return out if np.ndim(out) else complex(out)


def params_from_tails(c0_plus: float, c0_minus: float, alpha: float, gamma0: float = 0.0) -> StableParams:
    """Stable law attracting data with x^a P{X>x} -> c0+ and |x|^a P{X<x} -> c0-."""
    if c0_plus < 0 or c0_minus < 0:
        raise ValueError("tail constants must be nonnegative")
    total = c0_plus + c0_minus
    if alpha == 1:
        if abs(c0_plus - c0_minus) > 1e-12 * max(1.0, total):
            raise ValueError("alpha = 1 requires symmetric tails (c0+ = c0-)")
        return StableParams(1.0, math.pi * c0_plus, 0.0, gamma0)
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2) for the tail relation")
    lam = total * math.pi / (2 * math.gamma(alpha) * math.sin(math.pi * alpha / 2))
    beta = 0.0 if total == 0 else (c0_plus - c0_minus) / total
    return StableParams(alpha, lam, beta)


def tails_from_params(params: StableParams) -> tuple[float, float]:
    """Inverse of :func:`params_from_tails`: (c0+, c0-)."""
    a, lam, b = params.alpha, params.lam, params.beta
    if a == 2:
        return 0.0, 0.0
    if a == 1:
        return lam / math.pi, lam / math.pi
    total = lam * 2 * math.gamma(a) * math.sin(math.pi * a / 2) / math.pi
    return total * (1 + b) / 2, total * (1 - b) / 2


def sample_stable(params: StableParams, rng: np.random.Generator, size=None):
    """Exact draws by the Chambers-Mallows-Stuck transform."""
    a, lam = params.alpha, params.lam
    n = 1 if size is None else size
    if params.degenerate:
        out = np.full(n, params.gamma0, dtype=float)
    elif a == 2:
        out = rng.normal(0.0, math.sqrt(2 * lam), n)
    elif a == 1:
        if params.beta != 0:
            raise ValueError("sampling alpha = 1 with beta != 0 is not supported")
        out = params.gamma0 + lam * np.tan(math.pi * (rng.random(n) - 0.5))
    else:
        lam_t, b_t = params.converted()
        v = math.pi * (rng.random(n) - 0.5)
        w = rng.standard_exponential(n)
        shift = b_t * math.pi / 2
        out = (
            lam_t ** (1 / a)
            * np.sin(a * v + shift)
            / np.cos(v) ** (1 / a)
            * (np.cos((1 - a) * v - shift) / w) ** ((1 - a) / a)
        )
    return float(out[0]) if size is None else out


@dataclass(frozen=True)
class TailCoefficients:
    """Series 1-F(x) ~ sum c_plus[i] x^-orders[i], F(x) ~ sum c_minus[i] |x|^-orders[i]."""

    k: int
    c_plus: tuple[float, ...]
    c_minus: tuple[float, ...]
    orders: tuple[float, ...]
    lambda_tilde: float
    beta_tilde: float
    alpha: float
    thin_plus: bool = False
    thin_minus: bool = False
    truncated: bool = False  # set when the requested order exceeded what is available
    requested_k: Optional[int] = None
    remainder_order: Optional[float] = None  # exponent of the O(|x|^-r) remainder


def tail_coefficients(params: StableParams, k: int) -> TailCoefficients:
    if k <= 0:
        raise ValueError("k must be >= 1")
    a, lam, b = params.alpha, params.lam, params.beta
    if a == 2:
        raise ValueError("Gaussian laws have no power tail series")
    if a == 1:
        if b != 0:
            raise ValueError("alpha = 1 tail series needs beta = 0")
        c = tuple((-1) ** i * lam ** (2 * i + 1) / (math.pi * (2 * i + 1)) for i in range(k))
        return TailCoefficients(
            k, c, c, tuple(2.0 * i + 1 for i in range(k)), lam, 0.0, 1.0, remainder_order=2.0 * k + 1
        )
    lam_t, b_t = convert_params(a, lam, b)
    c0p, c0m = tails_from_params(params)
    cp, cm = [c0p], [c0m]
    for i in range(1, k):
        base = (-1) ** i * lam_t ** (i + 1) * math.exp(gammaln(a * (i + 1)) - gammaln(i + 2)) / math.pi
        cp.append(base * math.sin(math.pi / 2 * (i + 1) * (a + b_t)))
        cm.append(base * math.sin(math.pi / 2 * (i + 1) * (a - b_t)))
    thin_p, thin_m = b == -1, b == 1
    if thin_p:
        cp = [0.0] * k
    if thin_m:
        cm = [0.0] * k
    return TailCoefficients(
        k, tuple(cp), tuple(cm), tuple(a * (i + 1) for i in range(k)), lam_t, b_t, a, thin_p, thin_m,
        remainder_order=a * (k + 1),
    )


def _series_value(coeffs, orders, ax, tol, k):
    val = sum(c * ax ** (-o) for c, o in zip(coeffs[:k], orders[:k]))
    nxt = abs(coeffs[k]) * ax ** (-orders[k])
    if nxt > tol:
        raise RequestOutOfAsymptoticRange(
            f"next term {nxt:.3g} exceeds tolerance {tol:.3g} at |x|={ax:.6g}"
        )
    return val


def stable_cdf_tail(params: StableParams, x: float, k: int, tol: float = 1e-3):
    """k-term tail series: F(x) for x < 0, 1 - F(x) for x > 0.

    The (k+1)-th term is evaluated as an error proxy and must not exceed ``tol``.
    Returns THIN_TAIL on the light side of a totally skewed law.
    """
    if x == 0:
        raise RequestOutOfAsymptoticRange("x = 0 is not in any tail")
    tc = tail_coefficients(params, k + 1)
    if (x > 0 and tc.thin_plus) or (x < 0 and tc.thin_minus):
        return THIN_TAIL
    x_shift = x - params.gamma0 if params.alpha == 1 else x
    coeffs = tc.c_plus if x_shift > 0 else tc.c_minus
    return float(_series_value(coeffs, tc.orders, abs(x_shift), tol, k))


def _closed_form(params: StableParams):
    if params.alpha == 2:
        return stats.norm(0.0, math.sqrt(2 * params.lam))
    if params.alpha == 1 and params.beta == 0:
        return stats.cauchy(params.gamma0, params.lam)
    raise NotImplementedError("closed-form distribution only for alpha = 2 or symmetric alpha = 1")


def stable_cdf(params: StableParams, x):
    """Exact CDF for Gaussian and symmetric Cauchy laws."""
    if params.degenerate:
        return np.where(np.asarray(x) >= params.gamma0, 1.0, 0.0)
    return _closed_form(params).cdf(x)


def stable_sf(params: StableParams, x):
    if params.degenerate:
        return np.where(np.asarray(x) >= params.gamma0, 0.0, 1.0)
    return _closed_form(params).sf(x)


def stable_ppf(params: StableParams, u):
    if params.degenerate:
        return np.full_like(np.asarray(u, dtype=float), params.gamma0)
    return _closed_form(params).ppf(u)
