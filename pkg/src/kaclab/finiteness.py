"""Sufficient conditions for d_p(initial law, steady state) < infinity.

With theta = 1 + (p - a)/(p a) and k = floor(theta), the initial CDF must match
the first k steady-state tail coefficients up to a remainder
zeta(|x|) / |x|^(theta a) with int_B^inf zeta^p(x)/x dx < inf, and S must be
negative somewhere beyond theta a. Only sufficiency is decided: the verdict
is "established" or "not established", never "infinite".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

from .fixed_point import feasible_terms, steady_tail_expansion
from .kernels import CollisionKernel, s_function
from .stable import StableParams

COEF_RTOL = 1e-9
_ABOVE = 1.0 + 1e-12


@dataclass(frozen=True)
class PowerRemainder:
    """zeta(x) = x^-eps."""

    eps: float

    def exponent_over(self, theta_alpha: float) -> float:
        return self.eps


@dataclass(frozen=True)
class LogRemainder:
    """zeta(x) = (log x)^(-(1+eps)/p)."""

    eps: float

    def exponent_over(self, theta_alpha: float) -> float:
        return 0.0


@dataclass(frozen=True)
class OrderRemainder:
    """Remainder O(|x|^-order); equivalent to a power zeta with eps = order - theta a."""

    order: float

    def exponent_over(self, theta_alpha: float) -> float:
        return self.order - theta_alpha


@dataclass(frozen=True)
class CustomRemainder:
    """User supplied decreasing bound with a declared integrability flag."""

    bound: Optional[Callable[[float], float]] = None
    integrable: Optional[bool] = None


Remainder = Union[PowerRemainder, LogRemainder, OrderRemainder, CustomRemainder]


@dataclass(frozen=True)
class TailSpec:
    """Declared tail expansion of F0 with coefficient i at order (i+1) alpha."""

    c_minus: tuple[float, ...]
    c_plus: tuple[float, ...]
    remainder: Remainder
    gamma0: float = 0.0
    one_sided_moment: Optional[str] = None  # "plus" or "minus": side with finite p-th moment
    finite_p_moment: Optional[bool] = None  # declared int |x|^p dF0 < inf (used by shortcuts)

    def __post_init__(self):
        object.__setattr__(self, "c_minus", tuple(float(c) for c in self.c_minus))
        object.__setattr__(self, "c_plus", tuple(float(c) for c in self.c_plus))
        if len(self.c_minus) != len(self.c_plus):
            raise ValueError("c_minus and c_plus must have equal length")
        r = self.remainder
        if isinstance(r, (PowerRemainder, LogRemainder)) and not r.eps > 0:
            raise ValueError("remainder eps must be positive")
        if self.one_sided_moment not in (None, "plus", "minus"):
            raise ValueError("one_sided_moment must be 'plus', 'minus' or None")


@dataclass(frozen=True)
class Verdict:
    established: bool
    k_used: int
    required_coefficients: dict
    reasons: tuple[str, ...]
    notes: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "established": self.established,
            "k_used": self.k_used,
            "required_coefficients": self.required_coefficients,
            "reasons": list(self.reasons),
            "notes": list(self.notes),
        }


def theta_alpha(alpha: float, p: float) -> float:
    """Exponent a + (p - a)/p of the remainder bound."""
    return alpha + (p - alpha) / p


def required_order(alpha: float, p: float) -> int:
    if not p > alpha > 0:
        raise ValueError("required_order needs p > alpha > 0")
    return int(math.floor(1.0 + (p - alpha) / (p * alpha) + 1e-12))


def _coef_match(declared: float, target: float) -> bool:
    return abs(declared - target) <= COEF_RTOL * max(abs(target), 1e-300) or (target == 0 and abs(declared) <= COEF_RTOL)


def _remainder_check(rem: Remainder, th_a: float) -> tuple[bool, str]:
    if isinstance(rem, CustomRemainder):
        if rem.integrable is None:
            raise ValueError("Custom remainder must declare whether int zeta^p(x)/x dx is finite")
        return rem.integrable, f"custom remainder declared {'integrable' if rem.integrable else 'not integrable'}"
    if isinstance(rem, LogRemainder):
        return True, f"log remainder: int (log x)^-(1+{rem.eps}) d(log x) < inf"
    eps = rem.exponent_over(th_a)
    ok = eps > 0
    return ok, f"power remainder with eps = {eps:.6g} {'> 0' if ok else '<= 0'}"


def check_finiteness(tail: TailSpec, kernel: CollisionKernel, stable: StableParams, p: float) -> Verdict:
    a = stable.alpha
    if not p > a:
        raise ValueError("check_finiteness needs p > alpha")
    reasons: list[str] = []
    notes: list[str] = []
    if a == 2:
        return Verdict(False, 0, {}, ("fail: criterion covers 0 < alpha < 2 only",))

    g0 = tail.gamma0 or stable.gamma0
    if a == 1 and g0 != 0:
        notes.append(f"shifted by gamma0 = {g0!r}: checked for the centred datum and steady state")

    # shortcut: zero tail constants, the steady state has all moments that S allows
    if stable.lam == 0:
        mom = tail.finite_p_moment
        if a == 1:
            s_p = s_function(kernel, p)
            s_ok = s_p < 0
            reasons.append(("pass" if s_ok else "fail") + f": steady state has a finite p-th moment (S(p) = {s_p:.6g})")
        else:
            s_ok = True
            reasons.append("pass: steady state is the point mass at 0")
        if mom is None:
            reasons.append("fail: p-th moment of the datum not declared")
        else:
            reasons.append(("pass" if mom else "fail") + ": declared p-th moment of the datum")
        notes.append("zero tail constants: finiteness reduces to the p-th moment of the datum")
        return Verdict(bool(s_ok and mom), 0, {}, tuple(reasons), tuple(notes))

    k = required_order(a, p)
    th_a = theta_alpha(a, p)
    skew = abs(stable.beta) == 1 and a != 1
    ok = True

    # (a) spectral condition
    s_lo = max(p, th_a) if skew else th_a
    s_val = s_function(kernel, s_lo * _ABOVE)
    a_ok = s_val < 0
    ok &= a_ok
    reasons.append(
        ("pass" if a_ok else "fail")
        + f": S(s) < 0 for some s > {s_lo:.6g} (S just above = {s_val:.6g})"
    )

    # (b) coefficient targets
    targets = {"plus": [], "minus": []}
    n_feas = feasible_terms(kernel, a, k)
    if n_feas < k:
        ok = False
        reasons.append(f"fail: steady tail has only {n_feas} of {k} required terms")
    else:
        tc = steady_tail_expansion(kernel, stable, k)
        targets = {"plus": list(tc.c_plus[:k]), "minus": list(tc.c_minus[:k])}
        if len(tail.c_plus) < k:
            ok = False
            reasons.append(f"fail: {len(tail.c_plus)} coefficients declared, {k} required")
        else:
            sides = ("minus",) if skew and stable.beta == -1 else ("plus",) if skew else ("plus", "minus")
            for side in sides:
                decl = tail.c_plus if side == "plus" else tail.c_minus
                for i in range(k):
                    if not _coef_match(decl[i], targets[side][i]):
                        ok = False
                        reasons.append(
                            f"fail: coefficient mismatch at order {i} ({side}: declared {decl[i]!r}, target {targets[side][i]!r})"
                        )
                        break
                else:
                    reasons.append(f"pass: {side} coefficients match targets for i < {k}")
            if len(tail.c_plus) > k:
                notes.append("coefficients beyond the required order fold into the remainder")

    # (c) remainder
    r_ok, msg = _remainder_check(tail.remainder, th_a)
    ok &= r_ok
    reasons.append(("pass: " if r_ok else "fail: ") + msg)

    # (d) thin side of a totally skewed law
    if skew:
        need = "plus" if stable.beta == -1 else "minus"
        m_ok = tail.one_sided_moment == need
        ok &= m_ok
        reasons.append(("pass" if m_ok else "fail") + f": finite p-th moment declared on the {need} side")

    return Verdict(bool(ok), k, targets, tuple(reasons), tuple(notes))


def steady_tail_spec(kernel: CollisionKernel, stable: StableParams, p: float) -> TailSpec:
    """TailSpec describing the steady state itself (first k coefficients plus remainder order)."""
    a = stable.alpha
    k = required_order(a, p)
    n = feasible_terms(kernel, a, k + 1)
    tc = steady_tail_expansion(kernel, stable, max(1, min(n, k + 1)))
    m = min(k, tc.k)
    if tc.k > k:
        order = min(tc.orders[k], tc.remainder_order)
    else:
        order = tc.remainder_order
    side = None
    if abs(stable.beta) == 1 and a != 1 and s_function(kernel, p * _ABOVE) < 0:
        side = "plus" if stable.beta == -1 else "minus"
    return TailSpec(tc.c_minus[:m], tc.c_plus[:m], OrderRemainder(order), stable.gamma0, side)
