"""Deterministic evolution of the characteristic function on a scaling-closed grid.

For kernels with finitely many atoms that are integer powers of one ratio rho,
the geometric grid xi_j = xi_max * rho^(j/M) maps onto itself under xi -> l xi,
so E[phi(L xi) phi(R xi)] needs no interpolation. Only xi > 0 is stored; the
values at -xi are the complex conjugates. Below the smallest node phi is set
to 1 and each such lookup is counted as a boundary visit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .kernels import CollisionKernel
from .metrics import DecayFit, decay_fit

XI_MAX = 1e2
GRID_SUBDIV = 2
BOUNDARY_FRACTION = 1e-3


class GridClosureError(ValueError):
    """Kernel atoms are not integer powers of a common ratio."""


class SchemeInstability(RuntimeError):
    """|phi| left the unit disc during time stepping."""


@dataclass(frozen=True)
class CfGrid:
    xi: np.ndarray  # descending, xi[0] = xi_max
    values: np.ndarray  # complex, one per node
    ratio: float  # rho
    subdiv: int  # M
    atom_weights: np.ndarray
    left_idx: np.ndarray  # (atoms, K) node index of l*xi; K = boundary (phi=1), K+1 = exact zero
    right_idx: np.ndarray
    boundary_fraction: float
    t: float = 0.0
    truncation_bound: float = 0.0

    @property
    def size(self) -> int:
        return int(self.xi.size)

    def with_values(self, values, **kw) -> "CfGrid":
        return replace(self, values=np.asarray(values, complex), **kw)

    def at(self, xi):
        """Node values at (possibly negative) grid frequencies by Hermitian mirroring."""
        xi = np.asarray(xi, float)
        idx = np.searchsorted(-self.xi, -np.abs(xi))
        idx = np.clip(idx, 0, self.size - 1)
        if not np.allclose(self.xi[idx], np.abs(xi), rtol=1e-12):
            raise ValueError("frequency not on grid")
        v = self.values[idx]
        return np.where(xi < 0, np.conj(v), v)


def _integer_exponent(v: float, rho: float, tol: float = 1e-9) -> Optional[int]:
    a = math.log(v) / math.log(rho)
    r = round(a)
    return r if abs(a - r) <= tol * max(1.0, abs(a)) else None


def detect_ratio(values: Sequence[float], max_den: int = 12) -> float:
    """Common ratio rho in (0, 1) with every value an integer power of rho."""
    pos = sorted({v for v in values if 0 < v < 1}, reverse=True)
    if any(v > 1 for v in values):
        raise GridClosureError("atoms above 1 push frequencies off the top of the grid")
    if not pos:
        return 0.5
    for base in pos:
        for den in range(1, max_den + 1):
            rho = base ** (1.0 / den)
            if all(_integer_exponent(v, rho) is not None for v in pos):
                return rho
    raise GridClosureError(f"atoms {values} are not integer powers of a common ratio")


def make_grid(
    kernel: CollisionKernel,
    xi_max: float = XI_MAX,
    subdiv: int = GRID_SUBDIV,
    n_nodes: Optional[int] = None,
    ratio: Optional[float] = None,
    boundary_fraction: float = BOUNDARY_FRACTION,
) -> CfGrid:
    """Closed grid for a finite-atom kernel.

    By default the node count is chosen so that fewer than ``boundary_fraction``
    of the (node, atom side) lookups fall below the smallest node.
    """
    atoms = kernel.atoms()
    if atoms is None:
        raise GridClosureError("only kernels with finitely many atoms are admitted")
    vals = [v for l, r, _ in atoms for v in (l, r)]
    rho = detect_ratio(vals) if ratio is None else ratio
    shifts = []
    for l, r, _ in atoms:
        row = []
        for v in (l, r):
            if v == 0:
                row.append(None)
            else:
                a = _integer_exponent(v, rho)
                if a is None or a < 0:
                    raise GridClosureError(f"atom {v} is not a nonnegative integer power of {rho}")
                row.append(a * subdiv)
        shifts.append(row)
    max_shift = max([s for row in shifts for s in row if s is not None] + [1])
    if n_nodes is None:
        n_nodes = int(math.floor(max_shift / boundary_fraction)) + 1
    K = n_nodes
    j = np.arange(K)
    xi = xi_max * rho ** (j / subdiv)
    left = np.empty((len(atoms), K), dtype=np.int64)
    right = np.empty((len(atoms), K), dtype=np.int64)
    visits = 0
    evaluations = 0
    for a, (sl, sr) in enumerate(shifts):
        for arr, s in ((left, sl), (right, sr)):
            if s is None:
                arr[a] = K + 1
            else:
                idx = j + s
                arr[a] = np.where(idx >= K, K, idx)
                visits += int(np.sum(idx >= K))
            evaluations += K
    w = np.array([w for _, _, w in atoms], float)
    return CfGrid(xi, np.ones(K, complex), rho, subdiv, w, left, right, visits / evaluations)


def _q_plus(grid: CfGrid, f: np.ndarray, g: np.ndarray, f_edge=1.0, g_edge=1.0) -> np.ndarray:
    """E[f(L xi) g(R xi)] on the nodes.

    ``*_edge`` is the value used below the grid and at xi = 0: 1 for a cf, 0 for
    a difference of cfs.
    """
    fe = np.concatenate((f, [f_edge, f_edge]))
    ge = np.concatenate((g, [g_edge, g_edge]))
    out = np.zeros(grid.size, complex)
    for a in range(grid.atom_weights.size):
        out += grid.atom_weights[a] * fe[grid.left_idx[a]] * ge[grid.right_idx[a]]
    return out


def cf_time_derivative(grid: CfGrid, values: Optional[np.ndarray] = None) -> np.ndarray:
    """Right-hand side E[phi(L xi) phi(R xi)] - phi(xi)."""
    v = grid.values if values is None else values
    return _q_plus(grid, v, v) - v


def _initial_values(grid, initial_cf):
    return np.asarray(initial_cf(grid.xi), complex)


def wild_partial_sum(kernel: CollisionKernel, initial_cf: Callable, t: float, N: int, grid: Optional[CfGrid] = None) -> CfGrid:
    """sum_{n<=N} e^-t (1-e^-t)^n q_n with q_n = (1/n) sum_j Q+(q_j, q_{n-1-j})."""
    if N < 0:
        raise ValueError("N must be >= 0")
    grid = make_grid(kernel) if grid is None else grid
    q = [_initial_values(grid, initial_cf)]
    for n in range(1, N + 1):
        acc = np.zeros(grid.size, complex)
        for jj in range(n):
            acc += _q_plus(grid, q[jj], q[n - 1 - jj])
        q.append(acc / n)
    a = math.exp(-t)
    b = 1.0 - a
    total = sum(a * b**n * q[n] for n in range(N + 1))
    return grid.with_values(total, t=t, truncation_bound=b ** (N + 1))


def _rk4(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _steps(t0, t1, dt):
    n = max(1, int(math.ceil((t1 - t0) / dt - 1e-12)))
    return n, (t1 - t0) / n


def evolve_cf(
    kernel: CollisionKernel,
    initial_cf: Callable,
    t: float,
    grid: Optional[CfGrid] = None,
    dt: float = 0.01,
    modulus_tol: float = 1e-6,
) -> CfGrid:
    """Classical RK4 stepping of d phi/dt = E[phi(L xi) phi(R xi)] - phi."""
    if dt > 0.01:
        raise ValueError("dt must be <= 0.01")
    grid = make_grid(kernel) if grid is None else grid
    y = _initial_values(grid, initial_cf)
    n, h = _steps(0.0, t, dt) if t > 0 else (0, 0.0)
    rhs = lambda v: _q_plus(grid, v, v) - v
    for k in range(n):
        y = _rk4(rhs, y, h)
        m = float(np.max(np.abs(y)))
        if m > 1 + modulus_tol:
            raise SchemeInstability(f"|phi| = {m:.6g} at t = {(k + 1) * h:.4g}")
    return grid.with_values(y, t=t)


@dataclass(frozen=True)
class ChiSeries:
    t: np.ndarray
    chi: np.ndarray
    p: float
    fit: Optional[DecayFit]
    window: tuple[float, float]


def chi_contraction_measurement(
    kernel: CollisionKernel,
    initial_cf: Callable,
    steady_cf: Callable,
    p: float,
    t_grid: Sequence[float],
    grid: Optional[CfGrid] = None,
    dt: float = 0.01,
    window: tuple[float, float] = (1e-3, 1e2),
    initial_diff: Optional[Callable] = None,
) -> ChiSeries:
    """chi_p(mu_t, mu_inf) on ``t_grid``, restricted to nodes inside ``window``.

    The difference D = phi - phi_inf is evolved directly:
    dD/dt = Q+(phi_inf, D) + Q+(D, phi_inf) + Q+(D, D) - D, which uses that
    phi_inf is a fixed point and avoids subtracting two numbers close to 1.
    ``initial_diff`` may supply D(0) computed without cancellation.
    """
    t_grid = np.asarray(t_grid, float)
    if np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0:
        raise ValueError("t_grid must be nonnegative and strictly increasing")
    grid = make_grid(kernel) if grid is None else grid
    phi_inf = np.asarray(steady_cf(grid.xi), complex)
    if initial_diff is None:
        d = np.asarray(initial_cf(grid.xi), complex) - phi_inf
    else:
        d = np.asarray(initial_diff(grid.xi), complex)
    in_win = (grid.xi >= window[0]) & (grid.xi <= window[1])
    weight = grid.xi[in_win] ** (-p)

    def rhs(dv):
        return (
            _q_plus(grid, phi_inf, dv, 1.0, 0.0)
            + _q_plus(grid, dv, phi_inf, 0.0, 1.0)
            + _q_plus(grid, dv, dv, 0.0, 0.0)
            - dv
        )

    chis = []
    t_now = 0.0
    for t_target in t_grid:
        if t_target > t_now:
            n, h = _steps(t_now, t_target, dt)
            for _ in range(n):
                d = _rk4(rhs, d, h)
            t_now = t_target
        chis.append(float(np.max(np.abs(d[in_win]) * weight)))
    chis = np.array(chis)
    try:
        fit = decay_fit(t_grid, chis)
    except ValueError:
        fit = None
    return ChiSeries(t_grid, chis, p, fit, window)
