"""Minimize the regret upper bound over exploration schedules.

The optimum of the bound is either lazy (no exploration) or immediate
(exploration only at the first step), so the search reduces to one variable:

    g(x1) = sum_{t=1}^{T-1} 1 / (i0 + i(x1) + (t-1) i(0)) + x1

which is compared against the lazy value ``g(0)``. Brute-force enumeration on
small horizons checks that structure independently of the reduction.

Every function also accepts an :class:`~explore_regret.infofn.InformationEnsemble`,
in which case the bound is the member average. The swap and KKT arguments
hold member by member, so the lazy-or-immediate structure carries over.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .infofn import InformationFunction, member_deriv_table, member_table

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
ZERO_VARIANCE = 1e-9
TIE_TOL = 1e-12
SCAN_POINTS = 301
DEFAULT_BUDGET = 10**8


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class ScheduleSolution:
    kind: str
    x1: float
    bound_value: float
    condition_lhs: float
    kkt_residuals: np.ndarray

    @property
    def schedule(self) -> np.ndarray:
        x = np.zeros(self.kkt_residuals.size)
        x[0] = self.x1
        return x


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-8,
                   max_iter: int = 500):
    """Bracketing golden-section search; returns ``(x, f(x), (a, b))``."""
    a, b = float(lo), float(hi)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x = c if fc <= fd else d
    return x, min(fc, fd), (a, b)


def _check(i0: float, T: int):
    if T < 2:
        raise ValueError(f"horizon must be at least 2, got {T}")
    if not i0 > 0:
        raise ValueError(f"i0 must be positive, got {i0}")


def immediate_condition(ifn: InformationFunction, i0: float, T: int):
    """``(lhs, lhs > 1)`` for ``lhs = sum_{t<T} i'(0) / (i0 + t i(0))^2``."""
    _check(i0, T)
    t = np.arange(1, T, dtype=float)
    i_zero = member_table(ifn, 0.0)[:, None]
    d_zero = member_deriv_table(ifn, 0.0)[:, None]
    lhs = float(np.mean(np.sum(d_zero / (i0 + t * i_zero) ** 2, axis=1)))
    return lhs, lhs > 1.0


def kkt_certificate(ifn: InformationFunction, i0: float, x: Sequence[float], T: int) -> np.ndarray:
    """Multipliers ``lambda_k = 1 - i'(x_k) sum_{t>=k} 1/(i0 + sum_{s<=t} i(x_s))^2``."""
    _check(i0, T)
    x = np.asarray(x, dtype=float)
    if x.shape != (T - 1,) or np.any(x < 0):
        raise ValueError(f"need {T - 1} non-negative variances")
    inv2 = 1.0 / (i0 + np.cumsum(member_table(ifn, x), axis=1)) ** 2
    tail = np.cumsum(inv2[:, ::-1], axis=1)[:, ::-1]
    return 1.0 - np.mean(member_deriv_table(ifn, x) * tail, axis=0)


def _reduced(ifn: InformationFunction, i0: float, T: int):
    lag = member_table(ifn, 0.0)[:, None] * np.arange(T - 1, dtype=float)

    def g(x1):
        den = i0 + member_table(ifn, x1)[:, None] + lag
        return float(np.mean(np.sum(1.0 / den, axis=1)) + x1)

    def dg(x1):
        den = i0 + member_table(ifn, x1)[:, None] + lag
        return float(1.0 - np.mean(member_deriv_table(ifn, x1) * np.sum(1.0 / den**2, axis=1)))

    return g, dg


def optimize_schedule(ifn: InformationFunction, i0: float, T: int, x_max: float = 100.0,
                      tol: float = 1e-8) -> ScheduleSolution:
    _check(i0, T)
    if not x_max > 0:
        raise ValueError("x_max must be positive")
    g, dg = _reduced(ifn, i0, T)
    lhs, immediate_required = immediate_condition(ifn, i0, T)

    scan = np.concatenate([[0.0], np.logspace(-8, math.log10(x_max), SCAN_POINTS)])
    values = np.array([g(x) for x in scan])
    k = int(np.argmin(values))
    if k == 0 and immediate_required:
        # g decreases at 0, so the minimizer lies inside the first scan cell
        k = 1
    best_x, best_g = float(scan[k]), float(values[k])
    if k > 0:
        lo, hi = scan[k - 1], scan[min(k + 1, scan.size - 1)]
        x, fx, (a, b) = golden_section(g, lo, hi, tol=tol)
        if fx < best_g:
            best_x, best_g = x, fx
        # polish the stationary point so the KKT multiplier is ~0
        ga, gb = dg(lo), dg(hi)
        if ga < 0 < gb:
            xs = brentq(dg, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
            if g(xs) <= best_g + TIE_TOL:
                best_x, best_g = float(xs), g(xs)
        if best_x >= x_max * (1 - 1e-9):
            warnings.warn(f"bound minimizer sits at x_max={x_max}; widen the search bracket",
                          RuntimeWarning, stacklevel=2)

    lazy_g = float(values[0])
    if immediate_required:
        kind = "immediate"
    elif best_x > ZERO_VARIANCE and best_g < lazy_g - TIE_TOL:
        kind = "immediate"
    else:
        kind = "lazy"
    x1 = best_x if kind == "immediate" else 0.0
    x = np.zeros(T - 1)
    x[0] = x1
    return ScheduleSolution(
        kind=kind,
        x1=x1,
        bound_value=1.0 / i0 + g(x1),
        condition_lhs=lhs,
        kkt_residuals=kkt_certificate(ifn, i0, x, T),
    )


@dataclass(frozen=True)
class BruteForceResult:
    argmin: np.ndarray
    value: float
    tail_zero: bool
    nonincreasing: bool
    gap: float
    evaluations: int
    reference: Optional[ScheduleSolution] = None


def _bound_block(i_grid, grid, i0, first_idx, dims):
    """R_ub for every grid point whose first coordinate is ``grid[first_idx]``.

    ``i_grid`` holds ``i(grid)`` per member (members x grid); members are averaged.
    """
    shape = (grid.size,) * (dims - 1)
    recip = np.zeros(shape)
    for row in i_grid:
        cum = np.full(shape, i0 + row[first_idx])
        acc = 1.0 / cum
        for axis in range(dims - 1):
            bshape = [1] * (dims - 1)
            bshape[axis] = grid.size
            cum = cum + row.reshape(bshape)
            acc = acc + 1.0 / cum
        recip = recip + acc
    lin = np.full(shape, grid[first_idx])
    for axis in range(dims - 1):
        bshape = [1] * (dims - 1)
        bshape[axis] = grid.size
        lin = lin + grid.reshape(bshape)
    return 1.0 / i0 + recip / i_grid.shape[0] + lin


def brute_force_verify(ifn: InformationFunction, i0: float, T: int, grid: Sequence[float],
                       budget: int = DEFAULT_BUDGET, reference: bool = True) -> BruteForceResult:
    """Exhaustively minimize the bound over ``grid^(T-1)``.

    Ties resolve to the lowest flat (C-order) index, so the result does not
    depend on how the enumeration is split.
    """
    _check(i0, T)
    grid = np.unique(np.asarray(grid, dtype=float))
    if grid.size == 0 or grid[0] != 0.0 or np.any(grid < 0):
        raise ValueError("grid must be non-negative and contain 0")
    dims = T - 1
    evaluations = grid.size**dims
    if evaluations > budget:
        raise BudgetExceeded(f"{evaluations} evaluations exceed the budget of {budget}")
    i_grid = member_table(ifn, grid)

    best_val, best_idx = math.inf, None
    for j in range(grid.size):
        block = _bound_block(i_grid, grid, i0, j, dims)
        flat = int(np.argmin(block))
        val = float(block.reshape(-1)[flat])
        if val < best_val:
            best_val = val
            best_idx = (j,) + (np.unravel_index(flat, block.shape) if block.ndim else ())
    argmin = grid[list(best_idx)]
    ref = optimize_schedule(ifn, i0, T, x_max=float(grid[-1]) if grid[-1] > 0 else 1.0) \
        if reference else None
    return BruteForceResult(
        argmin=argmin,
        value=best_val,
        tail_zero=bool(np.all(argmin[1:] == 0.0)),
        nonincreasing=bool(np.all(np.diff(argmin) <= 0.0)),
        gap=best_val - ref.bound_value if ref is not None else math.nan,
        evaluations=evaluations,
        reference=ref,
    )
