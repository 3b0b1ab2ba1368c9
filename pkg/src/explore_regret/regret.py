"""Regret quantities for an exploration-variance schedule.

All design-time quantities use the scaled regret (the ``H_u / 2`` factor is
dropped); for the quadratic example ``H_u / 2 = 1`` so they are directly
comparable with the empirical regret, which always uses the true cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .infofn import InformationFunction, full_incremental_info, member_table
from .model import SystemModel

STRATEGIES = ("lazy", "immediate_gaussian", "immediate_binary", "decaying_gaussian", "explicit")


@dataclass(frozen=True)
class ExplorationSchedule:
    """Per-step exploration variances ``x_1..x_T`` and the family that produced them."""

    variances: np.ndarray
    strategy: str = "explicit"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.variances, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("variances must be a non-empty 1-D sequence")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("variances must be finite and non-negative")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        v.setflags(write=False)
        object.__setattr__(self, "variances", v)

    @property
    def T(self) -> int:
        return self.variances.size

    @property
    def family(self) -> str:
        return "binary" if self.strategy == "immediate_binary" else "gaussian"

    @classmethod
    def lazy(cls, T: int):
        return cls(np.zeros(T), "lazy", {})

    @classmethod
    def immediate(cls, T: int, x1: float, family: str = "gaussian"):
        if x1 < 0:
            raise ValueError("first-step variance must be non-negative")
        v = np.zeros(T)
        v[0] = x1
        if family == "gaussian":
            return cls(v, "immediate_gaussian", {"x_g": float(x1)})
        if family == "binary":
            return cls(v, "immediate_binary", {"x_b": float(x1)})
        raise ValueError(f"unknown excitation family {family!r}")

    @classmethod
    def decaying(cls, T: int, c: float, p: float):
        if c < 0:
            raise ValueError("decay constant c must be non-negative")
        if not p < 0:
            raise ValueError("decay exponent p must be negative")
        t = np.arange(1, T + 1, dtype=float)
        return cls(c * t**p, "decaying_gaussian", {"c": float(c), "p": float(p)})


@dataclass
class RegretReport:
    empirical: Optional[float] = None
    approx: Optional[float] = None
    upper_bound: Optional[float] = None
    trajectory: Optional[np.ndarray] = None
    stderr: Optional[np.ndarray] = None
    n_replicates: int = 0
    meta: dict = field(default_factory=dict)


def _check_design(i0: float, x, T: int) -> np.ndarray:
    if not i0 > 0:
        raise ValueError(f"i0 must be positive, got {i0}")
    if T < 1:
        raise ValueError("horizon must be at least 1")
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size not in (T - 1, T):
        raise ValueError(f"expected {T - 1} (or {T}) variances, got shape {x.shape}")
    if np.any(x < 0):
        raise ValueError("variances must be non-negative")
    return x


def regret_upper_bound(ifn: InformationFunction, i0: float, x, T: int) -> float:
    """``1/i0 + sum_t 1/(i0 + sum_{s<=t} i(x_s)) + sum_t x_t``.

    ``x`` normally has ``T-1`` entries; a supplied ``x_T`` only enters the
    linear exploration cost since it cannot inform any later decision.
    Ensembles average the reciprocal terms over members.
    """
    x = _check_design(i0, x, T)
    info = i0 + np.cumsum(member_table(ifn, x[: T - 1]), axis=1)
    return float(1.0 / i0 + np.mean(np.sum(1.0 / info, axis=1)) + np.sum(x))


def regret_approx(
    family: str,
    u0_star: float,
    i0: float,
    x,
    T: int,
    sigma2: float = 1.0,
    j_theta: float = -1.0,
) -> float:
    """Approximate regret with the estimation-error terms kept in the information recursion."""
    x = _check_design(i0, x, T)
    j2 = j_theta * j_theta
    info = i0 * j2
    total = j2 / info
    for t in range(T - 1):
        info = info + full_incremental_info(family, u0_star, x[t], 1.0 / info, sigma2, j_theta)
        total += j2 / info
    return float(total + np.sum(x))


def _pairwise_rows(a: np.ndarray) -> np.ndarray:
    # reduce along the contiguous last axis so numpy uses pairwise summation
    return np.ascontiguousarray(a).sum(axis=-1)


def empirical_regret(trajectories, model: SystemModel) -> RegretReport:
    """Replicate-mean cumulative regret of applied input sequences (replicates x T)."""
    u = np.atleast_2d(np.asarray(trajectories, dtype=float))
    if u.shape[0] == 0 or u.size == 0:
        raise ValueError("need at least one replicate")
    n = u.shape[0]
    u0 = model.u0_star
    inst = model.cost(u, model.theta0) - model.cost(u0, model.theta0)
    cum = np.cumsum(inst, axis=1).T  # (T, n)
    mean = _pairwise_rows(cum) / n
    if n > 1:
        var = _pairwise_rows((cum - mean[:, None]) ** 2) / (n - 1)
        se = np.sqrt(var / n)
    else:
        se = np.zeros_like(mean)
    return RegretReport(
        empirical=float(mean[-1]), trajectory=mean, stderr=se, n_replicates=n
    )
