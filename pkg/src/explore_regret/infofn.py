"""Incremental information functions for white-noise exploration.

For the quadratic example the measurement sensitivity is ``dh/dtheta = u^2``
and the applied input is ``u = u0* + J*delta + alpha`` with estimation error
``delta ~ N(0, a)`` independent of the excitation ``alpha`` (variance ``x``).
Odd moments vanish, so

    E[u^4] = E[alpha^4] + 6 E[alpha^2] E[v^2] + E[v^4],   v = u0* + J*delta
           = m4 x^2 + 6 (u0*^2 + J^2 a) x + u0*^4 + 6 u0*^2 J^2 a + 3 J^4 a^2

with ``m4 = E[alpha^4] / x^2`` equal to 3 for Gaussian and 1 for ±sqrt(x)
binary excitation. Dividing by sigma2 gives the information increment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

FOURTH_MOMENT = {"gaussian": 3.0, "binary": 1.0}

# grid used for Assumption-1 checks (monotone, convex, non-negative)
CHECK_GRID = np.concatenate([[0.0], np.logspace(-6, 3, 400)])


class AssumptionError(ValueError):
    """Information function is not non-negative, increasing and convex."""


@dataclass(frozen=True)
class InformationFunction:
    family: str
    u0_star_sq: float
    eval: Callable
    deriv: Callable

    def __call__(self, x):
        return self.eval(x)


def _quartic_info(family: str, u0_star: float, sigma2: float, j_theta: float):
    m4 = FOURTH_MOMENT[family]
    u2 = float(u0_star) ** 2
    scale = 1.0 / (sigma2 * j_theta * j_theta)

    def ev(x):
        return scale * (m4 * x * x + 6.0 * u2 * x + u2 * u2)

    def de(x):
        return scale * (2.0 * m4 * x + 6.0 * u2)

    return InformationFunction(family, u2, ev, de)


def gaussian_info(u0_star: float, sigma2: float = 1.0, j_theta: float = -1.0):
    """``i(x) = 3x^2 + 6 u0*^2 x + u0*^4`` (scaled by ``1/(sigma2 J^2)``)."""
    return _quartic_info("gaussian", u0_star, sigma2, j_theta)


def binary_info(u0_star: float, sigma2: float = 1.0, j_theta: float = -1.0):
    """``i(x) = x^2 + 6 u0*^2 x + u0*^4``: the ±1 base has fourth moment 1."""
    return _quartic_info("binary", u0_star, sigma2, j_theta)


def make_info(family: str, u0_star: float, sigma2: float = 1.0, j_theta: float = -1.0):
    if family not in FOURTH_MOMENT:
        raise ValueError(f"unknown excitation family {family!r}")
    return _quartic_info(family, u0_star, sigma2, j_theta)


@dataclass(frozen=True)
class InformationEnsemble:
    """Equal-weight set of quartic information functions, one per optimal-input value.

    Used when the design-time optimal input is uncertain: the bound is averaged
    over the members. ``eval(x)`` returns shape ``(members,) + shape(x)``.
    """

    family: str
    u0_stars: np.ndarray
    sigma2: float = 1.0
    j_theta: float = -1.0

    def __post_init__(self):
        if self.family not in FOURTH_MOMENT:
            raise ValueError(f"unknown excitation family {self.family!r}")
        u = np.atleast_1d(np.asarray(self.u0_stars, dtype=float))
        if u.ndim != 1 or u.size == 0:
            raise ValueError("need a non-empty 1-D array of optimal inputs")
        object.__setattr__(self, "u0_stars", u)

    def __len__(self):
        return self.u0_stars.size

    def _u2(self, x):
        return (self.u0_stars**2).reshape((-1,) + (1,) * np.ndim(x))

    @property
    def _scale(self):
        return 1.0 / (self.sigma2 * self.j_theta * self.j_theta)

    def eval(self, x):
        m4 = FOURTH_MOMENT[self.family]
        u2 = self._u2(x)
        return self._scale * (m4 * x * x + 6.0 * u2 * x + u2 * u2)

    def deriv(self, x):
        m4 = FOURTH_MOMENT[self.family]
        return self._scale * (2.0 * m4 * x + 6.0 * self._u2(x))

    def member(self, k: int) -> InformationFunction:
        return make_info(self.family, float(self.u0_stars[k]), self.sigma2, self.j_theta)


def member_table(ifn, x) -> np.ndarray:
    """Values with a leading members axis, for single functions and ensembles alike."""
    v = np.asarray(ifn.eval(np.asarray(x, dtype=float)), dtype=float)
    return v if isinstance(ifn, InformationEnsemble) else v[None, ...]


def member_deriv_table(ifn, x) -> np.ndarray:
    v = np.asarray(ifn.deriv(np.asarray(x, dtype=float)), dtype=float)
    return v if isinstance(ifn, InformationEnsemble) else v[None, ...]


def validate_assumption1(
    ev: Callable, de: Callable, grid: np.ndarray = CHECK_GRID, rtol: float = 1e-9
) -> None:
    vals = np.array([ev(float(x)) for x in grid])
    ders = np.array([de(float(x)) for x in grid])
    tol = rtol * max(1.0, float(np.max(np.abs(ders))))
    if np.any(~np.isfinite(vals)) or np.any(~np.isfinite(ders)):
        raise AssumptionError("information function is not finite on [0, 1e3]")
    if np.any(vals < 0):
        raise AssumptionError("information function takes negative values")
    if np.any(ders < -tol):
        raise AssumptionError("information function is not monotonically increasing")
    if np.any(np.diff(ders) < -tol):
        raise AssumptionError("information function is not convex (derivative decreases)")
    dx = np.diff(grid)
    slopes = np.diff(vals) / dx
    # rounding in the value differences limits how precisely a slope is known
    noise = 4 * np.finfo(float).eps * np.maximum(np.abs(vals[:-1]), np.abs(vals[1:])) / dx
    slack = rtol * max(1.0, float(np.max(np.abs(slopes)))) + noise[:-1] + noise[1:]
    if np.any(np.diff(slopes) < -slack):
        raise AssumptionError("information function is not convex (secant slopes decrease)")


def custom_info(
    ev: Callable, de: Optional[Callable] = None, u0_star: float = 0.0, validate: bool = True
) -> InformationFunction:
    """Wrap a user-supplied ``i(x)``; the derivative defaults to finite differences.

    The callables only need to accept scalars; they are vectorized here.
    """
    if de is None:
        h = 1e-6

        def de(x):
            # right-sided at the boundary, central inside
            if x < h:
                return (ev(x + h) - ev(x)) / h
            return (ev(x + h) - ev(x - h)) / (2 * h)

    if validate:
        validate_assumption1(ev, de)
    vev = np.vectorize(ev, otypes=[float])
    vde = np.vectorize(de, otypes=[float])

    def ev_out(x):
        return vev(x) if np.ndim(x) else float(ev(float(x)))

    def de_out(x):
        return vde(x) if np.ndim(x) else float(de(float(x)))

    return InformationFunction("custom", float(u0_star) ** 2, ev_out, de_out)


def polynomial_info(coeffs, validate: bool = True) -> InformationFunction:
    """``i(x) = sum_k coeffs[k] x^k`` as a custom information function."""
    poly = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
    dpoly = poly.deriv()
    return custom_info(lambda x: float(poly(x)), lambda x: float(dpoly(x)), validate=validate)


def full_incremental_info(
    family: str,
    u0_star: float,
    x: float,
    info_inv: float,
    sigma2: float = 1.0,
    j_theta: float = -1.0,
) -> float:
    """Two-argument increment ``I(x, 1/info)`` including estimation-error terms."""
    if x < 0 or info_inv < 0:
        raise ValueError("x and info_inv must be non-negative")
    m4 = FOURTH_MOMENT[family]
    u2 = float(u0_star) ** 2
    j2 = j_theta * j_theta
    a = info_inv
    return (
        m4 * x * x
        + 6.0 * (u2 + j2 * a) * x
        + u2 * u2
        + 6.0 * u2 * j2 * a
        + 3.0 * j2 * j2 * a * a
    ) / sigma2


def moment_expansion_check(
    u0_star: float,
    x: float,
    info_inv: float,
    n_samples: int,
    family: str = "gaussian",
    j_theta: float = -1.0,
    rng: Optional[np.random.Generator] = None,
):
    """Return ``(analytic, sampled)`` values of ``E[(u0* + J delta + alpha)^4]``."""
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 1e4")
    rng = np.random.default_rng(0) if rng is None else rng
    analytic = full_incremental_info(family, u0_star, x, info_inv, 1.0, j_theta)
    delta = rng.standard_normal(n_samples) * np.sqrt(info_inv)
    if family == "gaussian":
        base = rng.standard_normal(n_samples)
    elif family == "binary":
        base = rng.integers(0, 2, n_samples) * 2.0 - 1.0
    else:
        raise ValueError(f"unknown excitation family {family!r}")
    u = u0_star + j_theta * delta + np.sqrt(x) * base
    return analytic, float(np.mean(u**4))
