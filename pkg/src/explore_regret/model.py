"""Scalar plant under optimization: cost, measurement, optimal-input map.

Only the quadratic instance is shipped, but :class:`SystemModel` accepts any
callables so the design and regret code work for other scalar systems.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

FD_STEP = 1e-6


def central_diff(f: Callable[[float], float], x: float, h: float = FD_STEP) -> float:
    return (f(x + h) - f(x - h)) / (2.0 * h)


def central_diff2(f: Callable[[float], float], x: float, h: float = 1e-4) -> float:
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)


@dataclass(frozen=True)
class SystemModel:
    """A scalar system ``y = h(u, theta0) + e`` with cost ``Phi(u, theta0)``.

    ``j_theta`` (dU/dtheta) and ``h_u`` (d2Phi/du2 at the optimum) are
    estimated by central differences when not supplied.
    """

    theta0: float
    sigma2: float
    cost: Callable[[float, float], float]
    measurement: Callable[[float, float], float]
    measurement_dtheta: Callable[[float, float], float]
    optimal_input_map: Callable[[float], float]
    j_theta: Optional[float] = None
    h_u: Optional[float] = None
    name: str = "custom"

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.j_theta is None:
            object.__setattr__(
                self, "j_theta", central_diff(self.optimal_input_map, self.theta0)
            )
        if self.h_u is None:
            u0 = self.optimal_input_map(self.theta0)
            object.__setattr__(
                self, "h_u", central_diff2(lambda u: self.cost(u, self.theta0), u0)
            )
        if not self.h_u > 0:
            raise ValueError(f"cost curvature at the optimum must be positive, got {self.h_u}")

    @property
    def u0_star(self) -> float:
        return self.optimal_input_map(self.theta0)


def quadratic_example(theta0: float, sigma2: float = 1.0) -> SystemModel:
    """``Phi(u, theta) = u^2 + 2 (theta + 1) u`` measured through ``h = theta u^2``."""
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    return SystemModel(
        theta0=float(theta0),
        sigma2=float(sigma2),
        cost=lambda u, th: u * u + 2.0 * (th + 1.0) * u,
        measurement=lambda u, th: th * u * u,
        measurement_dtheta=lambda u, th: u * u,
        optimal_input_map=lambda th: -(th + 1.0),
        j_theta=-1.0,
        h_u=2.0,
        name="quadratic",
    )


def optimal_input(model: SystemModel, theta: float) -> float:
    return model.optimal_input_map(theta)


def measure(model: SystemModel, u: float, noise: float) -> float:
    """Noisy output at input ``u``; the noise realization is supplied by the caller."""
    return model.measurement(u, model.theta0) + noise


def instantaneous_regret(model: SystemModel, u: float) -> float:
    u0 = model.u0_star
    return model.cost(u, model.theta0) - model.cost(u0, model.theta0)
