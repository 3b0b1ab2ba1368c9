"""Weighted least-squares estimate and Fisher information for ``y = theta * phi(u) + e``.

For the quadratic example ``phi(u) = u^2``. The estimate ``sum(phi*y) / sum(phi^2)``
is the Gaussian maximum-likelihood estimator; with inputs fixed in advance it is
unbiased with variance ``sigma2 / sum(phi^2)``, the inverse Fisher information.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .model import SystemModel


@dataclass(frozen=True)
class EstimatorState:
    theta_hat: float
    info: float
    s_num: float
    s_den: float
    sigma2: float
    prior_info: float = 0.0

    @classmethod
    def fresh(cls, sigma2: float, prior_info: float = 0.0, theta_hat: float = 0.0):
        """Empty state (no data yet), optionally carrying prior information."""
        if not sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        return cls(theta_hat, prior_info, 0.0, 0.0, sigma2, prior_info)


def init_experiment(model: SystemModel, u_init: float, noise: float) -> EstimatorState:
    """One data pair at a deterministic input; gives the initial estimate and information."""
    phi = model.measurement_dtheta(u_init, model.theta0)
    if phi == 0.0:
        raise ValueError(f"u_init={u_init} carries no information about theta")
    y = model.measurement(u_init, model.theta0) + noise
    state = EstimatorState.fresh(model.sigma2)
    return update(state, u_init, y, regressor=phi)


def update(
    state: EstimatorState, u: float, y: float, regressor: Optional[float] = None
) -> EstimatorState:
    phi = u * u if regressor is None else regressor
    s_num = state.s_num + phi * y
    s_den = state.s_den + phi * phi
    theta_hat = s_num / s_den if s_den > 0 else state.theta_hat
    return replace(
        state,
        theta_hat=theta_hat,
        s_num=s_num,
        s_den=s_den,
        info=state.prior_info + s_den / state.sigma2,
    )


def estimate_variance_bound(state: EstimatorState) -> float:
    """Cramer-Rao bound ``1 / info`` on the variance of an unbiased estimate."""
    if not state.info > 0:
        raise ValueError("no information accumulated yet")
    return 1.0 / state.info
