import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from explore_regret.infofn import InformationEnsemble, gaussian_info, make_info, polynomial_info
from explore_regret.regret import regret_upper_bound
from explore_regret.scheduler import (
    BudgetExceeded,
    brute_force_verify,
    golden_section,
    immediate_condition,
    kkt_certificate,
    optimize_schedule,
)

families = st.sampled_from(["gaussian", "binary"])
u0s = st.floats(-2.5, 2.5, allow_nan=False)
i0s = st.floats(0.05, 10.0)
horizons = st.integers(2, 60)


def test_golden_section():
    x, fx, (a, b) = golden_section(lambda x: (x - 1.3) ** 2, 0.0, 4.0, tol=1e-10)
    assert x == pytest.approx(1.3, abs=1e-8) and a <= 1.3 <= b


def test_condition_examples():
    assert immediate_condition(gaussian_info(0.0), 1.0, 10) == (0.0, False)
    lhs, holds = immediate_condition(gaussian_info(-1.0), 1.0, 2)
    assert lhs == 1.5 and holds
    with pytest.raises(ValueError):
        immediate_condition(gaussian_info(-1.0), 1.0, 1)


def test_two_step_optimum_against_dense_grid():
    f = gaussian_info(-1.0)
    sol = optimize_schedule(f, 1.0, 2)
    assert sol.kind == "immediate" and sol.x1 > 0
    grid = np.linspace(0.0, 2.0, 100001)
    vals = 1.0 + 1.0 / (1.0 + f.eval(grid)) + grid
    assert sol.x1 == pytest.approx(grid[np.argmin(vals)], abs=2 * (grid[1] - grid[0]))
    assert sol.bound_value == pytest.approx(vals.min(), abs=1e-9)
    assert abs(sol.kkt_residuals[0]) < 1e-6


def test_weak_information_gives_lazy():
    eps = 1e-4
    f = polynomial_info([1.0, eps])
    T = 5
    sol = optimize_schedule(f, 10.0, T)
    assert sol.condition_lhs < 1
    assert sol.kind == "lazy" and sol.x1 == 0.0
    g0 = 1 / 10.0 + sum(1 / (10.0 + t * 1.0) for t in range(1, T))
    assert sol.bound_value == pytest.approx(g0, rel=1e-14)
    assert sol.kkt_residuals[0] == pytest.approx(1 - sol.condition_lhs, rel=1e-12)


@given(families, u0s, i0s, horizons)
def test_condition_forces_immediate(fam, u0, i0, T):
    f = make_info(fam, u0)
    sol = optimize_schedule(f, i0, T)
    if sol.condition_lhs > 1:
        assert sol.kind == "immediate"
    assert (sol.kind == "immediate") == (sol.x1 > 0)


@given(families, u0s, i0s, horizons)
def test_kkt_certificate_holds(fam, u0, i0, T):
    f = make_info(fam, u0)
    sol = optimize_schedule(f, i0, T)
    lam = sol.kkt_residuals
    assert lam.min() >= -1e-8
    assert abs(lam[0] * sol.x1) <= 1e-8
    assert sol.bound_value == pytest.approx(regret_upper_bound(f, i0, sol.schedule, T), rel=1e-12)


def test_kkt_matches_finite_differences():
    f = make_info("binary", -0.8)
    x = np.array([1.5, 0.4, 0.1, 0.05])
    lam = kkt_certificate(f, 1.0, x, 5)
    h = 1e-6
    for k in range(4):
        up, dn = x.copy(), x.copy()
        up[k] += h
        dn[k] -= h
        grad = (regret_upper_bound(f, 1.0, up, 5) - regret_upper_bound(f, 1.0, dn, 5)) / (2 * h)
        assert lam[k] == pytest.approx(grad, abs=1e-6)


@given(families, st.floats(-2.5, -0.05), i0s, st.integers(3, 30), st.floats(0, 10))
def test_multipliers_increase_along_immediate_schedules(fam, u0, i0, T, x1):
    x = np.zeros(T - 1)
    x[0] = x1
    lam = kkt_certificate(make_info(fam, u0), i0, x, T)
    assert np.all(np.diff(lam) > 0)


def test_brute_force_examples():
    f = gaussian_info(-1.0)
    res = brute_force_verify(f, 1.0, 3, [0, 0.5, 1, 2, 4])
    assert list(res.argmin) == [0.5, 0.0]
    assert res.evaluations == 25
    # oracle: explicit enumeration
    g = [0, 0.5, 1, 2, 4]
    vals = {(a, b): regret_upper_bound(f, 1.0, [a, b], 3) for a in g for b in g}
    best = min(vals, key=vals.get)
    assert best == (0.5, 0.0) and res.value == pytest.approx(vals[best], rel=1e-14)
    only = brute_force_verify(f, 1.0, 4, [0.0])
    assert list(only.argmin) == [0, 0, 0] and only.tail_zero
    with pytest.raises(ValueError):
        brute_force_verify(f, 1.0, 3, [0.5, 1.0])
    with pytest.raises(BudgetExceeded):
        brute_force_verify(f, 1.0, 5, np.linspace(0, 1, 101), budget=10**6)


@pytest.mark.parametrize("fam", ["gaussian", "binary"])
@pytest.mark.parametrize("u0", [-2.0, -1.0, -0.5, 0.0])
def test_four_step_structure(fam, u0):
    grid = np.concatenate([[0.0], np.logspace(-2, 1.5, 30)])
    f = make_info(fam, u0)
    res = brute_force_verify(f, 1.0, 5, grid)
    assert res.tail_zero and res.nonincreasing
    # the continuous optimum is no worse than the grid, and not much better
    assert -1e-12 <= res.gap
    cell = np.max(np.diff(grid))
    assert res.gap <= cell


def test_ensemble_structure():
    ens = InformationEnsemble("binary", [-0.3, -1.0, -2.2])
    grid = np.concatenate([[0.0], np.logspace(-2, 1.5, 30)])
    res = brute_force_verify(ens, 1.0, 4, grid)
    assert res.tail_zero and res.nonincreasing and res.gap >= -1e-12
    lhs, _ = immediate_condition(ens, 1.0, 4)
    members = [immediate_condition(ens.member(k), 1.0, 4)[0] for k in range(3)]
    assert lhs == pytest.approx(np.mean(members), rel=1e-14)
    sol = optimize_schedule(ens, 1.0, 4)
    assert sol.kkt_residuals.min() >= -1e-8


def test_more_prior_information_means_less_exploration():
    # observed monotonicity for the shipped quartic family (not guaranteed in general)
    for fam in ("gaussian", "binary"):
        x1 = [optimize_schedule(make_info(fam, -1.0), i0, 20).x1 for i0 in (0.25, 0.5, 1, 2, 4)]
        assert all(a >= b for a, b in zip(x1, x1[1:]))
