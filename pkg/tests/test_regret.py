import numpy as np
import pytest
from hypothesis import given, strategies as st

from explore_regret.infofn import InformationEnsemble, gaussian_info, make_info
from explore_regret.model import quadratic_example
from explore_regret.regret import (
    ExplorationSchedule,
    empirical_regret,
    regret_approx,
    regret_upper_bound,
)

instances = st.tuples(
    st.sampled_from(["gaussian", "binary"]),
    st.floats(-2.5, 2.5, allow_nan=False),
    st.floats(0.1, 5.0),
    st.lists(st.floats(0.0, 10.0), min_size=1, max_size=12),
)


def test_bound_examples():
    f = gaussian_info(-1.0)
    assert regret_upper_bound(f, 1.0, [0.0], 2) == 1.5
    assert regret_upper_bound(f, 1.0, [1.0], 2) == pytest.approx(1 + 1 / 11 + 1)


def test_final_variance_is_pure_cost():
    f = gaussian_info(-1.0)
    x = [0.7, 0.2, 0.0]
    base = regret_upper_bound(f, 1.0, x, 4)
    for xT in (0.5, 3.0):
        assert regret_upper_bound(f, 1.0, x + [xT], 4) == pytest.approx(base + xT)


def test_approx_examples():
    assert regret_approx("gaussian", -1.0, 1.0, [0.0], 2) == pytest.approx(1 + 1 / 11)
    assert regret_approx("gaussian", -1.0, 1.0, np.zeros(9), 10) > 0


def _approx_oracle(fam, u0, i0, x):
    # plain recursion on the unscaled information (J = -1, sigma2 = 1)
    m4 = 3.0 if fam == "gaussian" else 1.0
    info, total = i0, 1.0 / i0
    for xt in x:
        a = 1.0 / info
        info += m4 * xt * xt + 6 * (u0 * u0 + a) * xt + u0**4 + 6 * u0 * u0 * a + 3 * a * a
        total += 1.0 / info
    return total + sum(x)


@given(instances)
def test_approx_below_bound(inst):
    fam, u0, i0, x = inst
    T = len(x) + 1
    ra = regret_approx(fam, u0, i0, x, T)
    rb = regret_upper_bound(make_info(fam, u0), i0, x, T)
    assert ra == pytest.approx(_approx_oracle(fam, u0, i0, x), rel=1e-12)
    assert ra < rb


@given(instances, st.data())
def test_swap_towards_descending_never_hurts(inst, data):
    fam, u0, i0, x = inst
    if len(x) < 2:
        return
    j = data.draw(st.integers(0, len(x) - 2))
    x = list(x)
    if x[j] >= x[j + 1]:
        x[j], x[j + 1] = x[j + 1], x[j]
    f = make_info(fam, u0)
    T = len(x) + 1
    swapped = x.copy()
    swapped[j], swapped[j + 1] = x[j + 1], x[j]
    assert regret_upper_bound(f, i0, swapped, T) <= regret_upper_bound(f, i0, x, T) + 1e-12


def test_ensemble_bound_is_member_mean():
    ens = InformationEnsemble("gaussian", [-0.5, -1.0, -2.0])
    x = [1.0, 0.5, 0.0, 0.0]
    members = [regret_upper_bound(ens.member(k), 1.0, x, 5) for k in range(3)]
    assert regret_upper_bound(ens, 1.0, x, 5) == pytest.approx(np.mean(members), rel=1e-14)


def test_schedules():
    assert np.array_equal(ExplorationSchedule.lazy(3).variances, np.zeros(3))
    s = ExplorationSchedule.immediate(4, 2.5, "binary")
    assert list(s.variances) == [2.5, 0, 0, 0] and s.family == "binary"
    d = ExplorationSchedule.decaying(4, 1.0, -1.0)
    assert np.allclose(d.variances, [1, 1 / 2, 1 / 3, 1 / 4])
    with pytest.raises(ValueError):
        ExplorationSchedule.decaying(4, 1.0, 0.0)
    with pytest.raises(ValueError):
        ExplorationSchedule.decaying(4, -1.0, -1.0)
    with pytest.raises(ValueError):
        ExplorationSchedule(np.array([1.0, -0.1]))
    with pytest.raises(ValueError):
        s.variances[0] = 1.0


def test_empirical_examples():
    m = quadratic_example(0.4)
    assert empirical_regret(np.full((1, 5), m.u0_star), m).empirical == 0.0
    u = np.full((1, 5), m.u0_star)
    u[0, 0] += 1.0
    rep = empirical_regret(u, m)
    assert rep.empirical == pytest.approx(1.0)
    assert rep.trajectory.shape == (5,)


def test_bound_input_checks():
    f = gaussian_info(-1.0)
    with pytest.raises(ValueError):
        regret_upper_bound(f, 0.0, [0.0], 2)
    with pytest.raises(ValueError):
        regret_upper_bound(f, 1.0, [0.0, 0.0, 0.0], 2)
