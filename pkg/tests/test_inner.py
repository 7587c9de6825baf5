import numpy as np
import pytest

from plqalm.inner import InnerConfig, solve_subproblem
from plqalm.lagrangian import InfeasiblePointError, auglag_grad_x, dist_to_range_Bstar
from plqalm.problems import BUILTIN_IDS, builtin

from problems_util import half_norm_problem

LINE = {"B": [[1.0, 1.0]], "b": [1.0]}


def test_reduced_quadratic_example():
    p = half_norm_problem(theta=LINE)
    res = solve_subproblem(p, np.array([0.3, -0.1]), 5.0, np.array([1.0, 0.0]), 1e-10)
    assert res.converged
    np.testing.assert_allclose(res.x, [0.5, 0.5], atol=1e-9)
    assert res.stationarity <= 1e-10


def test_already_stationary_start_returns_immediately():
    p = half_norm_problem(theta=LINE)
    res = solve_subproblem(p, np.zeros(2), 1.0, np.array([0.5, 0.5]), 1e-8)
    assert res.iters == 0 and res.converged
    np.testing.assert_array_equal(res.x, [0.5, 0.5])


def test_min_iters_forces_a_step():
    p = builtin("lasso1d")
    res = solve_subproblem(p, np.zeros(1), 10.0, np.zeros(1), 100.0, min_iters=1)
    assert res.iters >= 1


def test_infeasible_start_rejected():
    p = half_norm_problem(theta=LINE)
    with pytest.raises(InfeasiblePointError):
        solve_subproblem(p, np.zeros(2), 1.0, np.zeros(2), 1e-8)
    with pytest.raises(ValueError):
        solve_subproblem(p, np.zeros(2), 1.0, np.array([1.0, 0.0]), 0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        InnerConfig(backtrack_factor=1.5)
    with pytest.raises(ValueError):
        InnerConfig(memory=0)


@pytest.mark.parametrize("pid", [i for i in BUILTIN_IDS if i != "sosc_fail"])
def test_descent_feasibility_and_stationarity(pid):
    p = builtin(pid)
    rng = np.random.default_rng(3)
    for _ in range(5):
        x0 = p.theta.witness + p.theta.Z @ rng.standard_normal(p.theta.Z.shape[1])
        lam = rng.standard_normal(p.m)
        rho = float(rng.uniform(1, 100))
        res = solve_subproblem(p, lam, rho, x0, 1e-8)
        assert res.converged
        assert np.all(np.diff(res.values) <= 1e-12 * (1 + np.abs(res.values[:-1])))
        assert p.theta.violation(res.x) <= 1e-8
        assert dist_to_range_Bstar(p.theta, auglag_grad_x(p, res.x, lam, rho)) <= 1e-8


def test_stationarity_convention_matches_distance():
    p = builtin("affine_l1")
    Z = p.theta.Z
    rng = np.random.default_rng(0)
    for _ in range(50):
        v = rng.standard_normal(2)
        assert abs(np.linalg.norm(Z.T @ v) - dist_to_range_Bstar(p.theta, v)) <= 1e-12
