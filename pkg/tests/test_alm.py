import numpy as np
import pytest

from plqalm.alm import (
    CSV_HEADER,
    AlmConfig,
    Fixed,
    Geometric,
    VRule,
    alm_solve,
    estimate_qfactor,
    inner_tolerance,
    penalty_update,
    update_multiplier,
    v_value,
)
from plqalm.lagrangian import InfeasiblePointError, PrimalDualPoint, kkt_residual
from plqalm.problems import builtin

from problems_util import half_norm_problem

STARTS = {
    "lasso1d": ([0.0], [0.0]),
    "degen2d": ([1.0, 1.0], [0.0, 0.0]),
    "minimax1d": ([0.0], [0.0, 0.0]),
    "affine_l1": ([1.0, 0.0], [0.0, 0.0]),
    "elq1": ([0.0, 0.0], [0.0, 0.0]),
}


def test_update_multiplier_examples():
    ind = half_norm_problem(g={"kind": "orthant", "s": 2, "m": 2})
    x, lam = np.array([0.5, -1.0]), np.array([1.0, 2.0])
    np.testing.assert_allclose(update_multiplier(ind, x, lam, 3.0), lam + 3.0 * x)
    np.testing.assert_allclose(update_multiplier(builtin("lasso1d"), [2.0], [1.0], 1.0), [1.0])
    np.testing.assert_allclose(update_multiplier(half_norm_problem(), x, lam, 3.0), [0.0, 0.0])


def test_v_value_examples():
    p = builtin("lasso1d")
    assert v_value(p, [2.0], [1.0], 5.0) == pytest.approx(0.0)
    # gap term |3 - prox(3)| = 1 plus the augmented gradient (3 - 3) + 1 * (3 - prox(3)) = 1
    assert v_value(p, [3.0], [0.0], 1.0) == pytest.approx(2.0)
    z = half_norm_problem()
    # g = 0: the exact subproblem minimizer is x = 0 and only the gap ||lam|| / rho remains
    assert v_value(z, [0.0, 0.0], [4.0, 5.0], 2.0) == pytest.approx(np.linalg.norm([2.0, 2.5]))


def test_penalty_update_examples():
    rule = VRule(0.5, 10.0)
    assert penalty_update(rule, 100.0, 0.05, 0.2, 3) == 100.0
    assert penalty_update(rule, 100.0, 0.15, 0.2, 3) == 1000.0
    assert penalty_update(rule, 100.0, 99.0, None, 0) == 100.0
    assert penalty_update(Fixed(), 7.0, 1.0, 0.1, 4) == 7.0
    assert penalty_update(Geometric(2.0), 7.0, 1.0, 0.1, 4) == 14.0


def test_penalty_rule_validation():
    with pytest.raises(ValueError):
        VRule(theta_v=1.5)
    with pytest.raises(ValueError):
        Geometric(1.0)
    with pytest.raises(ValueError):
        AlmConfig(tol_exponent=1.0)


def test_qfactor_examples():
    q, sl = estimate_qfactor([1, 0.5, 0.25, 0.125])
    assert q == pytest.approx(0.5) and sl is False
    assert estimate_qfactor([1, 0.5, 0.05, 0.0005])[1] is True
    assert estimate_qfactor([1, 1e-16, 0])[0] == 0.0
    with pytest.raises(ValueError):
        estimate_qfactor([1, 0.5])


def test_inner_tolerance_cap():
    cfg = AlmConfig()
    assert inner_tolerance(1e-4, cfg) == pytest.approx(1e-6)
    assert inner_tolerance(4.0, cfg) == pytest.approx(0.4)
    assert inner_tolerance(4.0, AlmConfig(eps_cap=None)) == pytest.approx(8.0)


def test_lasso_converges():
    rep = alm_solve(builtin("lasso1d"), PrimalDualPoint([0.0], [0.0]), AlmConfig(rho0=10.0))
    assert rep.status == "kkt_reached"
    np.testing.assert_allclose(rep.x, [2.0], atol=1e-8)
    np.testing.assert_allclose(rep.lam, [1.0], atol=1e-8)
    assert rep.final_residual <= 1e-9


def test_exact_start_stops_immediately():
    rep = alm_solve(builtin("lasso1d"), PrimalDualPoint([2.0], [1.0]))
    assert len(rep.records) == 1 and rep.records[0].inner_iters == 0


def test_infeasible_start_rejected():
    with pytest.raises(InfeasiblePointError):
        alm_solve(builtin("affine_l1"), PrimalDualPoint([0.0, 0.0], [0.0, 0.0]))


def test_degenerate_multipliers_converge_to_segment():
    p = builtin("degen2d")
    rep = alm_solve(p, PrimalDualPoint([1.0, 1.0], [0.0, 0.0]), AlmConfig(rho0=100.0))
    np.testing.assert_allclose(rep.x, [0.0, 0.0], atol=1e-8)
    assert rep.multiplier_distance <= 1e-8
    assert np.all(rep.lam >= -1e-9) and rep.lam.sum() == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("pid", sorted(STARTS))
@pytest.mark.parametrize("rule", [Fixed(), Geometric(2.0), VRule()])
def test_builtins_converge_with_v_above_r(pid, rule):
    p = builtin(pid)
    seen = []

    def check(k, x_next, lam, lam_next, rho):
        seen.append(v_value(p, x_next, lam, rho) >= kkt_residual(p, x_next, lam_next) - 1e-9)
        assert p.theta.violation(x_next) <= 1e-8

    rep = alm_solve(p, PrimalDualPoint(*STARTS[pid]), AlmConfig(penalty_rule=rule), callback=check)
    assert rep.status == "kkt_reached"
    assert all(seen)


def test_csv_is_deterministic_and_well_formed():
    p = builtin("degen2d")
    cfg = AlmConfig(rho0=100.0)
    a = alm_solve(p, PrimalDualPoint([1.0, 1.0], [0.0, 0.0]), cfg).to_csv()
    b = alm_solve(p, PrimalDualPoint([1.0, 1.0], [0.0, 0.0]), cfg).to_csv()
    assert a == b
    lines = a.strip().split("\n")
    assert lines[0].split(",") == CSV_HEADER
    last = lines[-1].split(",")
    assert last[CSV_HEADER.index("V")] == ""
    float(lines[1].split(",")[CSV_HEADER.index("R")])
