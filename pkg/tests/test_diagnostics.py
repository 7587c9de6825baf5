import numpy as np
import pytest

from plqalm.diagnostics import (
    DiagnosticError,
    aug_epi_d2,
    check_kkt,
    fit_error_bound_constant,
    growth_probe,
    sosc_form,
    sosc_probe,
)
from plqalm.problems import BUILTIN_IDS, builtin, load_problem

from problems_util import ZERO_G


def strongly_convex():
    return load_problem({
        "n": 2, "m": 2,
        "phi": {"Q": [[2.0, 0.5], [0.5, 1.0]]},
        "Phi": [{"a": [1.0, 0.0]}, {"a": [0.0, 1.0]}],
        "g": ZERO_G,
    })


def test_check_kkt_examples():
    p = builtin("lasso1d")
    assert check_kkt(p, [2.0], [1.0], tol=1e-8)
    assert not check_kkt(p, [2.0], [0.5])
    assert check_kkt(strongly_convex(), [0.0, 0.0], [0.0, 0.0])


@pytest.mark.parametrize("pid", BUILTIN_IDS)
def test_builtin_solutions_verify(pid):
    p = builtin(pid)
    assert check_kkt(p, p.known_solution.x, p.known_solution.lam, tol=1e-8)


def test_sosc_examples():
    d = builtin("degen2d")
    rep = sosc_probe(d, [0.0, 0.0], [0.5, 0.5])
    assert rep.verdict == "holds" and rep.min_value_estimate == pytest.approx(2.0)
    f = builtin("sosc_fail")
    rep = sosc_probe(f, [0.0], [0.0])
    assert rep.verdict == "fails"
    np.testing.assert_allclose(rep.witness, [-1.0])
    assert rep.min_value_estimate == pytest.approx(-2.0)
    assert sosc_probe(strongly_convex(), [0.0, 0.0], [0.0, 0.0]).verdict == "holds"


def test_sosc_is_deterministic():
    d = builtin("degen2d")
    assert sosc_probe(d, [0.0, 0.0], [0.5, 0.5], seed=3) == sosc_probe(d, [0.0, 0.0], [0.5, 0.5], seed=3)


def test_sosc_requires_kkt():
    with pytest.raises(DiagnosticError):
        sosc_probe(builtin("lasso1d"), [2.0], [0.5])


def test_aug_epi_examples():
    d = builtin("degen2d")
    for rho in (1.0, 10.0, 100.0):
        assert aug_epi_d2(d, [0.0, 0.0], [0.5, 0.5], rho, [1.0, 0.0]) == pytest.approx(2.0)
        assert aug_epi_d2(d, [0.0, 0.0], [0.5, 0.5], rho, [0.0, 1.0]) == pytest.approx(2.0 * rho)
    s = strongly_convex()
    w = np.array([0.3, -1.2])
    assert aug_epi_d2(s, [0.0, 0.0], [0.0, 0.0], 5.0, w) == pytest.approx(w @ np.array([[2.0, 0.5], [0.5, 1.0]]) @ w)


@pytest.mark.parametrize("pid", [i for i in BUILTIN_IDS])
def test_aug_epi_monotone_bounded_and_homogeneous(pid):
    p = builtin(pid)
    x, lam = p.known_solution.x, p.known_solution.lam
    rng = np.random.default_rng(5)
    for _ in range(10):
        w = rng.standard_normal(p.n)
        vals = [aug_epi_d2(p, x, lam, rho, w) for rho in (1.0, 10.0, 100.0, 1000.0)]
        assert all(a <= b + 1e-9 * (1 + abs(b)) for a, b in zip(vals, vals[1:]))
        upper = sosc_form(p, x, lam, w)
        if np.isfinite(upper):
            assert vals[-1] <= upper + 1e-9
        assert aug_epi_d2(p, x, lam, 10.0, 2.5 * w) == pytest.approx(6.25 * vals[1], rel=1e-9, abs=1e-12)


def test_growth_examples():
    rep = growth_probe(builtin("lasso1d"), [2.0], [1.0], rho=10.0, gamma=0.1)
    assert rep.violations == 0 and rep.ell_hat > 0 and rep.verdict
    d = builtin("degen2d")
    rep = growth_probe(d, [0.0, 0.0], [0.52, 0.48], rho=100.0, gamma=0.05)
    assert rep.violations == 0
    f = builtin("sosc_fail")
    for rho in (10.0, 1e3):
        assert growth_probe(f, [0.0], [0.0], rho=rho, gamma=0.05).violations > 0


@pytest.mark.parametrize("pid", [i for i in BUILTIN_IDS])
def test_sosc_implies_growth(pid):
    p = builtin(pid)
    x, lam = p.known_solution.x, p.known_solution.lam
    if sosc_probe(p, x, lam, samples=128).verdict == "holds":
        assert growth_probe(p, x, lam, rho=100.0, gamma=0.05, samples=200).violations == 0


def test_error_bound_examples():
    for pid in ("lasso1d", "degen2d"):
        p = builtin(pid)
        kappa = fit_error_bound_constant(p, p.known_solution.x, p.known_solution.lam)
        assert 0 < kappa <= 1e3


def test_error_bound_all_degenerate():
    p = builtin("lasso1d")
    with pytest.raises(DiagnosticError, match="degenerate"):
        fit_error_bound_constant(p, [2.0], [1.0], radius=0.0, samples=5)
