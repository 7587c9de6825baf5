"""Outer augmented Lagrangian loop with residual-driven inner tolerances."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .inner import InnerConfig, solve_subproblem
from .lagrangian import (
    CompositeProblem,
    PrimalDualPoint,
    auglag_grad_x,
    dist_to_range_Bstar,
    kkt_residual,
    multiplier_set,
    multiplier_set_distance,
)
from .prox import moreau_env_grad, prox

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Fixed:
    name = "fixed"


@dataclass(frozen=True)
class Geometric:
    factor: float = 10.0
    name = "geometric"

    def __post_init__(self):
        if not self.factor > 1:
            raise ValueError("geometric factor must exceed 1")


@dataclass(frozen=True)
class VRule:
    """Keep rho while ``V`` drops by ``theta_v``; otherwise multiply by ``factor``."""

    theta_v: float = 0.5
    factor: float = 10.0
    name = "vrule"

    def __post_init__(self):
        if not 0 < self.theta_v < 1:
            raise ValueError("theta_v must lie in (0, 1)")
        if not self.factor > 1:
            raise ValueError("factor must exceed 1")


PenaltyRule = Union[Fixed, Geometric, VRule]


@dataclass(frozen=True)
class AlmConfig:
    rho0: float = 10.0
    penalty_rule: PenaltyRule = Fixed()
    tol_exponent: float = 1.5
    stop_tol: float = 1e-9
    max_outer: int = 200
    inner: InnerConfig = InnerConfig()
    # eps_k = min(R_k**tol_exponent, eps_cap * R_k); the cap only binds while R_k is large
    eps_cap: Optional[float] = 0.1

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not self.tol_exponent > 1:
            raise ValueError("tol_exponent must exceed 1")
        if not self.stop_tol > 0 or self.max_outer < 1:
            raise ValueError("stop_tol must be positive and max_outer >= 1")


@dataclass
class IterationRecord:
    k: int
    rho: float
    R: float
    eps: float
    inner_iters: int
    step_norm: float
    dual_step_norm: float
    V: float
    dist_to_solution: Optional[float] = None


CSV_HEADER = ["k", "rho", "R", "eps", "inner_iters", "step_norm", "dual_step_norm", "V", "dist_to_solution"]


@dataclass
class RunReport:
    records: list
    x: np.ndarray
    lam: np.ndarray
    status: str  # "kkt_reached" | "max_outer" | "inner_failure"
    iterates: list = field(repr=False, default_factory=list)
    q_factor: Optional[float] = None
    superlinear: Optional[bool] = None
    kappa_hat: Optional[float] = None
    multiplier_distance: Optional[float] = None

    @property
    def final_residual(self) -> float:
        return self.records[-1].R

    def to_csv(self) -> str:
        buf = io.StringIO()
        write_csv(self.records, buf)
        return buf.getvalue()


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17e}"


def write_csv(records: Sequence[IterationRecord], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])


def update_multiplier(p: CompositeProblem, x_next, lam, rho: float) -> np.ndarray:
    """``lam+ = grad e_{1/rho} g(Phi(x_next) + lam / rho)``."""
    return moreau_env_grad(p.g, p.smooth.Phi(np.asarray(x_next, float)) + np.asarray(lam, float) / rho, rho)


def v_value(p: CompositeProblem, x_next, lam, rho: float) -> float:
    """``dist(-grad_x L(x, lam, rho), rge B^T) + ||Phi(x) - prox_{g/rho}(Phi(x) + lam/rho)||``."""
    x_next, lam = np.asarray(x_next, float), np.asarray(lam, float)
    if not p.theta.contains(x_next):
        from .lagrangian import InfeasiblePointError

        raise InfeasiblePointError("V is only defined on Theta")
    Phix = p.smooth.Phi(x_next)
    gap = Phix - prox(p.g, Phix + lam / rho, 1.0 / rho)
    return dist_to_range_Bstar(p.theta, auglag_grad_x(p, x_next, lam, rho)) + float(np.linalg.norm(gap))


def penalty_update(rule: PenaltyRule, rho: float, V_new: float, V_old: float | None, k: int) -> float:
    if isinstance(rule, Fixed):
        return rho
    if isinstance(rule, Geometric):
        return rule.factor * rho
    if isinstance(rule, VRule):
        if k == 0 or (V_old is not None and V_new <= rule.theta_v * V_old):
            return rho
        return rule.factor * rho
    raise TypeError(f"unknown penalty rule {rule!r}")


def estimate_qfactor(errors: Sequence[float]) -> tuple[float, bool]:
    """Tail Q-factor and a superlinearity flag from an error sequence.

    ``q`` is the largest of the last five consecutive ratios. The sequence is
    flagged superlinear when the last (up to) four ratios decrease strictly and
    the final one is at most half the first of them. A sequence that reaches
    zero is treated as finite termination: ``q = 0`` and superlinear.
    """
    e = np.asarray(errors, float)
    if e.size < 3:
        raise ValueError("need at least 3 error values")
    if np.any(e < 0):
        raise ValueError("errors must be nonnegative")
    if np.any(e == 0):
        return 0.0, True
    ratios = e[1:] / e[:-1]
    q = float(ratios[-5:].max())
    tail = ratios[-4:]
    superlinear = bool(np.all(np.diff(tail) < 0) and tail[-1] <= 0.5 * tail[0])
    return q, superlinear


def inner_tolerance(R: float, cfg: AlmConfig) -> float:
    eps = R ** cfg.tol_exponent
    if cfg.eps_cap is not None:
        eps = min(eps, cfg.eps_cap * R)
    return eps


def kappa_consecutive(records: Sequence[IterationRecord]) -> float:
    """``max_k (||x^{k+1}-x^k|| + ||lam^{k+1}-lam^k||) / R_k`` over the steps taken."""
    ratios = [(r.step_norm + r.dual_step_norm) / r.R for r in records if r.inner_iters is not None
              and not math.isnan(r.V) and r.R > 0]
    return max(ratios) if ratios else 0.0


def alm_solve(p: CompositeProblem, start: PrimalDualPoint, cfg: AlmConfig = AlmConfig(),
              callback=None) -> RunReport:
    """Run the inexact ALM from ``start``.

    ``callback(k, x_next, lam, lam_next, rho)`` is invoked after every
    multiplier update (used by tests to audit the iteration).
    """
    x = np.asarray(start.x, float).copy()
    lam = np.asarray(start.lam, float).copy()
    if not p.theta.contains(x):
        from .lagrangian import InfeasiblePointError

        raise InfeasiblePointError("the starting point must satisfy Bx = b")
    rho = float(cfg.rho0)
    known = p.known_solution
    Lam = None
    if known is not None:
        Lam = known.multiplier_set
        if Lam is None and p.g.plq_view is not None:
            try:
                Lam = multiplier_set(p, known.x)
            except Exception:  # noqa: BLE001 - diagnostics only
                Lam = None

    def dist_sol(xk, lk):
        if known is None:
            return None
        d = float(np.linalg.norm(xk - known.x))
        if Lam is not None:
            d += multiplier_set_distance(p, known.x, lk, Lam)
        elif known.lam is not None:
            d += float(np.linalg.norm(lk - known.lam))
        return d

    records: list[IterationRecord] = []
    iterates = [(x.copy(), lam.copy())]
    V_old = None
    status = "max_outer"
    for k in range(cfg.max_outer + 1):
        R = kkt_residual(p, x, lam)
        eps = inner_tolerance(R, cfg)
        if R <= cfg.stop_tol or k == cfg.max_outer:
            records.append(IterationRecord(k, rho, R, eps, 0, 0.0, 0.0, math.nan, dist_sol(x, lam)))
            if R <= cfg.stop_tol:
                status = "kkt_reached"
            break
        res = solve_subproblem(p, lam, rho, x, eps, cfg.inner, min_iters=1)
        if not res.converged and res.stationarity > eps:
            log.warning("inner solve at k=%d ended with %s (stationarity %.3e > %.3e)",
                        k, res.status, res.stationarity, eps)
            records.append(IterationRecord(k, rho, R, eps, res.iters, 0.0, 0.0, math.nan, dist_sol(x, lam)))
            status = "inner_failure"
            break
        x_next = res.x
        lam_next = update_multiplier(p, x_next, lam, rho)
        V_new = v_value(p, x_next, lam, rho)
        if callback is not None:
            callback(k, x_next, lam, lam_next, rho)
        records.append(IterationRecord(
            k, rho, R, eps, res.iters,
            float(np.linalg.norm(x_next - x)), float(np.linalg.norm(lam_next - lam)),
            V_new, dist_sol(x, lam),
        ))
        rho = penalty_update(cfg.penalty_rule, rho, V_new, V_old, k)
        V_old = V_new
        x, lam = x_next, lam_next
        iterates.append((x.copy(), lam.copy()))

    report = RunReport(records, x, lam, status, iterates)
    report.kappa_hat = kappa_consecutive(records)
    if known is not None:
        if Lam is not None:
            report.multiplier_distance = multiplier_set_distance(p, known.x, lam, Lam)
        errs = [float(np.linalg.norm(np.concatenate([xk - x, lk - lam]))) for xk, lk in iterates[:-1]]
        if len(errs) >= 3:
            report.q_factor, report.superlinear = estimate_qfactor(errs)
    return report
