"""Inner solver for the ALM subproblem ``min L(x, lam, rho)`` over ``Bx = b``.

The affine constraint is eliminated with an orthonormal kernel basis ``Z``:
``x = x0 + Z y``. The reduced problem is unconstrained and solved by L-BFGS
with Armijo backtracking. Stationarity is ``||Z^T grad_x L||``, which equals
``dist(-grad_x L, rge B^T)``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .lagrangian import CompositeProblem, InfeasiblePointError, auglag_value_and_grad, kernel_basis

__all__ = ["InnerConfig", "InnerResult", "kernel_basis", "solve_subproblem"]

_EPS = np.finfo(float).eps
_MAX_BACKTRACKS = 80


@dataclass(frozen=True)
class InnerConfig:
    max_iters: int = 5000
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    init_step: float = 1.0
    memory: int = 10
    grad_tol_floor: float = 1e-12

    def __post_init__(self):
        if min(self.max_iters, self.armijo_c, self.init_step, self.memory, self.grad_tol_floor) <= 0:
            raise ValueError("inner solver settings must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")


@dataclass
class InnerResult:
    x: np.ndarray
    stationarity: float
    iters: int
    status: str  # "converged" | "iteration_cap" | "stall"
    values: list

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _two_loop(grad, S, Y):
    q = grad.copy()
    alphas = []
    for s, y in reversed(list(zip(S, Y))):
        a = (s @ q) / (y @ s)
        alphas.append(a)
        q -= a * y
    s, y = S[-1], Y[-1]
    q *= (s @ y) / (y @ y)
    for (s, y), a in zip(zip(S, Y), reversed(alphas)):
        b = (y @ q) / (y @ s)
        q += (a - b) * s
    return -q


def solve_subproblem(p: CompositeProblem, lam, rho: float, x_init, eps: float,
                     cfg: InnerConfig = InnerConfig(), min_iters: int = 0) -> InnerResult:
    """Find ``x`` in Theta with ``||Z^T grad_x L(x, lam, rho)|| <= eps``.

    ``min_iters`` forces that many accepted steps (unless the reduced gradient
    vanishes), which keeps the outer loop moving when ``eps`` is loose.
    """
    if not p.theta.contains(x_init):
        raise InfeasiblePointError("x_init must satisfy Bx = b")
    if not eps > 0:
        raise ValueError("eps must be positive")
    lam = np.asarray(lam, float)
    Z = p.theta.Z
    x = np.asarray(x_init, float).copy()
    target = max(eps, cfg.grad_tol_floor)

    f, gx = auglag_value_and_grad(p, x, lam, rho)
    gr = Z.T @ gx
    stat = float(np.linalg.norm(gr))
    values = [f]
    if (stat <= target and min_iters == 0) or stat == 0.0 or Z.shape[1] == 0:
        return InnerResult(x, stat, 0, "converged", values)

    S: deque = deque(maxlen=cfg.memory)
    Y: deque = deque(maxlen=cfg.memory)
    for it in range(1, cfg.max_iters + 1):
        d = _two_loop(gr, S, Y) if S else -gr
        slope = d @ gr
        if not slope <= -1e-12 * np.linalg.norm(d) * np.linalg.norm(gr):
            S.clear()
            Y.clear()
            d = -gr
            slope = d @ gr
        t = cfg.init_step if S else min(cfg.init_step, 1.0 / np.linalg.norm(gr))
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            x_new = x + Z @ (t * d)
            if np.array_equal(x_new, x):
                break
            f_new, gx_new = auglag_value_and_grad(p, x_new, lam, rho)
            gr_new = Z.T @ gx_new
            if f_new <= f + cfg.armijo_c * t * slope:
                accepted = True
            elif (cfg.armijo_c * t * abs(slope) <= 64 * _EPS * (1.0 + abs(f))
                  and np.linalg.norm(gr_new) < np.linalg.norm(gr)):
                # decrease is below the resolution of f; fall back to a gradient test
                accepted = True
            if accepted:
                break
            t *= cfg.backtrack_factor
        if not accepted:
            return InnerResult(x, stat, it - 1, "stall", values)
        s_vec, y_vec = t * d, gr_new - gr
        if s_vec @ y_vec > 1e-12 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
            S.append(s_vec)
            Y.append(y_vec)
        x, f, gr = x_new, f_new, gr_new
        values.append(f)
        stat = float(np.linalg.norm(gr))
        if stat <= target and it >= min_iters:
            return InnerResult(x, stat, it, "converged", values)
    return InnerResult(x, stat, cfg.max_iters, "iteration_cap", values)
