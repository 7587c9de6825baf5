"""Composite problem model, (augmented) Lagrangian and KKT residuals.

The problem is ``minimize phi(x) + g(Phi(x))`` subject to ``B x = b``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .plq import InfeasibleError, Polyhedron, polyhedron_project, subdifferential_polyhedron
from .prox import OuterFunction, moreau_env_grad, moreau_env_value, prox

#: tolerance on ||Bx - b|| for a point to count as feasible
FEAS_TOL = 1e-8


class InfeasiblePointError(ValueError):
    pass


@dataclass(frozen=True)
class SmoothOracle:
    """Callables for ``phi`` and ``Phi`` and their derivatives.

    ``hess_Phi_contract(x, mu)`` returns ``sum_i mu_i * Hess(Phi_i)(x)``.
    """

    phi: Callable[[np.ndarray], float]
    grad_phi: Callable[[np.ndarray], np.ndarray]
    hess_phi: Callable[[np.ndarray], np.ndarray]
    Phi: Callable[[np.ndarray], np.ndarray]
    jac_Phi: Callable[[np.ndarray], np.ndarray]
    hess_Phi_contract: Callable[[np.ndarray, np.ndarray], np.ndarray]


def kernel_basis(B, n: int | None = None) -> np.ndarray:
    """Orthonormal basis of ``ker B`` as the columns of an ``n x k`` matrix.

    Uses an SVD with rank tolerance ``1e-10 * ||B||``.
    """
    B = np.asarray(B, float)
    if B.size == 0:
        if n is None:
            n = B.shape[1] if B.ndim == 2 else 0
        return np.eye(n)
    B = np.atleast_2d(B)
    _, s, vt = np.linalg.svd(B)
    rank = int(np.sum(s > 1e-10 * s.max())) if s.size else 0
    return vt[rank:].T.copy()


@dataclass(frozen=True, eq=False)
class AffineSet:
    """``Theta = {x : B x = b}``; an empty ``B`` means the whole space."""

    B: np.ndarray
    b: np.ndarray
    n: int = None

    def __post_init__(self):
        B = np.asarray(self.B, float)
        n = self.n if self.n is not None else (B.shape[1] if B.ndim == 2 else None)
        if n is None:
            raise ValueError("cannot infer n from an empty B")
        B = B.reshape(-1, n) if B.size else np.zeros((0, n))
        b = np.asarray(self.b, float).reshape(-1)
        if b.size != B.shape[0]:
            raise ValueError("b must have one entry per row of B")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "n", n)
        w = self.witness
        if np.linalg.norm(B @ w - b) > 1e-10 * (1 + np.linalg.norm(b)):
            raise ValueError("affine constraint Bx = b is inconsistent")

    @classmethod
    def whole_space(cls, n: int) -> "AffineSet":
        return cls(np.zeros((0, n)), np.zeros(0), n)

    @property
    def s(self) -> int:
        return self.B.shape[0]

    @cached_property
    def witness(self) -> np.ndarray:
        if not self.s:
            return np.zeros(self.n)
        x, *_ = np.linalg.lstsq(self.B, self.b, rcond=None)
        return x

    @cached_property
    def Z(self) -> np.ndarray:
        return kernel_basis(self.B, self.n)

    def violation(self, x) -> float:
        if not self.s:
            return 0.0
        return float(np.linalg.norm(self.B @ x - self.b))

    def contains(self, x, tol: float = FEAS_TOL) -> bool:
        return self.violation(x) <= tol


@dataclass(frozen=True)
class KnownSolution:
    """Reference solution: ``x`` plus optionally a reference multiplier and the set Λ(x)."""

    x: np.ndarray
    lam: Optional[np.ndarray] = None
    multiplier_set: Optional[Polyhedron] = None


@dataclass(frozen=True, eq=False)
class CompositeProblem:
    smooth: SmoothOracle
    g: OuterFunction
    theta: AffineSet
    n: int
    m: int
    known_solution: Optional[KnownSolution] = None
    name: str = ""

    def __post_init__(self):
        if self.g.dim != self.m:
            raise ValueError(f"g has dimension {self.g.dim}, expected m = {self.m}")
        if self.theta.n != self.n:
            raise ValueError(f"B has {self.theta.n} columns, expected n = {self.n}")

    @property
    def s(self) -> int:
        return self.theta.s

    def objective(self, x) -> float:
        x = np.asarray(x, float)
        return float(self.smooth.phi(x) + self.g.value(self.smooth.Phi(x)))


@dataclass
class PrimalDualPoint:
    x: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, float).reshape(-1)
        self.lam = np.asarray(self.lam, float).reshape(-1)
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.lam))):
            raise ValueError("primal-dual point must be finite")


def lagrangian_value(p: CompositeProblem, x, lam) -> float:
    return float(p.smooth.phi(x) + p.smooth.Phi(x) @ lam)


def lagrangian_grad_x(p: CompositeProblem, x, lam) -> np.ndarray:
    """``grad phi(x) + J(x)^T lam``."""
    x = np.asarray(x, float)
    return p.smooth.grad_phi(x) + p.smooth.jac_Phi(x).T @ np.asarray(lam, float)


def lagrangian_hess_xx(p: CompositeProblem, x, lam) -> np.ndarray:
    x = np.asarray(x, float)
    return p.smooth.hess_phi(x) + p.smooth.hess_Phi_contract(x, np.asarray(lam, float))


def auglag_value(p: CompositeProblem, x, lam, rho: float) -> float:
    x, lam = np.asarray(x, float), np.asarray(lam, float)
    z = p.smooth.Phi(x) + lam / rho
    return float(p.smooth.phi(x) + moreau_env_value(p.g, z, rho) - 0.5 * lam @ lam / rho)


def auglag_grad_x(p: CompositeProblem, x, lam, rho: float) -> np.ndarray:
    x, lam = np.asarray(x, float), np.asarray(lam, float)
    z = p.smooth.Phi(x) + lam / rho
    return p.smooth.grad_phi(x) + p.smooth.jac_Phi(x).T @ moreau_env_grad(p.g, z, rho)


def auglag_value_and_grad(p: CompositeProblem, x, lam, rho: float):
    """Value and x-gradient sharing one prox evaluation."""
    x, lam = np.asarray(x, float), np.asarray(lam, float)
    z = p.smooth.Phi(x) + lam / rho
    pz = prox(p.g, z, 1.0 / rho)
    d = z - pz
    val = p.smooth.phi(x) + p.g.value(pz) + 0.5 * rho * d @ d - 0.5 * lam @ lam / rho
    grad = p.smooth.grad_phi(x) + p.smooth.jac_Phi(x).T @ (rho * d)
    return float(val), grad


def auglag_grad_lambda(p: CompositeProblem, x, lam, rho: float) -> np.ndarray:
    x, lam = np.asarray(x, float), np.asarray(lam, float)
    Phix = p.smooth.Phi(x)
    return Phix - prox(p.g, Phix + lam / rho, 1.0 / rho)


def dist_to_range_Bstar(theta: AffineSet, v) -> float:
    """Distance from ``v`` to ``rge B^T``, i.e. the norm of its projection onto ``ker B``."""
    return float(np.linalg.norm(theta.Z.T @ np.asarray(v, float)))


def _require_feasible(p: CompositeProblem, x):
    if not p.theta.contains(x):
        raise InfeasiblePointError(f"x violates Bx = b by {p.theta.violation(x):.3e}")


def kkt_residual(p: CompositeProblem, x, lam) -> float:
    """``dist(-grad_x L, rge B^T) + ||Phi(x) - prox_g(Phi(x) + lam)||``."""
    x, lam = np.asarray(x, float), np.asarray(lam, float)
    _require_feasible(p, x)
    Phix = p.smooth.Phi(x)
    stat = dist_to_range_Bstar(p.theta, lagrangian_grad_x(p, x, lam))
    return stat + float(np.linalg.norm(Phix - prox(p.g, Phix + lam, 1.0)))


def multiplier_set(p: CompositeProblem, x_bar) -> Polyhedron:
    """Λ(x̄) = ∂g(Φ(x̄)) ∩ {λ : Zᵀ(∇φ(x̄) + J(x̄)ᵀλ) = 0}.

    Needs a piecewise view of ``g``.
    """
    view = p.g.plq_view
    if view is None:
        raise ValueError("multiplier set requires a PLQ view of g")
    x_bar = np.asarray(x_bar, float)
    Z = p.theta.Z
    S = subdifferential_polyhedron(view, p.smooth.Phi(x_bar))
    D = (p.smooth.jac_Phi(x_bar) @ Z).T
    rhs = -Z.T @ p.smooth.grad_phi(x_bar)
    stat = Polyhedron(p.m, None, None, D, rhs)
    Lam = S.intersect(stat)
    if not Lam.is_feasible():
        raise InfeasibleError("the multiplier set is empty at this point")
    return Lam


def multiplier_set_distance(p: CompositeProblem, x_bar, lam, Lam: Polyhedron | None = None) -> float:
    if Lam is None:
        Lam = multiplier_set(p, x_bar)
    lam = np.asarray(lam, float)
    return float(np.linalg.norm(lam - polyhedron_project(Lam, lam)))
