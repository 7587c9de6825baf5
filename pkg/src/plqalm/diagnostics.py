"""Second-order diagnostics at candidate solutions.

Everything here is an empirical probe on small instances: KKT checks, a
sampling SOSC probe over the critical cone, the second-order epi-derivative of
the augmented Lagrangian, quadratic-growth sampling and a fitted error-bound
constant.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .lagrangian import (
    CompositeProblem,
    auglag_value,
    dist_to_range_Bstar,
    kkt_residual,
    lagrangian_grad_x,
    lagrangian_hess_xx,
    multiplier_set,
    multiplier_set_distance,
)
from .plq import (
    Polyhedron,
    cone_generators,
    piece_critical_cones,
    plq_critical_cone_contains,
    plq_subdifferential_contains,
    polyhedron_project,
    solve_qp,
)

SOSC_BAND = 1e-8


class DiagnosticError(ValueError):
    pass


def _view(p: CompositeProblem):
    view = p.g.plq_view
    if view is None:
        raise DiagnosticError("this diagnostic needs a PLQ view of g")
    return view


def check_kkt(p: CompositeProblem, x, lam, tol: float = 1e-8) -> bool:
    x, lam = np.asarray(x, float), np.asarray(lam, float)
    if p.theta.violation(x) > tol:
        return False
    if dist_to_range_Bstar(p.theta, lagrangian_grad_x(p, x, lam)) > tol:
        return False
    view = p.g.plq_view
    Phix = p.smooth.Phi(x)
    if view is not None:
        try:
            return plq_subdifferential_contains(view, Phix, lam, tol)
        except ValueError:
            return False
    # without a view: lam ∈ ∂g(z) iff z = prox_g(z + lam)
    from .prox import prox

    return float(np.linalg.norm(Phix - prox(p.g, Phix + lam, 1.0))) <= tol


# ---------------------------------------------------------------------------
# SOSC
# ---------------------------------------------------------------------------

@dataclass
class SoscReport:
    min_value_estimate: float
    samples_used: int
    verdict: str  # "holds" | "fails" | "inconclusive"
    pieces: list = field(default_factory=list)
    witness: Optional[list] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _cone_in_reduced_coords(K: Polyhedron, JZ: np.ndarray) -> Polyhedron:
    """``{y : JZ y ∈ K}`` for a homogeneous ``K``."""
    k = JZ.shape[1]
    return Polyhedron(k, K.C @ JZ, np.zeros(K.n_ineq), K.D @ JZ, np.zeros(K.n_eq))


def sosc_probe(p: CompositeProblem, x_bar, lam_bar, samples: int = 512, seed: int = 42) -> SoscReport:
    """Estimate the minimum of the SOSC form over the critical cone ∩ unit sphere.

    Per active piece the cone is split into its lineality space (handled by
    an exact eigen-decomposition) and a pointed part (extreme rays plus
    seeded random conic combinations and projected Gaussian draws).
    """
    x_bar, lam_bar = np.asarray(x_bar, float), np.asarray(lam_bar, float)
    if not check_kkt(p, x_bar, lam_bar):
        raise DiagnosticError("(x, lam) does not satisfy the KKT system")
    view = _view(p)
    rng = np.random.default_rng(seed)
    Z = p.theta.Z
    J = p.smooth.jac_Phi(x_bar)
    H = lagrangian_hess_xx(p, x_bar, lam_bar)
    JZ = J @ Z
    k = Z.shape[1]

    best = np.inf
    witness = None
    used = 0
    breakdown = []
    if k == 0:
        return SoscReport(np.inf, 0, "holds", [], None)
    for i, K in piece_critical_cones(view, p.smooth.Phi(x_bar), lam_bar):
        A = view.pieces[i].quad
        Qy = Z.T @ (H + J.T @ A @ J) @ Z
        Qy = 0.5 * (Qy + Qy.T)
        cone = _cone_in_reduced_coords(K, JZ)
        rays, lin = cone_generators(cone)
        cands = []
        piece_min = np.inf
        if lin.shape[0]:
            # exact minimum over the lineality subspace
            Lb = np.linalg.qr(lin.T)[0]
            vals, vecs = np.linalg.eigh(Lb.T @ Qy @ Lb)
            cands.append(Lb @ vecs[:, 0])
        cands.extend(rays)
        if rays.shape[0] or lin.shape[0]:
            for _ in range(samples):
                y = np.zeros(k)
                if lin.shape[0]:
                    y += lin.T @ rng.standard_normal(lin.shape[0])
                if rays.shape[0]:
                    y += rays.T @ rng.exponential(size=rays.shape[0]) * rng.integers(0, 2, rays.shape[0])
                cands.append(y)
            for _ in range(max(1, samples // 8)):
                cands.append(polyhedron_project(cone, rng.standard_normal(k)))
        for y in cands:
            nrm = np.linalg.norm(y)
            if nrm < 1e-12:
                continue
            y = y / nrm
            val = float(y @ Qy @ y)
            used += 1
            if val < piece_min:
                piece_min = val
            if val < best:
                best, witness = val, Z @ y
        breakdown.append({
            "piece": i,
            "lineality_dim": int(lin.shape[0]),
            "rays": int(rays.shape[0]),
            "min_value": piece_min,
        })

    if not np.isfinite(best):
        verdict = "holds"  # the cone is {0}
    elif best > SOSC_BAND:
        verdict = "holds"
    elif best < -SOSC_BAND and _in_critical_cone(p, view, x_bar, lam_bar, witness):
        verdict = "fails"
    else:
        verdict = "inconclusive"
    return SoscReport(best, used, verdict, breakdown,
                      None if witness is None else witness.tolist())


def _in_critical_cone(p, view, x_bar, lam_bar, w) -> bool:
    if dist_to_range_Bstar(p.theta, w) < np.linalg.norm(w) - 1e-9:
        return False  # not in ker B
    return plq_critical_cone_contains(view, p.smooth.Phi(x_bar), lam_bar, p.smooth.jac_Phi(x_bar) @ w)


def sosc_form(p: CompositeProblem, x_bar, lam_bar, w) -> float:
    """``<Hess_xx L w, w> + d2g(Phi(x), lam)(J w)`` (may be ``inf``)."""
    from .plq import plq_second_subderivative

    view = _view(p)
    w = np.asarray(w, float)
    H = lagrangian_hess_xx(p, x_bar, lam_bar)
    return float(w @ H @ w) + plq_second_subderivative(
        view, p.smooth.Phi(x_bar), lam_bar, p.smooth.jac_Phi(x_bar) @ w)


# ---------------------------------------------------------------------------
# second-order epi-derivative of the augmented Lagrangian
# ---------------------------------------------------------------------------

def aug_epi_d2(p: CompositeProblem, x_bar, lam_bar, rho: float, w) -> float:
    """``<Hess_xx L w, w> + min_{v in K_g} [d2g(v) + rho ||v - J w||^2]``."""
    view = _view(p)
    x_bar, lam_bar, w = (np.asarray(a, float) for a in (x_bar, lam_bar, w))
    J = p.smooth.jac_Phi(x_bar)
    u = J @ w
    m = p.m
    env = np.inf
    for i, K in piece_critical_cones(view, p.smooth.Phi(x_bar), lam_bar):
        A = view.pieces[i].quad
        v = solve_qp(2 * A + 2 * rho * np.eye(m), -2 * rho * u, K)
        env = min(env, float(v @ A @ v + rho * (v - u) @ (v - u)))
    H = lagrangian_hess_xx(p, x_bar, lam_bar)
    return float(w @ H @ w) + env


# ---------------------------------------------------------------------------
# growth and error bounds
# ---------------------------------------------------------------------------

@dataclass
class GrowthReport:
    rho: float
    gamma: float
    ell_hat: float
    violations: int
    samples: int

    @property
    def verdict(self) -> bool:
        return self.violations == 0 and self.ell_hat > 0

    def to_dict(self) -> dict:
        return {**asdict(self), "verdict": self.verdict}


def _ball_offsets(rng, Z, radius, samples):
    k = Z.shape[1]
    if k == 0:
        return np.zeros((0, Z.shape[0]))
    d = rng.standard_normal((samples, k))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.random(samples) ** (1.0 / k)
    return (d * r[:, None]) @ Z.T


def growth_probe(p: CompositeProblem, x_bar, lam, rho: float, gamma: float,
                 samples: int = 500, seed: int = 42) -> GrowthReport:
    """Sample ``L(x, lam, rho) - phi(x̄) - g(Phi(x̄))`` on ``Theta ∩ B_gamma(x̄)``."""
    x_bar, lam = np.asarray(x_bar, float), np.asarray(lam, float)
    if not check_kkt(p, x_bar, lam):
        raise DiagnosticError("lam is not a Lagrange multiplier at x_bar")
    rng = np.random.default_rng(seed)
    base = p.objective(x_bar)
    ell = np.inf
    violations = 0
    for off in _ball_offsets(rng, p.theta.Z, gamma, samples):
        r2 = off @ off
        if r2 < 1e-20:
            continue
        num = auglag_value(p, x_bar + off, lam, rho) - base
        if num < -1e-10:
            violations += 1
        ell = min(ell, num / r2)
    return GrowthReport(rho, gamma, float(ell), violations, samples)


def fit_error_bound_constant(p: CompositeProblem, x_bar, lam_ref, radius: float = 1e-2,
                             samples: int = 100, seed: int = 42, Lam: Polyhedron | None = None) -> float:
    """Largest observed ``(||x - x̄|| + dist(lam, Λ(x̄))) / R(x, lam)`` near ``(x̄, lam_ref)``."""
    x_bar, lam_ref = np.asarray(x_bar, float), np.asarray(lam_ref, float)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if Lam is None:
        Lam = multiplier_set(p, x_bar)
    rng = np.random.default_rng(seed)
    offs = _ball_offsets(rng, p.theta.Z, radius, samples)
    kappa = -np.inf
    for j in range(samples):
        x = x_bar + (offs[j] if offs.shape[0] else 0.0)
        d = rng.standard_normal(p.m)
        lam = lam_ref + radius * rng.random() ** (1.0 / p.m) * d / np.linalg.norm(d)
        R = kkt_residual(p, x, lam)
        if R < 1e-12:
            continue
        err = np.linalg.norm(x - x_bar) + multiplier_set_distance(p, x_bar, lam, Lam)
        kappa = max(kappa, err / R)
    if not np.isfinite(kappa):
        raise DiagnosticError("all draws were degenerate (R < 1e-12)")
    return float(kappa)

