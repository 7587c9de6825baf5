"""Proximal mappings and Moreau envelopes for a catalog of CPLQ outer functions.

Conventions: ``prox(g, z, r)`` is ``argmin_v g(v) + ||v - z||^2 / (2r)`` and
``moreau_env_value(g, z, rho)`` is ``min_v g(v) + (rho/2)||v - z||^2``, so the
envelope uses the prox with ``r = 1/rho``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .plq import (
    InfeasibleError,
    PlqFunction,
    PlqPiece,
    Polyhedron,
    plq_eval,
    polyhedron_project,
    separable_sum,
    solve_qp,
)

#: largest dimension for which L1 / Linf / max functions expose a PLQ view
VIEW_MAX_DIM = 10


class ProxError(RuntimeError):
    """Raised when an iterative prox subroutine fails to converge."""


def _vec(z, m: int | None = None) -> np.ndarray:
    z = np.asarray(z, dtype=float).reshape(-1)
    if m is not None and z.size != m:
        raise ValueError(f"expected a vector of length {m}, got {z.size}")
    return z


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------

def project_simplex(z) -> np.ndarray:
    """Euclidean projection onto the unit simplex (sort-based)."""
    z = _vec(z)
    if z.size == 0:
        raise ValueError("cannot project an empty vector")
    u = np.sort(z)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, z.size + 1)
    cond = u - css / k > 0
    rho = k[cond][-1]
    theta = css[rho - 1] / rho
    return np.maximum(z - theta, 0.0)


def project_l1_ball(z, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection onto ``{v : ||v||_1 <= radius}``."""
    z = _vec(z)
    if np.abs(z).sum() <= radius:
        return z.copy()
    return np.sign(z) * radius * project_simplex(np.abs(z) / radius)


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

class OuterFunction:
    """Base class for the outer CPLQ function ``g``."""

    dim: int
    kind: str = ""

    def value(self, z) -> float:
        raise NotImplementedError

    def prox(self, z, r: float) -> np.ndarray:
        raise NotImplementedError

    @property
    def plq_view(self) -> Optional[PlqFunction]:
        """Piecewise representation for diagnostics, when one is available."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __call__(self, z) -> float:
        return self.value(z)


@dataclass(frozen=True, eq=False)
class OrthantIndicator(OuterFunction):
    """Indicator of ``{0}^s x R_-^{m-s}``."""

    s: int
    m: int
    kind = "orthant"

    def __post_init__(self):
        if not 0 <= self.s <= self.m or self.m < 1:
            raise ValueError("need 0 <= s <= m and m >= 1")

    @property
    def dim(self):
        return self.m

    def value(self, z):
        z = _vec(z, self.m)
        if np.any(z[: self.s] != 0) or np.any(z[self.s:] > 0):
            return np.inf
        return 0.0

    def prox(self, z, r):
        z = _vec(z, self.m)
        p = np.minimum(z, 0.0)
        p[: self.s] = 0.0
        return p

    @cached_property
    def plq_view(self):
        eye = np.eye(self.m)
        S = Polyhedron(self.m, eye[self.s:], np.zeros(self.m - self.s), eye[: self.s], np.zeros(self.s))
        return PlqFunction((PlqPiece(S, np.zeros((self.m, self.m)), np.zeros(self.m)),))

    def to_dict(self):
        return {"kind": self.kind, "s": self.s, "m": self.m}


@dataclass(frozen=True, eq=False)
class MaxFunction(OuterFunction):
    """``g(z) = max_i z_i``."""

    m: int
    kind = "max"

    @property
    def dim(self):
        return self.m

    def value(self, z):
        return float(np.max(_vec(z, self.m)))

    def prox(self, z, r):
        z = _vec(z, self.m)
        return z - r * project_simplex(z / r)

    @cached_property
    def plq_view(self):
        if self.m > VIEW_MAX_DIM:
            return None
        eye = np.eye(self.m)
        pieces = []
        for j in range(self.m):
            rows = [eye[i] - eye[j] for i in range(self.m) if i != j]
            S = Polyhedron(self.m, rows, np.zeros(len(rows)))
            pieces.append(PlqPiece(S, np.zeros((self.m, self.m)), eye[j]))
        return PlqFunction(tuple(pieces))

    def to_dict(self):
        return {"kind": self.kind, "m": self.m}


@dataclass(frozen=True, eq=False)
class L1Norm(OuterFunction):
    m: int
    kind = "l1"

    @property
    def dim(self):
        return self.m

    def value(self, z):
        return float(np.abs(_vec(z, self.m)).sum())

    def prox(self, z, r):
        z = _vec(z, self.m)
        return np.sign(z) * np.maximum(np.abs(z) - r, 0.0)

    @cached_property
    def plq_view(self):
        if self.m > VIEW_MAX_DIM:
            return None
        pieces = []
        for signs in itertools.product((-1.0, 1.0), repeat=self.m):
            sig = np.array(signs)
            S = Polyhedron(self.m, -np.diag(sig), np.zeros(self.m))
            pieces.append(PlqPiece(S, np.zeros((self.m, self.m)), sig))
        return PlqFunction(tuple(pieces))

    def to_dict(self):
        return {"kind": self.kind, "m": self.m}


@dataclass(frozen=True, eq=False)
class LInfNorm(OuterFunction):
    m: int
    kind = "linf"

    @property
    def dim(self):
        return self.m

    def value(self, z):
        return float(np.abs(_vec(z, self.m)).max())

    def prox(self, z, r):
        # Moreau decomposition: the conjugate is the indicator of the unit l1 ball
        z = _vec(z, self.m)
        return z - r * project_l1_ball(z / r)

    @cached_property
    def plq_view(self):
        if self.m > VIEW_MAX_DIM:
            return None
        eye = np.eye(self.m)
        pieces = []
        for j in range(self.m):
            for s in (1.0, -1.0):
                rows = []
                for i in range(self.m):
                    if i != j:
                        rows += [eye[i] - s * eye[j], -eye[i] - s * eye[j]]
                rows.append(-s * eye[j])
                S = Polyhedron(self.m, rows, np.zeros(len(rows)))
                pieces.append(PlqPiece(S, np.zeros((self.m, self.m)), s * eye[j]))
        return PlqFunction(tuple(pieces))

    def to_dict(self):
        return {"kind": self.kind, "m": self.m}


def _elq_scalar_view(b: float, lo: float, hi: float) -> PlqFunction:
    """PLQ pieces of ``z -> sup_{y in [lo, hi]} z y - b y^2 / 2``."""
    def piece(ineqs, eqs, A, a, c):
        return PlqPiece(Polyhedron.from_lists(1, ineqs, eqs), [[A]], [a], c)

    pieces = []
    if b > 0:
        zlo, zhi = b * lo, b * hi
        if np.isfinite(lo):
            pieces.append(piece([([1.0], zlo)], [], 0.0, lo, -0.5 * b * lo * lo))
        mid = []
        if np.isfinite(lo):
            mid.append(([-1.0], -zlo))
        if np.isfinite(hi):
            mid.append(([1.0], zhi))
        pieces.append(piece(mid, [], 1.0 / b, 0.0, 0.0))
        if np.isfinite(hi):
            pieces.append(piece([([-1.0], -zhi)], [], 0.0, hi, -0.5 * b * hi * hi))
    else:
        if np.isfinite(lo) and np.isfinite(hi):
            pieces.append(piece([([1.0], 0.0)], [], 0.0, lo, 0.0))
            pieces.append(piece([([-1.0], 0.0)], [], 0.0, hi, 0.0))
        elif np.isfinite(lo):
            pieces.append(piece([([1.0], 0.0)], [], 0.0, lo, 0.0))
        elif np.isfinite(hi):
            pieces.append(piece([([-1.0], 0.0)], [], 0.0, hi, 0.0))
        else:
            pieces.append(piece([], [([1.0], 0.0)], 0.0, 0.0, 0.0))
    return PlqFunction(tuple(pieces))


@dataclass(frozen=True, eq=False)
class ExtendedLQ(OuterFunction):
    """``g(z) = sup_{y in C} <z, y> - 0.5 <y, B y>`` with ``B`` symmetric PSD."""

    B: np.ndarray
    C: Polyhedron
    vi_tol: float = 1e-10
    vi_max_iter: int = 100_000
    kind = "elq"

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, float))
        if B.shape != (self.C.dim, self.C.dim):
            raise ValueError("B must be m x m with m = C.dim")
        if np.abs(B - B.T).max() > 1e-12:
            raise ValueError("B must be symmetric")
        if np.linalg.eigvalsh(B).min() < -1e-10:
            raise ValueError("B must be positive semidefinite")
        B.setflags(write=False)
        object.__setattr__(self, "B", B)

    @property
    def dim(self):
        return self.C.dim

    def value(self, z):
        z = _vec(z, self.dim)
        view = self.plq_view
        if view is not None:
            return plq_eval(view, z)
        try:
            y = solve_qp(self.B, -z, self.C, convex=True)
        except InfeasibleError:
            return np.inf
        return float(z @ y - 0.5 * y @ self.B @ y)

    def prox(self, z, r):
        z = _vec(z, self.dim)
        rho = 1.0 / r
        y = prox_elq_vi(self.B, self.C, z, rho, self.vi_tol, self.vi_max_iter)
        return z - y / rho

    @cached_property
    def plq_view(self):
        B = self.B
        if np.any(B - np.diag(np.diag(B))):
            return None
        from .plq import _box_bounds

        bounds = _box_bounds(self.C)
        if bounds is None:
            return None
        lo, hi = bounds
        parts = [_elq_scalar_view(B[j, j], lo[j], hi[j]) for j in range(self.dim)]
        if np.prod([len(p.pieces) for p in parts]) > 4096:
            return None
        return parts[0] if len(parts) == 1 else separable_sum(parts)

    def to_dict(self):
        return {"kind": self.kind, "B": self.B.tolist(), "C": self.C.to_dict()}


@dataclass(frozen=True, eq=False)
class SeparableSum(OuterFunction):
    parts: tuple
    kind = "sum"

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ValueError("a separable sum needs at least one block")

    @property
    def sizes(self):
        return [p.dim for p in self.parts]

    @property
    def dim(self):
        return sum(self.sizes)

    def _blocks(self, z):
        z = _vec(z, self.dim)
        return np.split(z, np.cumsum(self.sizes)[:-1])

    def value(self, z):
        return float(sum(p.value(zj) for p, zj in zip(self.parts, self._blocks(z))))

    def prox(self, z, r):
        return np.concatenate([p.prox(zj, r) for p, zj in zip(self.parts, self._blocks(z))])

    @cached_property
    def plq_view(self):
        views = [p.plq_view for p in self.parts]
        if any(v is None for v in views):
            return None
        if np.prod([len(v.pieces) for v in views]) > 4096:
            return None
        return separable_sum(views)

    def to_dict(self):
        return {"kind": self.kind, "parts": [p.to_dict() for p in self.parts]}


@dataclass(frozen=True, eq=False)
class GenericPlq(OuterFunction):
    """A user-supplied :class:`PlqFunction`, prox'ed by brute-force enumeration."""

    fn: PlqFunction
    kind = "plq"

    @property
    def dim(self):
        return self.fn.dim

    def value(self, z):
        return plq_eval(self.fn, z)

    def prox(self, z, r):
        return prox_generic_plq(self.fn, z, r)

    @property
    def plq_view(self):
        return self.fn

    def to_dict(self):
        return {"kind": self.kind, **self.fn.to_dict()}


def outer_from_dict(doc: dict) -> OuterFunction:
    kind = doc.get("kind")
    if kind == "orthant":
        return OrthantIndicator(int(doc.get("s", 0)), int(doc["m"]))
    if kind == "max":
        return MaxFunction(int(doc["m"]))
    if kind == "l1":
        return L1Norm(int(doc["m"]))
    if kind == "linf":
        return LInfNorm(int(doc["m"]))
    if kind == "elq":
        return ExtendedLQ(np.asarray(doc["B"], float), Polyhedron.from_dict(doc["C"]))
    if kind == "sum":
        return SeparableSum(tuple(outer_from_dict(p) for p in doc["parts"]))
    if kind == "plq":
        return GenericPlq(PlqFunction.from_dict(doc))
    raise ValueError(f"unknown outer function kind {kind!r}")


# ---------------------------------------------------------------------------
# prox routines
# ---------------------------------------------------------------------------

def prox(g: OuterFunction, z, r: float) -> np.ndarray:
    """``prox_{r g}(z)``."""
    if not r > 0:
        raise ValueError("prox parameter must be positive")
    return g.prox(_vec(z, g.dim), float(r))


def prox_elq_vi(Bmat, C: Polyhedron, z, rho: float, tol: float = 1e-10, max_iter: int = 100_000) -> np.ndarray:
    """Solve ``z ∈ (B + I/rho) y + N_C(y)`` by fixed-step projected gradient.

    The solution equals ``prox_{rho g*}(rho z)`` for the extended
    linear-quadratic ``g`` defined by ``(B, C)``.
    """
    B = np.atleast_2d(np.asarray(Bmat, float))
    z = _vec(z, C.dim)
    M = B + np.eye(C.dim) / rho
    step = 1.0 / (np.linalg.eigvalsh(B).max() + 1.0 / rho)
    y = polyhedron_project(C, rho * z)
    for _ in range(max_iter):
        y_new = polyhedron_project(C, y - step * (M @ y - z))
        if np.linalg.norm(y_new - y) <= tol:
            return y_new
        y = y_new
    raise ProxError(f"projected gradient did not reach {tol:g} in {max_iter} iterations")


def prox_generic_plq(g: PlqFunction, z, r: float) -> np.ndarray:
    """Brute-force prox: solve the prox QP on every piece and keep the best."""
    z = _vec(z, g.dim)
    eye = np.eye(g.dim)
    best, best_val = None, np.inf
    for p in g.pieces:
        try:
            v = solve_qp(p.quad + eye / r, p.lin - z / r, p.set)
        except InfeasibleError:
            continue
        val = p.formula(v) + (v - z) @ (v - z) / (2 * r)
        if val < best_val - 1e-10:
            best, best_val = v, val
    if best is None:
        raise InfeasibleError("no piece produced a minimizer; check the PLQ data")
    return best


def moreau_env_value(g: OuterFunction, z, rho: float) -> float:
    z = _vec(z, g.dim)
    p = prox(g, z, 1.0 / rho)
    return float(g.value(p) + 0.5 * rho * (z - p) @ (z - p))


def moreau_env_grad(g: OuterFunction, z, rho: float) -> np.ndarray:
    z = _vec(z, g.dim)
    return rho * (z - prox(g, z, 1.0 / rho))
