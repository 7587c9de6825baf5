"""Polyhedra and convex piecewise linear-quadratic (CPLQ) functions.

A CPLQ function is stored as a finite list of pieces ``(C_i, A_i, a_i, alpha_i)``
with ``g(z) = 0.5 <A_i z, z> + <a_i, z> + alpha_i`` on the polyhedron ``C_i``.
Polyhedra are kept in inequality/equality form only.

All geometric computations here are exact-by-enumeration and meant for small
("desk scale") descriptions.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import nnls

#: tolerance used to decide whether an inequality is active at a point
ACTIVE_TOL = 1e-9
#: default residual tolerance for normal-cone membership fits
NORMAL_CONE_TOL = 1e-8
#: maximum number of active-set subsets examined by the enumerating QP solver
ENUMERATION_CAP = 2 ** 18


class PolyhedronError(ValueError):
    """Raised on malformed or infeasible polyhedral data."""


class InfeasibleError(PolyhedronError):
    pass


class EnumerationCapError(RuntimeError):
    """Raised when an exact enumeration would exceed :data:`ENUMERATION_CAP`."""


class DomainError(ValueError):
    """Raised when a point lies outside the domain required by an operation."""


def _as_matrix(rows, dim: int) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        return np.zeros((0, dim))
    arr = np.atleast_2d(arr)
    if arr.shape[1] != dim:
        raise PolyhedronError(f"constraint normals must have length {dim}, got {arr.shape[1]}")
    return arr


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """``{z : C z <= alpha, D z = beta}`` in ``R^dim``."""

    dim: int
    C: np.ndarray = None
    alpha: np.ndarray = None
    D: np.ndarray = None
    beta: np.ndarray = None

    def __post_init__(self):
        dim = int(self.dim)
        if dim <= 0:
            raise PolyhedronError("dim must be positive")
        object.__setattr__(self, "dim", dim)
        C = _as_matrix(self.C if self.C is not None else [], dim)
        D = _as_matrix(self.D if self.D is not None else [], dim)
        alpha = np.asarray(self.alpha if self.alpha is not None else [], dtype=float).reshape(-1)
        beta = np.asarray(self.beta if self.beta is not None else [], dtype=float).reshape(-1)
        if alpha.shape[0] != C.shape[0] or beta.shape[0] != D.shape[0]:
            raise PolyhedronError("offset count does not match normal count")
        for name, arr in (("C", C), ("alpha", alpha), ("D", D), ("beta", beta)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_lists(cls, dim: int, ineqs: Iterable = (), eqs: Iterable = ()) -> "Polyhedron":
        """Build from ``[(normal, offset), ...]`` lists."""
        ineqs, eqs = list(ineqs), list(eqs)
        C = [np.asarray(n, float) for n, _ in ineqs]
        D = [np.asarray(n, float) for n, _ in eqs]
        return cls(dim, C, [o for _, o in ineqs], D, [o for _, o in eqs])

    @classmethod
    def whole_space(cls, dim: int) -> "Polyhedron":
        return cls(dim)

    @classmethod
    def box(cls, lower, upper) -> "Polyhedron":
        """Axis-aligned box; infinite bounds are dropped."""
        lower = np.asarray(lower, float).reshape(-1)
        upper = np.asarray(upper, float).reshape(-1)
        dim = lower.size
        eye = np.eye(dim)
        ineqs = [(-eye[j], -lower[j]) for j in range(dim) if np.isfinite(lower[j])]
        ineqs += [(eye[j], upper[j]) for j in range(dim) if np.isfinite(upper[j])]
        return cls.from_lists(dim, ineqs)

    @property
    def n_ineq(self) -> int:
        return self.C.shape[0]

    @property
    def n_eq(self) -> int:
        return self.D.shape[0]

    def is_cone(self) -> bool:
        return not np.any(self.alpha) and not np.any(self.beta)

    def contains(self, z, tol: float = ACTIVE_TOL) -> bool:
        z = self._check_point(z)
        if self.n_ineq and np.any(self.C @ z - self.alpha > tol):
            return False
        if self.n_eq and np.any(np.abs(self.D @ z - self.beta) > tol):
            return False
        return True

    def active(self, z, tol: float = ACTIVE_TOL) -> np.ndarray:
        """Indices of inequalities with ``|<c_j, z> - alpha_j| <= tol``."""
        z = self._check_point(z)
        if not self.n_ineq:
            return np.zeros(0, dtype=int)
        return np.flatnonzero(np.abs(self.C @ z - self.alpha) <= tol)

    def intersect(self, other: "Polyhedron") -> "Polyhedron":
        if other.dim != self.dim:
            raise PolyhedronError("dimension mismatch in intersection")
        return Polyhedron(
            self.dim,
            np.vstack([self.C, other.C]),
            np.concatenate([self.alpha, other.alpha]),
            np.vstack([self.D, other.D]),
            np.concatenate([self.beta, other.beta]),
        )

    def translate(self, shift) -> "Polyhedron":
        """``P + shift``."""
        shift = self._check_point(shift)
        return Polyhedron(self.dim, self.C, self.alpha + self.C @ shift, self.D, self.beta + self.D @ shift)

    @cached_property
    def witness(self) -> np.ndarray:
        """A feasible point (the projection of the origin); raises if empty."""
        w = polyhedron_project(self, np.zeros(self.dim))
        assert self.contains(w, 1e-10)
        return w

    def is_feasible(self) -> bool:
        try:
            self.witness
        except InfeasibleError:
            return False
        return True

    def _check_point(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.size != self.dim:
            raise ValueError(f"point has length {z.size}, polyhedron lives in R^{self.dim}")
        return z

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "ineqs": [{"normal": c.tolist(), "offset": float(a)} for c, a in zip(self.C, self.alpha)],
            "eqs": [{"normal": d.tolist(), "offset": float(b)} for d, b in zip(self.D, self.beta)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Polyhedron":
        dim = int(doc["dim"])
        ineqs = [(c["normal"], float(c["offset"])) for c in doc.get("ineqs", [])]
        eqs = [(c["normal"], float(c["offset"])) for c in doc.get("eqs", [])]
        return cls.from_lists(dim, ineqs, eqs)

    def __repr__(self):
        return f"Polyhedron(dim={self.dim}, n_ineq={self.n_ineq}, n_eq={self.n_eq})"


# A cone is a polyhedron with zero offsets; the alias keeps signatures readable.
ConeRep = Polyhedron


# ---------------------------------------------------------------------------
# enumerating active-set QP
# ---------------------------------------------------------------------------

def _box_bounds(P: Polyhedron):
    """Return (lower, upper) if P is a box described by signed unit normals."""
    if P.n_eq:
        return None
    lo = np.full(P.dim, -np.inf)
    hi = np.full(P.dim, np.inf)
    for c, a in zip(P.C, P.alpha):
        nz = np.flatnonzero(c)
        if nz.size != 1:
            return None
        j = nz[0]
        if c[j] > 0:
            hi[j] = min(hi[j], a / c[j])
        else:
            lo[j] = max(lo[j], a / c[j])
    return lo, hi


def _solve_eq_qp(H, c, A, b):
    """KKT solve of ``min 0.5 v'Hv + c'v s.t. A v = b``; None if inconsistent."""
    n = H.shape[0]
    k = A.shape[0]
    K = np.zeros((n + k, n + k))
    K[:n, :n] = H
    K[:n, n:] = A.T
    K[n:, :n] = A
    rhs = np.concatenate([-c, b])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    scale = 1.0 + np.abs(rhs).max(initial=0.0)
    if np.abs(K @ sol - rhs).max(initial=0.0) > 1e-9 * scale:
        return None
    return sol[:n], sol[n:]


def solve_qp(H, c, P: Polyhedron, *, convex: bool | None = None, tol: float = 1e-9):
    """Minimize ``0.5 v'Hv + c'v`` over ``P`` by active-set enumeration.

    Subsets of inequalities are tried in order of increasing size; for a
    convex objective the first KKT point found is returned. For an indefinite
    ``H`` every subset is visited and the lowest-valued KKT point wins.

    Raises
    ------
    InfeasibleError
        if no subset yields a KKT point (empty ``P`` or, for convex problems,
        an objective unbounded below on ``P``).
    EnumerationCapError
        if ``2**n_ineq`` exceeds :data:`ENUMERATION_CAP`.
    """
    H = np.asarray(H, float)
    c = np.asarray(c, float).reshape(-1)
    if convex is None:
        convex = np.linalg.eigvalsh(0.5 * (H + H.T)).min() >= -1e-10
    if 2 ** P.n_ineq > ENUMERATION_CAP:
        raise EnumerationCapError(f"{P.n_ineq} inequalities exceed the enumeration cap")

    best = None
    best_val = np.inf
    for size in range(P.n_ineq + 1):
        for subset in itertools.combinations(range(P.n_ineq), size):
            idx = list(subset)
            A = np.vstack([P.D, P.C[idx]])
            b = np.concatenate([P.beta, P.alpha[idx]])
            res = _solve_eq_qp(H, c, A, b)
            if res is None:
                continue
            v, mult = res
            mu = mult[P.n_eq:]
            if mu.size and mu.min() < -tol * (1.0 + np.abs(mu).max()):
                continue
            if not P.contains(v, tol * (1.0 + np.abs(v).max(initial=0.0))):
                continue
            if convex:
                return v
            val = 0.5 * v @ H @ v + c @ v
            if val < best_val - 1e-12:
                best, best_val = v, val
    if best is None:
        raise InfeasibleError("no KKT point: polyhedron empty or objective unbounded")
    return best


def polyhedron_project(P: Polyhedron, z) -> np.ndarray:
    """Euclidean projection of ``z`` onto ``P``."""
    z = P._check_point(z)
    if P.contains(z, 0.0):
        return z.copy()
    bounds = _box_bounds(P)
    if bounds is not None:
        lo, hi = bounds
        if np.any(lo > hi):
            raise InfeasibleError("empty box")
        return np.clip(z, lo, hi)
    return solve_qp(np.eye(P.dim), -z, P, convex=True)


# ---------------------------------------------------------------------------
# cones
# ---------------------------------------------------------------------------

def cone_membership(K: ConeRep, w, tol: float = ACTIVE_TOL) -> bool:
    return K.contains(w, tol)


def tangent_cone(P: Polyhedron, z, tol: float = ACTIVE_TOL) -> ConeRep:
    """Homogeneous system of the constraints active at ``z``."""
    if not P.contains(z, tol):
        raise DomainError("point is not in the polyhedron")
    act = P.active(z, tol)
    return Polyhedron(P.dim, P.C[act], np.zeros(act.size), P.D, np.zeros(P.n_eq))


def critical_cone(P: Polyhedron, z, u, tol: float = ACTIVE_TOL) -> ConeRep:
    """``T_P(z) ∩ [u]^perp``."""
    T = tangent_cone(P, z, tol)
    u = np.asarray(u, float).reshape(1, -1)
    return Polyhedron(P.dim, T.C, T.alpha, np.vstack([T.D, u]), np.zeros(T.n_eq + 1))


def _nonneg_fit_residual(G: np.ndarray, E: np.ndarray, v: np.ndarray) -> float:
    """``min ||G' mu + E' nu - v||`` over ``mu >= 0`` and free ``nu``."""
    cols = [G.T, E.T, -E.T]
    M = np.hstack([c for c in cols if c.size] or [np.zeros((v.size, 0))])
    if M.shape[1] == 0:
        return float(np.linalg.norm(v))
    _, rnorm = nnls(M, v, maxiter=50 * M.shape[1] + 100)
    return float(rnorm)


def normal_cone_contains(P: Polyhedron, z, v, tol: float = NORMAL_CONE_TOL) -> bool:
    """``v ∈ N_P(z)``, tested by a nonnegative least-squares fit of active normals."""
    if not P.contains(z):
        raise DomainError("point is not in the polyhedron")
    v = P._check_point(v)
    act = P.active(z)
    return _nonneg_fit_residual(P.C[act], P.D, v) <= tol


def _null_space(M: np.ndarray, dim: int, rtol: float = 1e-10) -> np.ndarray:
    if M.size == 0:
        return np.eye(dim)
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > rtol * max(1.0, s.max(initial=0.0))))
    return vt[rank:].T


def cone_generators(K: ConeRep):
    """Extreme rays and a lineality basis of the cone ``{w : Gw <= 0, Dw = 0}``.

    Returns ``(rays, lineality)`` as row-stacked arrays. Rays of the pointed
    part are found by enumerating subsets of tight inequalities.
    """
    m = K.dim
    G, D = K.C, K.D
    L = _null_space(np.vstack([G, D]), m)  # lineality space, columns
    base = np.vstack([D, L.T]) if L.shape[1] else D
    sub = _null_space(base, m)
    d = sub.shape[1]
    rays = []
    if d == 0:
        return np.zeros((0, m)), L.T
    # drop inequalities that vanish on the pointed part (they are implied by D)
    if 2 ** G.shape[0] > ENUMERATION_CAP:
        raise EnumerationCapError("too many inequalities for ray enumeration")
    for subset in itertools.combinations(range(G.shape[0]), d - 1):
        M = np.vstack([base, G[list(subset)]]) if subset else base
        N = _null_space(M, m)
        if N.shape[1] != 1:
            continue
        r = N[:, 0]
        for cand in (r, -r):
            if np.all(G @ cand <= 1e-10):
                if not any(np.allclose(cand, q, atol=1e-9) for q in rays):
                    rays.append(cand)
                break
    return (np.array(rays) if rays else np.zeros((0, m))), L.T


def polar_cone(K: ConeRep) -> ConeRep:
    """Inequality description of ``{u : <u, w> <= 0 for all w in K}``."""
    rays, lin = cone_generators(K)
    return Polyhedron(K.dim, rays, np.zeros(rays.shape[0]), lin, np.zeros(lin.shape[0]))


def normal_cone(P: Polyhedron, z) -> ConeRep:
    """``N_P(z)`` in inequality form (polar of the tangent cone)."""
    return polar_cone(tangent_cone(P, z))


# ---------------------------------------------------------------------------
# CPLQ functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PlqPiece:
    set: Polyhedron
    quad: np.ndarray
    lin: np.ndarray
    const: float = 0.0

    def __post_init__(self):
        m = self.set.dim
        A = np.asarray(self.quad, float).reshape(m, m)
        if np.abs(A - A.T).max(initial=0.0) > 1e-12:
            raise PolyhedronError("piece quadratic term must be symmetric")
        a = np.asarray(self.lin, float).reshape(m)
        A.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "quad", A)
        object.__setattr__(self, "lin", a)
        object.__setattr__(self, "const", float(self.const))

    def formula(self, z: np.ndarray) -> float:
        return 0.5 * z @ self.quad @ z + self.lin @ z + self.const

    def gradient(self, z: np.ndarray) -> np.ndarray:
        return self.quad @ z + self.lin


@dataclass(frozen=True, eq=False)
class PlqFunction:
    pieces: tuple
    dim: int = field(init=False)

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise PolyhedronError("a PLQ function needs at least one piece")
        dims = {p.set.dim for p in pieces}
        if len(dims) != 1:
            raise PolyhedronError("pieces live in different dimensions")
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "dim", dims.pop())

    def __call__(self, z) -> float:
        return plq_eval(self, z)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "pieces": [
                {"A": p.quad.tolist(), "a": p.lin.tolist(), "alpha": p.const, "set": p.set.to_dict()}
                for p in self.pieces
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PlqFunction":
        dim = int(doc["dim"])
        pieces = []
        for k, pc in enumerate(doc["pieces"]):
            S = Polyhedron.from_dict(pc["set"]) if "set" in pc else Polyhedron(dim)
            if S.dim != dim:
                raise PolyhedronError(f"pieces[{k}].set has dim {S.dim}, expected {dim}")
            A = np.asarray(pc.get("A", np.zeros((dim, dim))), float).reshape(dim, dim)
            pieces.append(PlqPiece(S, A, pc.get("a", np.zeros(dim)), pc.get("alpha", 0.0)))
        return cls(tuple(pieces))


def _point(g: PlqFunction, z) -> np.ndarray:
    z = np.asarray(z, float).reshape(-1)
    if z.size != g.dim:
        raise ValueError(f"expected a point of length {g.dim}, got {z.size}")
    return z


def plq_eval(g: PlqFunction, z) -> float:
    """Value at ``z`` from the lowest-index piece containing it, ``inf`` outside."""
    z = _point(g, z)
    for p in g.pieces:
        if p.set.contains(z):
            return float(p.formula(z))
    return np.inf


def plq_active_pieces(g: PlqFunction, z) -> list[int]:
    z = _point(g, z)
    act = [i for i, p in enumerate(g.pieces) if p.set.contains(z)]
    if not act:
        raise DomainError("point lies outside dom g")
    return act


def plq_subdifferential_contains(g: PlqFunction, z, v, tol: float = NORMAL_CONE_TOL) -> bool:
    z, v = _point(g, z), _point(g, v)
    for i in plq_active_pieces(g, z):
        p = g.pieces[i]
        if not normal_cone_contains(p.set, z, v - p.gradient(z), tol):
            return False
    return True


def subdifferential_polyhedron(g: PlqFunction, z) -> Polyhedron:
    """``∂g(z)`` as the intersection over active pieces of ``grad_i(z) + N_{C_i}(z)``."""
    z = _point(g, z)
    P = Polyhedron(g.dim)
    for i in plq_active_pieces(g, z):
        p = g.pieces[i]
        P = P.intersect(normal_cone(p.set, z).translate(p.gradient(z)))
    return _drop_duplicate_rows(P)


def _drop_duplicate_rows(P: Polyhedron, decimals: int = 12) -> Polyhedron:
    """Remove repeated (normalized) constraints so enumeration stays small."""
    def unique(M, off):
        if not M.shape[0]:
            return M, off
        scale = np.linalg.norm(M, axis=1)
        scale[scale == 0] = 1.0
        rows = np.round(np.column_stack([M, off]) / scale[:, None], decimals)
        _, keep = np.unique(rows, axis=0, return_index=True)
        keep.sort()
        return M[keep], off[keep]

    C, alpha = unique(P.C, P.alpha)
    D, beta = unique(P.D, P.beta)
    return Polyhedron(P.dim, C, alpha, D, beta)


def _require_subgradient(g, z, v, tol):
    if not plq_subdifferential_contains(g, z, v, tol):
        raise DomainError("v is not a subgradient of g at z")


def piece_critical_cones(g: PlqFunction, z, v, tol: float = NORMAL_CONE_TOL) -> list[tuple[int, ConeRep]]:
    """``[(i, K_{C_i}(z, v - A_i z - a_i)) for i in I(z)]``."""
    z, v = _point(g, z), _point(g, v)
    _require_subgradient(g, z, v, tol)
    out = []
    for i in plq_active_pieces(g, z):
        p = g.pieces[i]
        out.append((i, critical_cone(p.set, z, v - p.gradient(z))))
    return out


def plq_critical_cone_contains(g: PlqFunction, z, v, w, tol: float = NORMAL_CONE_TOL) -> bool:
    w = _point(g, w)
    scale = 1.0 + np.abs(w).max(initial=0.0)
    return any(K.contains(w, ACTIVE_TOL * scale) for _, K in piece_critical_cones(g, z, v, tol))


def plq_second_subderivative(g: PlqFunction, z, v, w, tol: float = NORMAL_CONE_TOL) -> float:
    """``<A_i w, w>`` for the first eligible active piece, ``inf`` if none."""
    w = _point(g, w)
    scale = 1.0 + np.abs(w).max(initial=0.0)
    for i, K in piece_critical_cones(g, z, v, tol):
        if K.contains(w, ACTIVE_TOL * scale):
            return float(w @ g.pieces[i].quad @ w)
    return np.inf


def sample_domain(g: PlqFunction, rng: np.random.Generator, scale: float = 2.0) -> np.ndarray:
    """A random point of ``dom g``: a Gaussian draw projected onto a random piece."""
    p = g.pieces[rng.integers(len(g.pieces))]
    return polyhedron_project(p.set, scale * rng.standard_normal(g.dim))


def plq_convexity_probe(g: PlqFunction, samples: int = 200, seed: int = 0, scale: float = 2.0) -> bool:
    """Midpoint-convexity probe on random pairs in ``dom g``.

    A ``True`` result is not a certificate.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        z1 = sample_domain(g, rng, scale)
        z2 = sample_domain(g, rng, scale)
        mid = plq_eval(g, 0.5 * (z1 + z2))
        if not np.isfinite(mid):
            continue
        if mid > 0.5 * plq_eval(g, z1) + 0.5 * plq_eval(g, z2) + 1e-8:
            return False
    return True


def plq_consistency_probe(g: PlqFunction, samples: int = 50, seed: int = 0, tol: float = 1e-8) -> bool:
    """Check that overlapping pieces agree on sampled points of their intersections."""
    rng = np.random.default_rng(seed)
    for i, j in itertools.combinations(range(len(g.pieces)), 2):
        S = g.pieces[i].set.intersect(g.pieces[j].set)
        if not S.is_feasible():
            continue
        for _ in range(samples):
            z = polyhedron_project(S, 2.0 * rng.standard_normal(g.dim))
            if abs(g.pieces[i].formula(z) - g.pieces[j].formula(z)) > tol * (1 + np.abs(z).max()):
                return False
    return True


def separable_sum(parts: Sequence[PlqFunction]) -> PlqFunction:
    """PLQ representation of ``g(z^1, ..., z^s) = sum_j g_j(z^j)`` (product of pieces)."""
    dims = [p.dim for p in parts]
    m = sum(dims)
    offsets = np.cumsum([0] + dims)
    pieces = []
    for combo in itertools.product(*[p.pieces for p in parts]):
        A = np.zeros((m, m))
        a = np.zeros(m)
        const = 0.0
        Cs, alphas, Ds, betas = [], [], [], []
        for k, pc in enumerate(combo):
            lo, hi = offsets[k], offsets[k + 1]
            A[lo:hi, lo:hi] = pc.quad
            a[lo:hi] = pc.lin
            const += pc.const
            Cm = np.zeros((pc.set.n_ineq, m))
            Cm[:, lo:hi] = pc.set.C
            Dm = np.zeros((pc.set.n_eq, m))
            Dm[:, lo:hi] = pc.set.D
            Cs.append(Cm)
            Ds.append(Dm)
            alphas.append(pc.set.alpha)
            betas.append(pc.set.beta)
        S = Polyhedron(m, np.vstack(Cs), np.concatenate(alphas), np.vstack(Ds), np.concatenate(betas))
        pieces.append(PlqPiece(S, A, a, const))
    return PlqFunction(tuple(pieces))
