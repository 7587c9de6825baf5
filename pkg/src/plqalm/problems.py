"""Declarative problem documents and the built-in problem library.

A problem document (JSON) looks like::

    {
      "n": 2, "m": 2,
      "phi": {"Q": [[2, 0], [0, 0]], "q": [0, -1], "c": 0},
      "Phi": [{"a": [0, 1], "b": 0}, {"a": [0, 1], "b": 0}],
      "g": {"kind": "orthant", "s": 0, "m": 2},
      "theta": {"B": [[1, 1]], "b": [1]},               # optional
      "known_solution": {"x": [0, 0], "lambda": [0.5, 0.5],
                          "multiplier_set": {...polyhedron...}}   # optional
    }

``phi`` may instead be ``{"terms": [{"coef": c, "powers": [p1, ..., pn]}, ...]}``.
Each ``Phi`` component is ``0.5 x'Qx + a'x + b`` with ``Q`` optional.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .lagrangian import AffineSet, CompositeProblem, KnownSolution, SmoothOracle, multiplier_set
from .plq import Polyhedron
from .prox import outer_from_dict


class SchemaError(ValueError):
    """Invalid problem document; the message starts with the offending field path."""


def _array(doc, key, shape, path):
    if key not in doc:
        raise SchemaError(f"{path}.{key}: missing")
    try:
        arr = np.asarray(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}.{key}: not numeric ({exc})") from None
    if arr.shape != shape:
        raise SchemaError(f"{path}.{key}: expected shape {shape}, got {arr.shape}")
    return arr


def _symmetric(M, path):
    if np.abs(M - M.T).max(initial=0.0) > 1e-12:
        raise SchemaError(f"{path}: matrix must be symmetric")
    return M


@dataclass(frozen=True)
class QuadraticPart:
    """``0.5 x'Qx + q'x + c``."""

    Q: np.ndarray
    q: np.ndarray
    c: float = 0.0

    def value(self, x):
        return float(0.5 * x @ self.Q @ x + self.q @ x + self.c)

    def grad(self, x):
        return self.Q @ x + self.q

    def hess(self, x):
        return self.Q

    def to_dict(self, linear_key="q", const_key="c"):
        return {"Q": self.Q.tolist(), linear_key: self.q.tolist(), const_key: self.c}


@dataclass(frozen=True)
class PolynomialPart:
    coefs: np.ndarray
    powers: np.ndarray  # (terms, n) nonnegative integers

    def value(self, x):
        return float(self.coefs @ np.prod(x[None, :] ** self.powers, axis=1))

    def grad(self, x):
        n = x.size
        g = np.zeros(n)
        for c, pw in zip(self.coefs, self.powers):
            for j in range(n):
                if pw[j]:
                    d = pw.copy()
                    d[j] -= 1
                    g[j] += c * pw[j] * np.prod(x ** d)
        return g

    def hess(self, x):
        n = x.size
        H = np.zeros((n, n))
        for c, pw in zip(self.coefs, self.powers):
            for i in range(n):
                for j in range(n):
                    d = pw.copy()
                    f = d[i]
                    d[i] -= 1
                    f *= d[j]
                    d[j] -= 1
                    if f and np.all(d >= 0):
                        H[i, j] += c * f * np.prod(x ** d)
        return H

    def to_dict(self):
        return {"terms": [{"coef": float(c), "powers": pw.tolist()} for c, pw in zip(self.coefs, self.powers)]}


def _phi_from_doc(doc, n):
    path = "phi"
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: expected an object")
    if "terms" in doc:
        coefs, powers = [], []
        for k, t in enumerate(doc["terms"]):
            pw = np.asarray(t.get("powers", []), dtype=int)
            if pw.shape != (n,) or np.any(pw < 0):
                raise SchemaError(f"{path}.terms[{k}].powers: expected {n} nonnegative integers")
            coefs.append(float(t["coef"]))
            powers.append(pw)
        return PolynomialPart(np.array(coefs), np.array(powers).reshape(-1, n))
    Q = _symmetric(_array(doc, "Q", (n, n), path), f"{path}.Q") if "Q" in doc else np.zeros((n, n))
    q = _array(doc, "q", (n,), path) if "q" in doc else np.zeros(n)
    return QuadraticPart(Q, q, float(doc.get("c", 0.0)))


def _Phi_from_doc(items, n, m):
    if not isinstance(items, list) or len(items) != m:
        raise SchemaError(f"Phi: expected a list of {m} components")
    parts = []
    for i, it in enumerate(items):
        path = f"Phi[{i}]"
        Q = _symmetric(_array(it, "Q", (n, n), path), f"{path}.Q") if "Q" in it else np.zeros((n, n))
        a = _array(it, "a", (n,), path)
        parts.append(QuadraticPart(Q, a, float(it.get("b", 0.0))))
    return parts


def make_oracle(phi, Phi_parts) -> SmoothOracle:
    """Exact derivative oracle for a smooth part and a list of quadratic components."""
    Qs = np.array([c.Q for c in Phi_parts])
    A = np.array([c.q for c in Phi_parts])
    b = np.array([c.c for c in Phi_parts])
    return SmoothOracle(
        phi=phi.value,
        grad_phi=phi.grad,
        hess_phi=phi.hess,
        Phi=lambda x: 0.5 * np.einsum("kij,i,j->k", Qs, x, x) + A @ x + b,
        jac_Phi=lambda x: Qs @ x + A,
        hess_Phi_contract=lambda x, mu: np.einsum("k,kij->ij", mu, Qs),
    )


def check_oracle(oracle: SmoothOracle, n: int, seed: int = 0, points: int = 5, h: float = 1e-6) -> None:
    """Finite-difference check of gradient and Jacobian at random points."""
    rng = np.random.default_rng(seed)
    for _ in range(points):
        x = rng.standard_normal(n)
        fd = np.array([(oracle.phi(x + h * e) - oracle.phi(x - h * e)) / (2 * h) for e in np.eye(n)])
        g = oracle.grad_phi(x)
        if np.linalg.norm(fd - g) > 1e-5 * (1 + np.linalg.norm(g)):
            raise SchemaError("phi: gradient does not match finite differences")
        J = oracle.jac_Phi(x)
        fdJ = np.array([(oracle.Phi(x + h * e) - oracle.Phi(x - h * e)) / (2 * h) for e in np.eye(n)]).T
        if np.linalg.norm(fdJ - J) > 1e-5 * (1 + np.linalg.norm(J)):
            raise SchemaError("Phi: Jacobian does not match finite differences")


def load_problem(doc: dict, name: str = "", validate: bool = True) -> CompositeProblem:
    """Build a :class:`CompositeProblem` from a problem document."""
    try:
        n, m = int(doc["n"]), int(doc["m"])
    except KeyError as exc:
        raise SchemaError(f"{exc.args[0]}: missing") from None
    if n < 1 or m < 1:
        raise SchemaError("n, m: must be positive")
    if "phi" not in doc:
        raise SchemaError("phi: missing")
    phi = _phi_from_doc(doc["phi"], n)
    Phi_parts = _Phi_from_doc(doc.get("Phi"), n, m)
    try:
        g = outer_from_dict(doc["g"])
    except KeyError as exc:
        raise SchemaError(f"g.{exc.args[0]}: missing") from None
    except ValueError as exc:
        raise SchemaError(f"g: {exc}") from None
    if g.dim != m:
        raise SchemaError(f"g: dimension {g.dim} does not match m = {m}")
    th = doc.get("theta")
    if th is None:
        theta = AffineSet.whole_space(n)
    else:
        B = np.asarray(th.get("B", []), float)
        if B.size and (B.ndim != 2 or B.shape[1] != n):
            raise SchemaError(f"theta.B: expected {n} columns")
        try:
            theta = AffineSet(B.reshape(-1, n) if B.size else np.zeros((0, n)), th.get("b", []), n)
        except ValueError as exc:
            raise SchemaError(f"theta: {exc}") from None
    if "s" in doc and int(doc["s"]) != theta.s:
        raise SchemaError(f"s: declared {doc['s']} but theta has {theta.s} rows")
    oracle = make_oracle(phi, Phi_parts)
    if validate:
        check_oracle(oracle, n)
    known = None
    ks = doc.get("known_solution")
    if ks is not None:
        x = _array(ks, "x", (n,), "known_solution")
        lam = _array(ks, "lambda", (m,), "known_solution") if "lambda" in ks else None
        Lam = Polyhedron.from_dict(ks["multiplier_set"]) if "multiplier_set" in ks else None
        known = KnownSolution(x, lam, Lam)
    p = CompositeProblem(oracle, g, theta, n, m, known, name)
    # keep the source so the problem can be written back out
    object.__setattr__(p, "_doc", copy.deepcopy(doc))
    return p


def dump_problem(p: CompositeProblem) -> dict:
    """Document for a problem built by :func:`load_problem` or :func:`builtin`."""
    doc = getattr(p, "_doc", None)
    if doc is None:
        raise ValueError("only schema-backed problems can be serialized")
    return copy.deepcopy(doc)


# ---------------------------------------------------------------------------
# built-in library
# ---------------------------------------------------------------------------

def _orthant_doc(s, m):
    return {"kind": "orthant", "s": s, "m": m}


BUILTIN_DOCS = {
    # 0.5 (x - 3)^2 + |x|, solution x = 2 with multiplier 1
    "lasso1d": {
        "n": 1, "m": 1,
        "phi": {"Q": [[1.0]], "q": [-3.0], "c": 4.5},
        "Phi": [{"a": [1.0]}],
        "g": {"kind": "l1", "m": 1},
        "known_solution": {"x": [2.0], "lambda": [1.0]},
    },
    # x1^2 - x2 s.t. x2 <= 0 stated twice; multipliers form a segment
    "degen2d": {
        "n": 2, "m": 2,
        "phi": {"Q": [[2.0, 0.0], [0.0, 0.0]], "q": [0.0, -1.0]},
        "Phi": [{"a": [0.0, 1.0]}, {"a": [0.0, 1.0]}],
        "g": _orthant_doc(0, 2),
        "known_solution": {"x": [0.0, 0.0], "lambda": [0.5, 0.5]},
    },
    # (x - 1)^2 + max(x, -x)
    "minimax1d": {
        "n": 1, "m": 2,
        "phi": {"Q": [[2.0]], "q": [-2.0], "c": 1.0},
        "Phi": [{"a": [1.0]}, {"a": [-1.0]}],
        "g": {"kind": "max", "m": 2},
        "known_solution": {"x": [0.5], "lambda": [1.0, 0.0]},
    },
    # ||x||^2 + ||x||_1 on x1 + x2 = 1
    "affine_l1": {
        "n": 2, "m": 2,
        "phi": {"Q": [[2.0, 0.0], [0.0, 2.0]], "q": [0.0, 0.0]},
        "Phi": [{"a": [1.0, 0.0]}, {"a": [0.0, 1.0]}],
        "g": {"kind": "l1", "m": 2},
        "theta": {"B": [[1.0, 1.0]], "b": [1.0]},
        "known_solution": {"x": [0.5, 0.5], "lambda": [1.0, 1.0]},
    },
    # 0.5 ||x - (1.5, 0.5)||^2 + sup_{y in [0,1]x[-1,1]} <x, y> - 0.5 y1^2
    "elq1": {
        "n": 2, "m": 2,
        "phi": {"Q": [[1.0, 0.0], [0.0, 1.0]], "q": [-1.5, -0.5], "c": 1.25},
        "Phi": [{"a": [1.0, 0.0]}, {"a": [0.0, 1.0]}],
        "g": {
            "kind": "elq",
            "B": [[1.0, 0.0], [0.0, 0.0]],
            "C": Polyhedron.box([0.0, -1.0], [1.0, 1.0]).to_dict(),
        },
        "known_solution": {"x": [0.75, 0.0], "lambda": [0.75, 0.5]},
    },
    # -x^2 s.t. x <= 0: KKT at the origin but no second-order sufficiency
    "sosc_fail": {
        "n": 1, "m": 1,
        "phi": {"Q": [[-2.0]], "q": [0.0]},
        "Phi": [{"a": [1.0]}],
        "g": _orthant_doc(0, 1),
        "known_solution": {"x": [0.0], "lambda": [0.0]},
    },
}

BUILTIN_IDS = tuple(BUILTIN_DOCS)


def builtin(name: str) -> CompositeProblem:
    """One of the built-in problems (see :data:`BUILTIN_IDS`)."""
    if name not in BUILTIN_DOCS:
        raise KeyError(f"unknown builtin problem {name!r}; choose from {', '.join(BUILTIN_IDS)}")
    p = load_problem(BUILTIN_DOCS[name], name=name)
    if p.known_solution.multiplier_set is None:
        ks = p.known_solution
        Lam = multiplier_set(p, ks.x)
        object.__setattr__(p, "known_solution", KnownSolution(ks.x, ks.lam, Lam))
    return p
