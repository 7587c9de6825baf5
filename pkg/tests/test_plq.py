import numpy as np
import pytest
from hypothesis import given, strategies as st

from plqalm.plq import (
    DomainError,
    EnumerationCapError,
    InfeasibleError,
    PlqFunction,
    PlqPiece,
    Polyhedron,
    cone_generators,
    critical_cone,
    normal_cone,
    normal_cone_contains,
    plq_active_pieces,
    plq_consistency_probe,
    plq_convexity_probe,
    plq_critical_cone_contains,
    plq_eval,
    plq_second_subderivative,
    plq_subdifferential_contains,
    polar_cone,
    polyhedron_project,
    separable_sum,
    solve_qp,
    subdifferential_polyhedron,
    tangent_cone,
)

from catalog import catalog_with_views


def abs_value():
    neg = Polyhedron.from_lists(1, [([1.0], 0.0)])
    pos = Polyhedron.from_lists(1, [([-1.0], 0.0)])
    return PlqFunction((PlqPiece(neg, [[0.0]], [-1.0]), PlqPiece(pos, [[0.0]], [1.0])))


def indicator_zero():
    return PlqFunction((PlqPiece(Polyhedron.from_lists(1, [], [([1.0], 0.0)]), [[0.0]], [0.0]),))


def square():
    return PlqFunction((PlqPiece(Polyhedron.whole_space(1), [[2.0]], [0.0]),))


# -- evaluation ---------------------------------------------------------------

def test_eval_examples():
    assert plq_eval(abs_value(), [-2.0]) == 2.0
    assert plq_eval(abs_value(), [0.0]) == 0.0
    assert plq_eval(indicator_zero(), [1.0]) == np.inf


def test_active_pieces():
    assert plq_active_pieces(abs_value(), [0.0]) == [0, 1]
    assert plq_active_pieces(abs_value(), [3.0]) == [1]
    assert plq_active_pieces(square(), [7.0]) == [0]
    with pytest.raises(DomainError):
        plq_active_pieces(indicator_zero(), [1.0])


def test_subdifferential_membership():
    g = abs_value()
    assert plq_subdifferential_contains(g, [0.0], [0.5])
    assert not plq_subdifferential_contains(g, [0.0], [1.5])
    assert plq_subdifferential_contains(square(), [3.0], [6.0])
    assert not plq_subdifferential_contains(square(), [3.0], [5.0])


def test_critical_cone_examples():
    g = abs_value()
    assert plq_critical_cone_contains(g, [2.0], [1.0], [-7.0])
    assert plq_critical_cone_contains(g, [0.0], [1.0], [1.0])
    assert not plq_critical_cone_contains(g, [0.0], [1.0], [-1.0])
    assert not plq_critical_cone_contains(g, [0.0], [0.5], [1.0])
    assert plq_critical_cone_contains(g, [0.0], [0.5], [0.0])
    with pytest.raises(DomainError):
        plq_critical_cone_contains(g, [0.0], [2.0], [1.0])


def test_second_subderivative_examples():
    g = abs_value()
    assert plq_second_subderivative(g, [0.0], [1.0], [1.0]) == 0.0
    assert plq_second_subderivative(g, [0.0], [0.5], [1.0]) == np.inf
    for z in (-1.0, 0.0, 2.5):
        assert plq_second_subderivative(square(), [z], [2 * z], [1.0]) == pytest.approx(2.0)


# -- polyhedra ----------------------------------------------------------------

def test_projection_examples():
    half = Polyhedron.from_lists(2, [([1.0, 1.0], 1.0)])
    np.testing.assert_allclose(polyhedron_project(half, [2.0, 2.0]), [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(polyhedron_project(half, [-1.0, 0.3]), [-1.0, 0.3])
    origin = Polyhedron.from_lists(2, [], [([1.0, 0.0], 0.0), ([0.0, 1.0], 0.0)])
    np.testing.assert_allclose(polyhedron_project(origin, [4.0, -3.0]), [0.0, 0.0], atol=1e-12)


def test_projection_infeasible():
    empty = Polyhedron.from_lists(1, [([1.0], -1.0), ([-1.0], -1.0)])
    with pytest.raises(InfeasibleError):
        polyhedron_project(empty, [0.0])
    assert not empty.is_feasible()


def test_cone_examples():
    neg = Polyhedron.from_lists(1, [([1.0], 0.0)])
    T = tangent_cone(neg, [0.0])
    assert T.contains([-3.0]) and not T.contains([1.0])
    assert normal_cone_contains(neg, [0.0], [1.0])
    assert not normal_cone_contains(neg, [0.0], [-1.0])
    hyper = Polyhedron.from_lists(2, [], [([1.0, 0.0], 0.0)])
    N = normal_cone(hyper, [0.0, 0.0])
    assert N.contains([5.0, 0.0]) and N.contains([-2.0, 0.0]) and not N.contains([0.0, 1.0])
    N = normal_cone(Polyhedron.whole_space(2), [1.0, 2.0])
    assert N.contains([0.0, 0.0]) and not N.contains([1e-3, 0.0])


def test_critical_cone_of_box_face():
    box = Polyhedron.box([0.0, 0.0], [1.0, 1.0])
    K = critical_cone(box, [1.0, 0.5], [2.0, 0.0])
    # tangent {w1 <= 0} intersected with {2 w1 = 0}
    assert K.contains([0.0, 3.0]) and K.contains([0.0, -3.0]) and not K.contains([-1.0, 0.0])


def test_cone_generators_and_polar():
    orthant = Polyhedron.from_lists(2, [([-1.0, 0.0], 0.0), ([0.0, -1.0], 0.0)])
    rays, lin = cone_generators(orthant)
    assert lin.shape[0] == 0
    assert sorted(map(tuple, np.round(rays / np.linalg.norm(rays, axis=1, keepdims=True), 12))) == [(0.0, 1.0), (1.0, 0.0)]
    P = polar_cone(orthant)
    assert P.contains([-1.0, -2.0]) and not P.contains([1.0, -2.0])
    line = Polyhedron.from_lists(2, [], [([0.0, 1.0], 0.0)])
    rays, lin = cone_generators(line)
    assert lin.shape[0] == 1 and rays.shape[0] == 0


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_projection_nonexpansive_and_idempotent(a, b):
    P = Polyhedron.from_lists(2, [([1.0, 1.0], 1.0), ([-1.0, 0.5], 0.5), ([0.0, -1.0], 2.0)])
    pa, pb = polyhedron_project(P, a), polyhedron_project(P, b)
    assert np.linalg.norm(pa - pb) <= np.linalg.norm(np.subtract(a, b)) + 1e-9
    np.testing.assert_allclose(polyhedron_project(P, pa), pa, atol=1e-9)
    assert P.contains(pa, 1e-9)


def test_solve_qp_and_cap():
    # min (v - 2)^2 on [0, 1]
    v = solve_qp(np.array([[2.0]]), np.array([-4.0]), Polyhedron.box([0.0], [1.0]))
    np.testing.assert_allclose(v, [1.0])
    many = Polyhedron.from_lists(1, [([1.0], float(k)) for k in range(19)])
    with pytest.raises(EnumerationCapError):
        solve_qp(np.eye(1), np.zeros(1), many)


def test_polyhedron_roundtrip():
    P = Polyhedron.from_lists(2, [([1.0, 2.0], 3.0)], [([0.0, 1.0], -1.0)])
    Q = Polyhedron.from_dict(P.to_dict())
    np.testing.assert_array_equal(P.C, Q.C)
    np.testing.assert_array_equal(P.beta, Q.beta)


# -- probes and invariants ----------------------------------------------------

def test_convexity_probe():
    assert plq_convexity_probe(abs_value())
    assert plq_convexity_probe(square())
    neg = Polyhedron.from_lists(1, [([1.0], 0.0)])
    pos = Polyhedron.from_lists(1, [([-1.0], 0.0)])
    bad = PlqFunction((PlqPiece(neg, [[2.0]], [0.0]), PlqPiece(pos, [[0.0]], [-1.0])))
    assert not plq_convexity_probe(bad, samples=400)


@pytest.mark.parametrize("label,g", catalog_with_views())
def test_catalog_views_are_consistent(label, g):
    assert plq_consistency_probe(g.plq_view, samples=20)
    rng = np.random.default_rng(0)
    for _ in range(20):
        z = 2 * rng.standard_normal(g.dim)
        assert plq_eval(g.plq_view, z) == pytest.approx(g.value(z), abs=1e-10)


@pytest.mark.parametrize("label,g", catalog_with_views())
def test_critical_cone_matches_normal_cone_of_subdifferential(label, g):
    view = g.plq_view
    rng = np.random.default_rng(1)
    for _ in range(15):
        piece = view.pieces[rng.integers(len(view.pieces))]
        z = np.round(polyhedron_project(piece.set, rng.integers(-2, 3, g.dim).astype(float)) * 2) / 2
        if not np.isfinite(plq_eval(view, z)):
            continue
        S = subdifferential_polyhedron(view, z)
        v = polyhedron_project(S, rng.standard_normal(g.dim))
        for _ in range(5):
            w = rng.integers(-1, 2, g.dim).astype(float)
            assert plq_critical_cone_contains(view, z, v, w) == normal_cone_contains(S, v, w), (z, v, w)


def test_second_subderivative_is_positively_homogeneous():
    g = separable_sum([square(), abs_value()])
    z, v = np.array([1.0, 0.0]), np.array([2.0, 1.0])
    for w in ([1.0, 2.0], [-0.5, 0.3]):
        base = plq_second_subderivative(g, z, v, w)
        assert plq_second_subderivative(g, z, v, 3.0 * np.asarray(w)) == pytest.approx(9.0 * base)


def test_separable_sum_values():
    g = separable_sum([abs_value(), square()])
    assert plq_eval(g, [-2.0, 3.0]) == pytest.approx(2.0 + 9.0)
    assert len(g.pieces) == 2


def test_plq_function_roundtrip():
    g = abs_value()
    h = PlqFunction.from_dict(g.to_dict())
    for z in (-1.5, 0.0, 2.0):
        assert plq_eval(h, [z]) == plq_eval(g, [z])
