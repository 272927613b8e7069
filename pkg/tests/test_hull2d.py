import logging
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpdens.domain import ConvexPolygon2D
from lpdens.errors import DegenerateHull
from lpdens.hull2d import SplitPlan, convex_hull_2d, estimate_unknown_domain, hull_vertices, retention, trapezoid_l1


def brute_force_hull(P):
    """Vertex set of the hull: endpoints of segments with every point weakly on their left.

    Orientation is evaluated in exact rational arithmetic.
    """
    P = np.unique(np.asarray(P, dtype=float), axis=0)
    Q = [(Fraction(x), Fraction(y)) for x, y in P]
    verts = set()
    for i, a in enumerate(Q):
        for j, b in enumerate(Q):
            if i == j:
                continue
            # cheap float rejection, far from the rounding threshold
            fd = P[j] - P[i]
            fc = fd[0] * (P[:, 1] - P[i, 1]) - fd[1] * (P[:, 0] - P[i, 0])
            if fc.min() < -1e-9 * (1 + np.abs(P).max() ** 2):
                continue
            dx, dy = b[0] - a[0], b[1] - a[1]
            crs = [dx * (q[1] - a[1]) - dy * (q[0] - a[0]) for q in Q]
            if min(crs) < 0:
                continue
            # collinear points must lie between a and b, so a and b are the extremes
            ok = all(0 <= dx * (q[0] - a[0]) + dy * (q[1] - a[1]) <= dx * dx + dy * dy
                     for q, c in zip(Q, crs) if c == 0)
            if ok:
                verts.add(tuple(P[i]))
                verts.add(tuple(P[j]))
    return verts


def random_fixture(rng, n):
    kind = rng.integers(3)
    if kind == 0:
        return rng.random((n, 2))
    if kind == 1:  # integer lattice: many collinear and duplicate points
        return rng.integers(0, 5, (n, 2)).astype(float)
    th = rng.random(n) * 2 * np.pi
    return np.column_stack([np.cos(th), np.sin(th)]) * rng.choice([1.0, 0.5], n)[:, None]


def test_against_brute_force(rng):
    done = 0
    while done < 200:
        P = random_fixture(rng, int(rng.integers(3, 51)))
        try:
            V = hull_vertices(P)
        except DegenerateHull:
            continue
        assert set(map(tuple, V)) == brute_force_hull(P)
        ConvexPolygon2D(V)  # validates CCW, strictly convex
        done += 1


def test_unit_square_with_interior_points(rng):
    P = np.vstack([[[0, 0], [1, 0], [1, 1], [0, 1]], rng.random((50, 2)) * 0.8 + 0.1, [[0.5, 0.0]]])
    hull = convex_hull_2d(P)
    assert set(map(tuple, hull.vertices)) == {(0, 0), (1, 0), (1, 1), (0, 1)}
    assert hull.area() == pytest.approx(1.0)


def test_triangle():
    P = np.array([[0, 0], [2, 0], [0, 1]], dtype=float)
    assert convex_hull_2d(P[::-1]).area() == pytest.approx(1.0)


def test_disk_area():
    rng = np.random.default_rng(8)
    th = rng.random(10 ** 4) * 2 * np.pi
    r = np.sqrt(rng.random(10 ** 4))
    area = convex_hull_2d(np.column_stack([r * np.cos(th), r * np.sin(th)])).area()
    assert math.pi * 0.95 <= area <= math.pi


def test_degenerate():
    with pytest.raises(DegenerateHull):
        hull_vertices([[0, 0], [1, 1], [2, 2], [3, 3]])
    with pytest.raises(DegenerateHull):
        hull_vertices([[0, 0], [0, 0], [1, 1]])


@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=3, max_size=40))
@settings(max_examples=100, deadline=None)
def test_hull_contains_all_points(pts):
    P = np.array(pts)
    try:
        hull = convex_hull_2d(P)
    except (DegenerateHull, ValueError):
        return
    A, B = hull.edges
    ex, ey = (B - A).T
    cr = ex[None, :] * (P[:, 1:2] - A[None, :, 1]) - ey[None, :] * (P[:, 0:1] - A[None, :, 0])
    assert np.all(cr >= -1e-9 * (1 + np.abs(P).max() ** 2))


class TestSplit:
    def test_prefix_split(self):
        plan = SplitPlan.make(10, 0.3)
        X = np.arange(20.0).reshape(10, 2)
        a, b = plan.parts(X)
        assert (plan.first_part_size, plan.second_part_size) == (7, 3)
        np.testing.assert_array_equal(np.vstack([a, b]), X)

    def test_rounding_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="lpdens.hull2d"):
            plan = SplitPlan.make(11, 0.5)
        assert plan.second_part_size in (5, 6)
        assert "not an integer" in caplog.text

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            SplitPlan.make(10, 1.0)


class TestUnknownDomain:
    def test_uniform_square(self):
        X = np.random.default_rng(21).random((10 ** 4, 2))
        est = estimate_unknown_domain(X, 0.5, [(0.5, 0.5), (1.5, 0.5)])
        inside, outside = est.points
        assert 0 <= est.p_hat <= 1
        assert abs(inside.f_hat - 1.0) <= 3 * math.sqrt(inside.report.selected.v_hat) * est.p_hat + 1e-12
        assert not outside.inside_hull and outside.f_hat == 0.0

    def test_all_retained(self):
        corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        rng = np.random.default_rng(2)
        X = np.vstack([corners, rng.random((96, 2)) * 0.9 + 0.05, rng.random((100, 2)) * 0.8 + 0.1])
        est = estimate_unknown_domain(X, 0.5, [(0.5, 0.5)])
        assert est.p_hat == 1.0

    def test_hull_covers_first_part_and_nested_monotone(self):
        rng = np.random.default_rng(4)
        X = rng.random((400, 2))
        est = estimate_unknown_domain(X, 0.5, [(0.5, 0.5)])
        assert est.hull.contains_many(X[:200]).all()
        full = convex_hull_2d(X)
        assert full.contains_many(est.hull.vertices).all()
        small = convex_hull_2d(X[:50])
        p_small, _ = retention(small, X[200:])
        p_big, _ = retention(est.hull, X[200:])
        assert p_small <= p_big

    def test_l1_diagnostic(self):
        xs = np.linspace(0, 1, 21)
        V = np.ones((21, 21))
        assert trapezoid_l1(xs, xs, V) == pytest.approx(1.0)
        assert trapezoid_l1(xs, xs, V, lambda P: np.ones(len(P))) == 0.0
