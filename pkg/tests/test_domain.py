import math

import numpy as np
import pytest

from lpdens.domain import (AxisBox, ConvexPolygon2D, EstimationContext, Implicit, PolySector, RasterDomain,
                           default_rho, integrate_over, integrate_weighted, monomial_moments, neighborhood_mass,
                           sector_gram_entry, weight, weight_many)
from lpdens.errors import QuadratureFailure


def midpoint_mass(ctx, h, cells=1000):
    """Midpoint-rule oracle for W_h on a cells x cells grid over [-h, h]^2."""
    c = (np.arange(cells) + 0.5) / cells * 2 * h - h
    gx, gy = np.meshgrid(c, c, indexing="ij")
    U = np.column_stack([gx.ravel(), gy.ravel()])
    inside = ctx.domain.contains_many(U + ctx.t)
    return inside.sum() * (2 * h / cells) ** 2 * h ** -2


class TestContains:
    def test_sector(self):
        d = PolySector(2)
        assert d.contains([0.5, 0.25])
        assert not d.contains([0.5, 0.26])
        assert d.contains([0.0, 0.0]) and d.contains([1.0, 1.0])
        assert not d.contains([1.01, 0.5])

    def test_box(self, unit_square):
        assert unit_square.contains([0.5, 0.5])
        assert unit_square.contains([1.0, 0.0])
        assert not unit_square.contains([1.0 + 1e-12, 0.5])

    def test_dimension_mismatch(self, unit_square):
        with pytest.raises(ValueError):
            unit_square.contains([0.5, 0.5, 0.5])

    def test_box_needs_interior(self):
        with pytest.raises(ValueError):
            AxisBox([0, 0], [1, 0])

    def test_polygon_orientation_and_collinearity(self):
        sq = [[0, 0], [1, 0], [1, 1], [0, 1]]
        ConvexPolygon2D(np.array(sq, dtype=float))
        with pytest.raises(ValueError):
            ConvexPolygon2D(np.array(sq[::-1], dtype=float))
        with pytest.raises(ValueError):
            ConvexPolygon2D(np.array([[0, 0], [0.5, 0], [1, 0], [1, 1]], dtype=float))

    def test_raster_closed_pixels(self):
        r = RasterDomain(np.array([[1, 0], [0, 1]], dtype=bool), 0, 2, 0, 2)
        assert r.contains([0.5, 0.5]) and r.contains([1.5, 1.5])
        assert not r.contains([1.5, 0.5])
        assert r.contains([1.0, 1.0])  # shared corner
        assert r.contains([1.0, 0.5])  # right edge of the bottom-left pixel

    def test_implicit(self):
        disk = Implicit(lambda x: x[0] ** 2 + x[1] ** 2 <= 1, AxisBox([-1, -1], [1, 1]))
        assert disk.contains([0.0, 0.0]) and not disk.contains([0.9, 0.9])


class TestWeight:
    def test_box_examples(self, center_ctx):
        assert weight(center_ctx, 0.1, [0, 0]) == pytest.approx(100)
        assert weight(center_ctx, 0.1, [0.2, 0]) == 0
        assert weight(center_ctx, 0.1, [0.1, -0.1]) == pytest.approx(100)

    def test_sector_example(self, sector_ctx):
        assert weight(sector_ctx(2), 0.5, [0.4, 0.1]) == 4

    def test_many_matches_single(self, sector_ctx, rng):
        ctx = sector_ctx(2)
        U = rng.uniform(-0.3, 0.3, (200, 2))
        np.testing.assert_array_equal(weight_many(ctx, 0.25, U), [weight(ctx, 0.25, u) for u in U])

    def test_bandwidth_above_rho_rejected(self, center_ctx):
        with pytest.raises(ValueError):
            weight(center_ctx, 0.5, [0, 0])


class TestNeighborhoodMass:
    def test_sector_half_bandwidth_value(self, sector_ctx):
        assert neighborhood_mass(sector_ctx(2), 0.5) == pytest.approx(0.5 / 3, rel=1e-15)

    def test_box_interior(self, center_ctx):
        assert neighborhood_mass(center_ctx, 0.1) == 4

    def test_box_corner_against_midpoint_oracle(self, unit_square):
        ctx = EstimationContext(unit_square, [0.0, 0.0])
        closed = neighborhood_mass(ctx, 0.1)
        quad = neighborhood_mass(ctx, 0.1, method="quadrature")
        oracle = midpoint_mass(ctx, 0.1)
        assert closed == pytest.approx(1.0, rel=1e-14)
        assert quad == pytest.approx(1.0, rel=1e-10)
        assert oracle == pytest.approx(1.0, rel=1e-2)

    @pytest.mark.parametrize("k", [1.5, 2.0, 2.1, 3.0])
    @pytest.mark.parametrize("h", [0.5, 0.2, 0.1, 0.05])
    def test_sector_quadrature_matches_closed_form(self, sector_ctx, k, h):
        ctx = sector_ctx(k)
        exact = h ** (k - 1) / (k + 1)
        assert abs(neighborhood_mass(ctx, h, method="quadrature") - exact) <= 1e-8 * exact

    def test_sector_against_midpoint_oracle(self, sector_ctx):
        ctx = sector_ctx(2.1)
        h = 0.3
        assert midpoint_mass(ctx, h) == pytest.approx(neighborhood_mass(ctx, h), rel=5e-3)

    def test_polygon_and_raster_against_midpoint(self):
        tri = ConvexPolygon2D(np.array([[0, 0], [1, 0], [0.2, 0.9]]))
        ctx = EstimationContext(tri, [0.3, 0.2])
        assert neighborhood_mass(ctx, 0.3) == pytest.approx(midpoint_mass(ctx, 0.3), rel=5e-3)
        bits = np.array([[1, 1, 0, 1], [1, 0, 0, 1], [1, 1, 1, 1]], dtype=bool)
        ras = RasterDomain(bits, 0, 1, 0, 0.75)
        ctx = EstimationContext(ras, [0.1, 0.3])
        assert neighborhood_mass(ctx, 0.3) == pytest.approx(midpoint_mass(ctx, 0.3), rel=5e-3)

    @pytest.mark.parametrize("dom,t,trend", [
        (AxisBox([0, 0], [1, 1]), [0.0, 0.3], -1),
        (ConvexPolygon2D(np.array([[0, 0], [1, 0], [0.2, 0.9]])), [0.3, 0.2], -1),
        (PolySector(2.0), [0.0, 0.0], 1),
        (PolySector(1.5), [0.0, 0.0], 1),
    ])
    def test_bounded_and_monotone(self, dom, t, trend):
        # raw mass h^d W_h grows with h everywhere; normalised W_h shrinks on
        # domains star-shaped at t and grows on cusps
        ctx = EstimationContext(dom, t)
        hs = np.linspace(0.02, ctx.rho, 12)
        W = np.array([neighborhood_mass(ctx, h, method="quadrature") for h in hs])
        assert np.all((W >= 0) & (W <= 4 + 1e-12))
        raw = W * hs ** 2
        assert np.all(np.diff(raw) >= -1e-12)
        assert np.all(trend * np.diff(W) >= -1e-10)


class TestSectorGram:
    def test_closed_form_values(self):
        assert sector_gram_entry(2, 1.0, (0, 0), (0, 0)) == pytest.approx(1 / 3, rel=1e-15)
        assert sector_gram_entry(2, 0.5, (0, 0), (0, 0)) == pytest.approx(1 / 6, rel=1e-15)

    def test_k3_against_quadrature(self, sector_ctx):
        ctx = sector_ctx(3)
        expected = 1.0 / (2 * (0 + 3 * 2 + 1)) * 0.5 ** 4
        assert sector_gram_entry(3, 0.5, (0, 1), (0, 0)) == pytest.approx(expected, rel=1e-15)
        quad = integrate_weighted(ctx, 0.5, lambda U: U[:, 1] / 0.5, rtol=1e-10)
        assert quad == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("h", [0.5, 0.1])
    def test_all_low_order_entries(self, sector_ctx, h):
        from lpdens import polybasis

        ctx = sector_ctx(2.1)
        exps = polybasis.enumerate(2, 6).exps
        quad = monomial_moments(ctx, h, exps, method="quadrature")
        closed = monomial_moments(ctx, h, exps, method="closed")
        np.testing.assert_allclose(quad, closed, rtol=1e-6)
        b3 = polybasis.enumerate(2, 3).indices
        for a in b3:
            for b in b3:
                s = tuple(x + y for x, y in zip(a, b))
                j = polybasis.enumerate(2, 6).indices.index(s)
                assert sector_gram_entry(2.1, h, a, b) == closed[j]


class TestIntegrateWeighted:
    def test_constant_gives_mass(self, sector_ctx):
        ctx = sector_ctx(2.1)
        assert integrate_weighted(ctx, 0.2, lambda U: np.ones(len(U))) == pytest.approx(
            neighborhood_mass(ctx, 0.2), rel=1e-9)

    def test_sector_linear_monomial(self, sector_ctx):
        val = integrate_weighted(sector_ctx(2), 0.5, lambda U: U[:, 1] / 0.5)
        assert val == pytest.approx(1 / 10 * 0.5 ** 2, rel=1e-9)

    def test_odd_monomial_on_full_cube(self, center_ctx):
        assert abs(integrate_weighted(center_ctx, 0.2, lambda U: U[:, 0] / 0.2)) < 1e-14

    def test_linearity(self, sector_ctx):
        ctx = sector_ctx(2.1)
        g1 = lambda U: np.exp(U[:, 0]) + U[:, 1] ** 2  # noqa: E731
        g2 = lambda U: np.cos(3 * U[:, 0] * U[:, 1])  # noqa: E731
        i1 = integrate_weighted(ctx, 0.3, g1)
        i2 = integrate_weighted(ctx, 0.3, g2)
        i12 = integrate_weighted(ctx, 0.3, lambda U: g1(U) + g2(U))
        assert abs(i12 - i1 - i2) <= 1e-8 * (abs(i1) + abs(i2) + 1)

    def test_vector_integrand(self, sector_ctx):
        ctx = sector_ctx(2)
        both = integrate_weighted(ctx, 0.4, lambda U: np.column_stack([np.ones(len(U)), U[:, 0]]))
        assert both.shape == (2,)
        assert both[0] == pytest.approx(neighborhood_mass(ctx, 0.4), rel=1e-9)

    def test_deterministic(self, sector_ctx):
        ctx = sector_ctx(2.1)
        g = lambda U: np.sin(U[:, 0] * 7) ** 2  # noqa: E731
        assert integrate_weighted(ctx, 0.3, g) == integrate_weighted(ctx, 0.3, g)

    def test_implicit_disk_mass(self):
        disk = Implicit(lambda X: X[:, 0] ** 2 + X[:, 1] ** 2 <= 1, AxisBox([-1, -1], [1, 1]), vectorized=True)
        area = integrate_over(disk, lambda X: np.ones(len(X)))
        assert area == pytest.approx(math.pi, rel=1e-3)

    def test_depth_limit_raises(self, sector_ctx):
        with pytest.raises(QuadratureFailure):
            integrate_weighted(sector_ctx(2), 0.3, lambda U: np.where(U[:, 0] > 0.1234567, 1.0, 0.0),
                               rtol=1e-12, max_depth=2)


class TestContext:
    def test_default_rho(self, unit_square):
        assert default_rho(unit_square) == pytest.approx(math.exp(-1))
        assert default_rho(AxisBox([0, 0], [0.4, 1])) == pytest.approx(0.2)

    def test_t_outside_rejected(self):
        with pytest.raises(ValueError):
            EstimationContext(PolySector(2), [0.5, 0.5])

    def test_rho_range(self, unit_square):
        with pytest.raises(ValueError):
            EstimationContext(unit_square, [0.5, 0.5], rho=0.5)

    def test_zero_mass_neighbourhood_rejected(self):
        bits = np.array([[1, 0], [0, 1]], dtype=bool)
        with pytest.raises(ValueError):
            # an isolated corner point joins two pixels only at one point: still positive mass
            EstimationContext(RasterDomain(bits, 0, 1, 0, 1), [2.0, 2.0])
