import math

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from refgames.errors import InvalidDomain, NonPositiveScale, SegmentDomain
from refgames.geometry import (
    FeasibleSet,
    affine_transform,
    clip_halfplane,
    clip_polygon,
    extract_pareto_boundary,
    is_symmetric,
    pareto_distance,
    polygon_area,
    quadrant_mask,
    quadrant_membership,
    resolve_domain,
    sample_uniform,
)

TRIANGLE = [(0, 0), (1, 0), (0, 1)]
SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]
PENTAGON = [(0, 0), (1, 0), (1, 0.5), (0.5, 1), (0, 1)]


def hull_polygon(points):
    pts = np.asarray(points)
    hull = ConvexHull(pts)
    return FeasibleSet.polygon(pts[hull.vertices])


convex_polygons = st.lists(
    st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=3, max_size=12
).filter(lambda pts: _hull_ok(pts)).map(hull_polygon)


def _hull_ok(pts):
    try:
        poly = hull_polygon(pts)
    except Exception:
        return False
    return poly.area > 1e-2


class TestConstruction:
    def test_clockwise_input_is_reoriented(self):
        poly = FeasibleSet.polygon(TRIANGLE[::-1])
        assert polygon_area(poly.vertices) == pytest.approx(0.5)

    def test_rejects_nonconvex(self):
        with pytest.raises(InvalidDomain):
            FeasibleSet.polygon([(0, 0), (2, 0), (1, 0.2), (2, 2), (0, 2)])

    def test_rejects_collinear_and_duplicates(self):
        with pytest.raises(InvalidDomain):
            FeasibleSet.polygon([(0, 0), (1, 1), (2, 2)])
        with pytest.raises(InvalidDomain):
            FeasibleSet.polygon([(0, 0), (1, 0), (1, 0), (0, 1)])
        with pytest.raises(InvalidDomain):
            FeasibleSet.segment((1, 1), (1, 1))

    def test_json_round_trip(self, tmp_path):
        poly = FeasibleSet.polygon(PENTAGON)
        assert FeasibleSet.from_json(poly.to_json()) == poly
        path = tmp_path / "seg.json"
        path.write_text('{"kind":"segment","endpoints":[[0,0],[1,-1]]}')
        assert resolve_domain(str(path)) == FeasibleSet.segment((0, 0), (1, -1))
        with pytest.raises(InvalidDomain):
            resolve_domain("no-such-domain")


class TestPareto:
    def test_triangle(self):
        b = extract_pareto_boundary(FeasibleSet.polygon(TRIANGLE))
        assert b.chain == ((1.0, 0.0), (0.0, 1.0))
        assert b.lipschitz_lambda == 1.0

    def test_square_is_single_point(self):
        assert extract_pareto_boundary(FeasibleSet.polygon(SQUARE)).chain == ((1.0, 1.0),)

    def test_pentagon(self):
        b = extract_pareto_boundary(FeasibleSet.polygon(PENTAGON))
        assert b.chain == ((1.0, 0.5), (0.5, 1.0))
        assert b.lipschitz_lambda == 1.0

    def test_segment_rejected(self):
        with pytest.raises(SegmentDomain):
            extract_pareto_boundary(FeasibleSet.segment((0, 0), (1, -1)))

    def test_lambda_bounds_slopes(self):
        b = extract_pareto_boundary(resolve_domain("asymmetric"))
        assert b.chain == ((2.0, 0.0), (0.0, 1.0))
        assert b.lipschitz_lambda == pytest.approx(2.0)

    @settings(max_examples=60, deadline=None)
    @given(convex_polygons)
    def test_chain_is_undominated_and_monotone(self, poly):
        chain = np.asarray(extract_pareto_boundary(poly).chain)
        assert np.all(np.diff(chain[:, 0]) <= 1e-12)
        assert np.all(np.diff(chain[:, 1]) >= -1e-12)
        verts = np.asarray(poly.vertices)
        for p in chain:
            dominated = (verts[:, 0] > p[0] + 1e-12) & (verts[:, 1] > p[1] + 1e-12)
            assert not dominated.any()

    @settings(max_examples=40, deadline=None)
    @given(
        convex_polygons,
        st.tuples(st.floats(0.1, 5), st.floats(0.1, 5)),
        st.tuples(st.floats(-3, 3), st.floats(-3, 3)),
    )
    def test_extraction_commutes_with_affine_maps(self, poly, scale, shift):
        mapped_chain = [(scale[0] * x + shift[0], scale[1] * y + shift[1]) for x, y in extract_pareto_boundary(poly).chain]
        chain_of_image = extract_pareto_boundary(affine_transform(poly, scale, shift)).chain
        np.testing.assert_allclose(chain_of_image, mapped_chain, atol=1e-12, rtol=0)

    def test_distance_examples(self):
        tri = extract_pareto_boundary(FeasibleSet.polygon(TRIANGLE))
        assert pareto_distance((0.5, 0.5), tri) == pytest.approx(0.0, abs=1e-15)
        assert pareto_distance((0, 0), tri) == pytest.approx(math.sqrt(2) / 2)
        pent = extract_pareto_boundary(FeasibleSet.polygon(PENTAGON))
        assert pareto_distance((0.75, 0.75), pent) == pytest.approx(0.0, abs=1e-15)

    def test_distance_matches_shapely(self):
        b = extract_pareto_boundary(FeasibleSet.polygon(PENTAGON))
        line = shapely.LineString(b.chain)
        pts = np.random.default_rng(3).random((200, 2))
        expected = [line.distance(shapely.Point(p)) for p in pts]
        np.testing.assert_allclose(b.distance(pts), expected, atol=1e-12)


class TestQuadrants:
    @pytest.mark.parametrize(
        "point, spec, expected",
        [((0.5, 0.5), (">", ">"), True), ((0.3, 0.5), (">", ">"), False), ((0.3, 0.5), ("≥", ">"), True)],
    )
    def test_membership(self, point, spec, expected):
        assert quadrant_membership(point, (0.3, 0.3), spec) is expected

    def test_four_quadrants_partition(self):
        pts = sample_uniform(FeasibleSet.polygon(PENTAGON), np.random.default_rng(0), 50_000)
        origin = (0.4, 0.55)
        counts = [quadrant_mask(pts, origin, s).sum() for s in ((">", ">"), ("<=", ">"), (">", "<="), ("<=", "<="))]
        assert sum(counts) == len(pts)


class TestSampling:
    def test_segment_parameter(self):
        seg = FeasibleSet.segment((0, 0), (1, -1))
        np.testing.assert_array_equal(seg.point_from_uniforms(0.25), [0.25, -0.25])

    def test_triangle_mean(self):
        pts = sample_uniform(FeasibleSet.polygon(TRIANGLE), np.random.default_rng(1), 1_000_000)
        np.testing.assert_allclose(pts.mean(axis=0), [1 / 3, 1 / 3], atol=0.002)

    def test_square_corner_mass(self):
        pts = sample_uniform(FeasibleSet.polygon(SQUARE), np.random.default_rng(2), 1_000_000)
        frac = np.mean((pts[:, 0] <= 0.5) & (pts[:, 1] <= 0.5))
        assert frac == pytest.approx(0.25, abs=0.002)

    @pytest.mark.parametrize("verts", [PENTAGON, [(0, 0), (3, 0), (3.5, 1), (2, 2.5), (0.2, 1.5)]])
    def test_quadrant_masses_match_clipped_areas(self, verts):
        poly = FeasibleSet.polygon(verts)
        n = 200_000
        pts = sample_uniform(poly, np.random.default_rng(4), n)
        x0, y0, x1, y1 = poly.bounds()
        origin = (0.5 * (x0 + x1), 0.4 * y0 + 0.6 * y1)
        box = [origin, (x1 + 1, origin[1]), (x1 + 1, y1 + 1), (origin[0], y1 + 1)]
        exact = polygon_area(clip_polygon(poly.vertices, box)) / poly.area
        emp = quadrant_mask(pts, origin, (">", ">")).mean()
        assert abs(emp - exact) <= 4 * math.sqrt(exact * (1 - exact) / n)

    def test_samples_inside(self):
        poly = FeasibleSet.polygon([(0, 0), (3, 0), (3.5, 1), (2, 2.5), (0.2, 1.5)])
        pts = sample_uniform(poly, np.random.default_rng(5), 2000)
        assert all(poly.contains(p) for p in pts)


class TestAffine:
    def test_examples(self):
        tri = FeasibleSet.polygon(TRIANGLE)
        assert set(affine_transform(tri, (2, 3), (0, 1)).vertices) == {(0, 1), (2, 1), (0, 4)}
        assert affine_transform(tri, (1, 1), (0, 0)) == tri
        seg = affine_transform(FeasibleSet.segment((0, 0), (1, -1)), (1, 2), (0, 0))
        assert seg.endpoints == ((0, 0), (1, -2))

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(NonPositiveScale):
            affine_transform(FeasibleSet.polygon(TRIANGLE), (0, 1), (0, 0))


class TestSymmetry:
    def test_examples(self):
        assert is_symmetric(FeasibleSet.polygon(TRIANGLE))
        assert not is_symmetric(FeasibleSet.polygon([(0, 0), (2, 0), (0, 1)]))
        assert is_symmetric(FeasibleSet.polygon(SQUARE))


class TestClipping:
    @settings(max_examples=50, deadline=None)
    @given(convex_polygons, convex_polygons)
    def test_clip_area_matches_shapely(self, a, b):
        ours = clip_polygon(a.vertices, b.vertices)
        area = abs(polygon_area(ours)) if len(ours) >= 3 else 0.0
        ref = shapely.Polygon(a.vertices).intersection(shapely.Polygon(b.vertices)).area
        assert area == pytest.approx(ref, abs=1e-9)

    def test_halfplane(self):
        piece = clip_halfplane(SQUARE, (1, 1), 1.0)
        assert abs(polygon_area(piece)) == pytest.approx(0.5)
