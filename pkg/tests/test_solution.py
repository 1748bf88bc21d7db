import json
import math

import numpy as np
import pytest

from refgames.errors import DomainError, NotConverged, ScheduleTooShort
from refgames.geometry import FeasibleSet, affine_point, affine_transform, resolve_domain
from refgames.measure import GOLDEN_B, GridMeasure, b_eps
from refgames.solution import (
    QuantileTrack,
    axiom_report,
    concentration_point,
    default_step_cap,
    ref_solution,
    ternary_alternating_fixed_point,
    ternary_random_limit,
    track_quantiles,
)
from refgames.tree import AssignmentModel

TRIANGLE = FeasibleSet.polygon([(0, 0), (1, 0), (0, 1)])
SEGMENT = FeasibleSet.segment((0, 0), (1, -1))
RES = 128


class TestTracks:
    def test_random_triangle_tracks_are_symmetric(self):
        tr = track_quantiles(TRIANGLE, "random", 60, resolution=RES)
        np.testing.assert_allclose(tr.xs, tr.ys, atol=1e-12)
        assert not tr.parity

    def test_alternating_x_track_monotone(self):
        tr = track_quantiles(TRIANGLE, "alternating", 100, resolution=RES)
        assert tr.level == pytest.approx(GOLDEN_B)
        assert tr.is_monotone(1 / RES)

    def test_hybrid_level_is_b_eps(self):
        tr = track_quantiles(TRIANGLE, "hybrid:0.2", 4, resolution=RES)
        assert tr.level == b_eps(0.2).value

    def test_random_limit_is_efficient(self):
        tr = track_quantiles(TRIANGLE, "random", 200, resolution=RES)
        x, y = tr.limit()
        assert abs(x + y - 1) / math.sqrt(2) <= 2 * math.sqrt(2) / RES

    def test_segment_track_uses_cdf_engine(self):
        tr = track_quantiles(SEGMENT, "random", 10)
        # the random-controller law stays uniform, so the median stays put
        np.testing.assert_allclose(tr.xs, 0.5, atol=1e-12)
        np.testing.assert_allclose(tr.ys, -0.5, atol=1e-12)

    def test_parity_subsequences_and_csv(self):
        tr = QuantileTrack(0.5, np.arange(5), np.arange(5.0), -np.arange(5.0))
        assert list(tr.x_sequence()[0]) == [0, 2, 4]
        assert list(tr.y_sequence()[0]) == [1, 3]
        assert tr.limit() == (4.0, -3.0)
        assert tr.to_csv().splitlines()[:2] == ["step,x,y", "0,0.0,-0.0"]
        assert tr.max_decrease() == (0.0, 2.0)

    def test_bad_level(self):
        with pytest.raises(DomainError):
            track_quantiles(TRIANGLE, "random", 3, level=1.0, resolution=16)


class TestConcentrationPoint:
    def test_segment_alternating_is_golden(self):
        r = concentration_point(SEGMENT, "alternating")
        assert abs(r.point[0] - GOLDEN_B) <= 1 / 4096
        assert r.point[1] == -r.point[0]
        assert r.diagnostics["converged"]

    def test_segment_hybrid_quarter(self):
        r = concentration_point(SEGMENT, "hybrid:0.25")
        assert abs(r.point[0] - (math.sqrt(17) - 3) / 2) <= 1 / 4096

    def test_reversed_segment_orientation(self):
        # player 1 prefers the (0, 2) end here; same game up to relabelling the parameter
        seg = FeasibleSet.segment((2, 0), (0, 2))
        r = concentration_point(seg, "alternating")
        assert abs(r.point[0] - 2 * GOLDEN_B) <= 2 * 2 / 4096
        assert r.point[0] + r.point[1] == pytest.approx(2.0)

    def test_triangle_hybrid_is_efficient(self):
        r = concentration_point(TRIANGLE, "hybrid:0.1", resolution=RES)
        assert r.accepted
        assert r.pareto_gap <= 2 * r.cell_diagonal
        assert r.diagnostics["x_minus_y"] > 0
        assert r.diagnostics["box_mass_0_05"] >= 0.9

    def test_square_degenerate_frontier(self):
        r = concentration_point(resolve_domain("square"), "hybrid:0.1")
        assert r.point == (1.0, 1.0) and r.pareto_gap == 0.0

    def test_not_converged_carries_report(self):
        with pytest.raises(NotConverged) as info:
            concentration_point(TRIANGLE, "hybrid:0.05", steps=20, resolution=32)
        assert info.value.report is not None
        assert info.value.report.diagnostics["levels"] == 20

    def test_random_schedule_rejected(self):
        with pytest.raises(DomainError):
            concentration_point(TRIANGLE, "random", resolution=16)

    def test_step_cap_scales_with_eps(self):
        assert default_step_cap(AssignmentModel.alternating()) == 200
        assert default_step_cap(AssignmentModel.hybrid(0.025)) == 64000

    def test_argmax_invariance_under_affine_maps(self):
        image = affine_transform(TRIANGLE, (2, 3), (0, 1))
        p = concentration_point(TRIANGLE, "hybrid:0.2", resolution=RES).point
        q = concentration_point(image, "hybrid:0.2", resolution=RES).point
        np.testing.assert_allclose(q, affine_point(p, (2, 3), (0, 1)), atol=1e-9)

    def test_report_json(self):
        r = concentration_point(TRIANGLE, "alternating", resolution=32)
        doc = json.loads(r.to_json(include_track=True))
        assert doc["method"] == "alternating" and "track" in doc


class TestRef:
    def test_schedule_validation(self):
        with pytest.raises(ScheduleTooShort):
            ref_solution(SEGMENT, [0.1])
        with pytest.raises(DomainError):
            ref_solution(SEGMENT, [0.1, 0.2])
        with pytest.raises(DomainError):
            ref_solution(SEGMENT, [0.6, 0.1])

    def test_segment_tends_to_half(self):
        r = ref_solution(SEGMENT)
        xs = [p[0] for p in r.diagnostics["points"]]
        assert all(a > b for a, b in zip(xs, xs[1:]))
        assert abs(r.point[0] - 0.5) < 0.01
        assert r.diagnostics["cross_route_discrepancy"] < 0.02

    def test_triangle_low_resolution(self):
        r = ref_solution(TRIANGLE, [0.2, 0.1], resolution=64)
        assert math.dist(r.point, (0.5, 0.5)) < 0.05
        assert len(r.diagnostics["points"]) == 2

    def test_square(self):
        r = ref_solution(resolve_domain("square"))
        assert r.point == (1.0, 1.0)
        assert r.diagnostics["cross_route_discrepancy"] == 0.0


class TestAxioms:
    def test_square(self):
        rep = axiom_report(resolve_domain("square"))
        assert rep.efficiency_gap == 0.0 and rep.symmetry_gap == 0.0
        assert rep.scale_invariance_gap == pytest.approx(0.0, abs=1e-12)

    def test_asymmetric_has_no_symmetry_gap(self):
        dom = resolve_domain("asymmetric")
        rep = axiom_report(dom, eps_schedule=[0.2, 0.1], resolution=48)
        assert rep.symmetry_gap is None
        assert rep.to_dict()["symmetry_gap"] == "n/a"
        assert rep.scale_invariance_gap < 0.03

    def test_segment(self):
        rep = axiom_report(SEGMENT, eps_schedule=[0.2, 0.1])
        assert rep.scale_invariance_gap < 1e-3


class TestTernary:
    def test_fixed_point(self):
        r = ternary_alternating_fixed_point()
        assert abs(r.value - 0.68) <= 0.01
        assert abs(1 - (1 - r.value**3) ** 3 - r.value) <= 1e-12
        assert 0.05 < r.value < 0.95 and r.classification == "repelling"

    def test_random_limit_triangle(self):
        cells = ternary_random_limit(TRIANGLE, 200, 64)
        pts = sorted(p for p, _ in cells)
        assert math.dist(pts[0], (0, 1)) <= math.sqrt(2) / 64
        assert math.dist(pts[1], (1, 0)) <= math.sqrt(2) / 64
        assert all(abs(m - 0.5) <= 0.1 for _, m in cells)

    def test_point_mass_unchanged(self):
        pm = GridMeasure.point_mass((0, 0, 1, 1), (8, 8), (2, 6))
        (p, m), = ternary_random_limit(measure=pm, steps=5, count=1)
        assert m == pytest.approx(1.0) and p == (0.3125, 0.8125)
