"""Concentration points, quantile tracks, the REF solution and axiom checks.

Polygon domains are handled by the 2D grid engine. Segment domains go
through the 1D engine: the segment is parametrised by ``t`` in [0, 1],
oriented so that player 1 prefers larger ``t``, and a node where player 1
moves takes the max of its children's ``t`` (player 2 the min when the
players' interests are opposed, the max otherwise).
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, NotConverged, ScheduleTooShort, SegmentDomain
from .geometry import (
    FeasibleSet,
    affine_point,
    affine_transform,
    extract_pareto_boundary,
    is_symmetric,
)
from .measure import (
    GOLDEN_B,
    CdfGrid,
    FixedPointReport,
    GridMeasure,
    RawPair,
    bisect,
    box_mass,
    evolve_grid,
    Mix,
    quantile_level,
    top_cells,
)
from .tree import AssignmentModel

DEFAULT_EPS_SCHEDULE = (0.2, 0.1, 0.05, 0.025)
DEFAULT_RESOLUTION = 512
DEFAULT_CDF_POINTS = 4096
DEFAULT_STEPS = 200
CONVERGENCE_TOL = 1e-6
PROBE_SCALE = (2.0, 3.0)
PROBE_SHIFT = (0.0, 1.0)


def default_step_cap(assignment: AssignmentModel) -> int:
    """Level cap for the concentration loop.

    The hybrid fixed point repels at rate about ``1 + 2 eps^2`` per two
    levels, so the levels needed to concentrate grow like ``1/eps^2``
    (roughly ``11/eps^2`` at 512 cells); the cap leaves a wide margin.
    """
    eps = assignment.eps
    if eps is None or eps <= 0.0 or eps >= 0.5:
        return DEFAULT_STEPS
    return max(DEFAULT_STEPS, int(math.ceil(40.0 / eps**2)))


def schedule_level(assignment: AssignmentModel) -> float:
    """Quantile level tracked for an assignment: b, b^eps or 1/2."""
    eps = assignment.eps
    if eps is None or eps <= 0.0:
        return 0.5
    if eps >= 0.5:
        return GOLDEN_B
    return quantile_level(eps)


def has_parity(assignment: AssignmentModel) -> bool:
    """True for the alternating and hybrid schedules (player 1 favoured at odd heights)."""
    return assignment.eps is not None and assignment.eps > 0.0


def as_assignment(schedule) -> AssignmentModel:
    if isinstance(schedule, AssignmentModel):
        return schedule
    return AssignmentModel.parse(str(schedule))


# -- reports -----------------------------------------------------------------


@dataclass
class QuantileTrack:
    """Marginal quantiles after every level.

    Both coordinates are recorded at every step; with ``parity`` set (the
    alternating and hybrid schedules) the x-sequence is read at even steps
    and the y-sequence at odd steps.
    """

    level: float
    steps: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    parity: bool = True

    def x_sequence(self) -> tuple[np.ndarray, np.ndarray]:
        sel = self.steps % 2 == 0 if self.parity else np.ones(len(self.steps), bool)
        return self.steps[sel], self.xs[sel]

    def y_sequence(self) -> tuple[np.ndarray, np.ndarray]:
        sel = self.steps % 2 == 1 if self.parity else np.ones(len(self.steps), bool)
        return self.steps[sel], self.ys[sel]

    def limit(self) -> tuple[float, float]:
        _, xs = self.x_sequence()
        _, ys = self.y_sequence()
        x = xs[-1] if len(xs) else self.xs[-1]
        y = ys[-1] if len(ys) else self.ys[-1]
        return float(x), float(y)

    def max_decrease(self) -> tuple[float, float]:
        """Largest step-to-step drop in the x- and y-sequences (0 if monotone)."""
        out = []
        for _, seq in (self.x_sequence(), self.y_sequence()):
            d = np.diff(seq)
            out.append(float(max(0.0, -d.min())) if len(d) else 0.0)
        return out[0], out[1]

    def is_monotone(self, slack: float) -> bool:
        return max(self.max_decrease()) <= slack

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("step,x,y\n")
        for s, x, y in zip(self.steps, self.xs, self.ys):
            buf.write(f"{int(s)},{float(x)!r},{float(y)!r}\n")
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "parity": self.parity,
            "steps": self.steps.tolist(),
            "x": self.xs.tolist(),
            "y": self.ys.tolist(),
        }


@dataclass
class SolutionReport:
    point: tuple[float, float]
    method: str
    pareto_gap: float
    diagnostics: dict = field(default_factory=dict)
    track: QuantileTrack | None = None
    measure: GridMeasure | CdfGrid | None = field(default=None, repr=False)

    @property
    def cell_diagonal(self) -> float:
        return float(self.diagnostics.get("cell_diagonal", 0.0))

    @property
    def accepted(self) -> bool:
        return self.pareto_gap <= 2.0 * self.cell_diagonal + 1e-12

    def to_dict(self, include_track: bool = False) -> dict:
        doc = {
            "point": list(self.point),
            "method": self.method,
            "pareto_gap": self.pareto_gap,
            "accepted": self.accepted,
            "diagnostics": self.diagnostics,
        }
        if include_track and self.track is not None:
            doc["track"] = self.track.to_dict()
        return doc

    def to_json(self, include_track: bool = False) -> str:
        return json.dumps(self.to_dict(include_track), indent=2, default=_json_default)


@dataclass
class AxiomReport:
    efficiency_gap: float
    symmetry_gap: float | None
    scale_invariance_gap: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "efficiency_gap": self.efficiency_gap,
            "symmetry_gap": "n/a" if self.symmetry_gap is None else self.symmetry_gap,
            "scale_invariance_gap": self.scale_invariance_gap,
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


# -- segment (1D) route ------------------------------------------------------


@dataclass(frozen=True)
class _OrientedSegment:
    start: np.ndarray
    direction: np.ndarray
    opposed: bool

    @classmethod
    def of(cls, domain: FeasibleSet) -> "_OrientedSegment":
        a, b = (np.asarray(p, float) for p in domain.endpoints)
        if a[0] == b[0] or a[1] == b[1]:
            raise SegmentDomain("axis-parallel segments leave one player indifferent; not supported")
        if b[0] < a[0]:
            a, b = b, a
        return cls(a, b - a, bool(b[1] < a[1]))

    def point(self, t: float) -> tuple[float, float]:
        p = self.start + t * self.direction
        return float(p[0]), float(p[1])

    def p_max(self, p1: float) -> float:
        # probability that the node takes the max of t
        return p1 if self.opposed else 1.0

    def quantiles(self, grid: CdfGrid, level: float) -> tuple[float, float]:
        """Player 1 and player 2 payoff quantiles at ``level``."""
        x = self.point(grid.quantile(level))[0]
        # player 2's payoff falls with t when opposed
        t2 = grid.quantile(1.0 - level) if self.opposed else grid.quantile(level)
        return x, self.point(t2)[1]


def _segment_run(domain, assignment, level, cap, tol, points, branching, stop):
    seg = _OrientedSegment.of(domain)
    grid = CdfGrid.uniform(points)
    steps, xs, ys = [0], [], []
    x, y = seg.quantiles(grid, level)
    xs.append(x)
    ys.append(y)
    prev_even = grid
    converged = False
    sup = float("nan")
    h = 0
    while h < cap:
        h += 1
        step_map = RawPair(seg.p_max(assignment.p1_at(h)), branching)
        grid = CdfGrid(grid.xs, np.maximum.accumulate(np.clip(step_map(grid.F), 0.0, 1.0)))
        x, y = seg.quantiles(grid, level)
        steps.append(h)
        xs.append(x)
        ys.append(y)
        if h % 2 == 0:
            sup = grid.sup_distance(prev_even)
            prev_even = grid
            if stop and sup < tol:
                converged = True
                break
    track = QuantileTrack(level, np.array(steps), np.array(xs), np.array(ys), parity=has_parity(assignment))
    return track, grid, converged, sup, h, seg


# -- polygon (2D) route ------------------------------------------------------


def _marginal_cdfs(mass: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    col = mass.sum(axis=1)
    row = mass.sum(axis=0)
    total = col.sum()
    return np.cumsum(col) / total, np.cumsum(row) / total


def _grid_quantile(cdf: np.ndarray, edges: np.ndarray, q: float) -> float:
    # same convention as measure.marginal_quantile, on a precomputed CDF
    j = min(int(np.searchsorted(cdf, q, side="left")), len(cdf) - 1)
    below = cdf[j - 1] if j > 0 else 0.0
    width = cdf[j] - below
    frac = (q - below) / width if width > 0 else 0.0
    return float(edges[j] + min(max(frac, 0.0), 1.0) * (edges[j + 1] - edges[j]))


def _grid_run(measure, assignment, level, cap, tol, branching, stop):
    xe, ye = measure.x_edges, measure.y_edges
    c1, c2 = _marginal_cdfs(measure.mass)
    steps, xs, ys = [0], [_grid_quantile(c1, xe, level)], [_grid_quantile(c2, ye, level)]
    prev_even = (c1, c2)
    converged = False
    sup = float("nan")
    h = 0
    cur = measure
    while h < cap:
        h += 1
        cur = evolve_grid(cur, Mix(assignment.p1_at(h)), branching)
        c1, c2 = _marginal_cdfs(cur.mass)
        steps.append(h)
        xs.append(_grid_quantile(c1, xe, level))
        ys.append(_grid_quantile(c2, ye, level))
        if h % 2 == 0:
            sup = float(max(np.max(np.abs(c1 - prev_even[0])), np.max(np.abs(c2 - prev_even[1]))))
            prev_even = (c1, c2)
            if stop and sup < tol:
                converged = True
                break
    track = QuantileTrack(level, np.array(steps), np.array(xs), np.array(ys), parity=has_parity(assignment))
    return track, cur, converged, sup, h


def evolve_tracked(
    measure: GridMeasure, schedule, steps: int, level: float | None = None, branching: int = 2
) -> tuple[QuantileTrack, GridMeasure]:
    """Evolve ``measure`` for ``steps`` levels, returning the track and the final measure."""
    assignment = as_assignment(schedule)
    level = schedule_level(assignment) if level is None else float(level)
    track, final, *_ = _grid_run(measure, assignment, level, steps, 0.0, branching, False)
    return track, final


def track_quantiles(
    domain: FeasibleSet,
    schedule,
    steps: int = DEFAULT_STEPS,
    level: float | None = None,
    resolution: int = DEFAULT_RESOLUTION,
    branching: int = 2,
    measure: GridMeasure | None = None,
) -> QuantileTrack:
    """Record marginal quantiles over ``steps`` levels of the schedule.

    ``level`` defaults to b (alternating), b^eps (hybrid) or 1/2 (random).
    """
    assignment = as_assignment(schedule)
    level = schedule_level(assignment) if level is None else float(level)
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    if domain.is_segment and measure is None:
        track, *_ = _segment_run(domain, assignment, level, steps, 0.0, _cdf_points(resolution), branching, False)
        return track
    if measure is None:
        measure = GridMeasure.from_domain(domain, resolution)
    track, *_ = _grid_run(measure, assignment, level, steps, 0.0, branching, False)
    return track


def _cdf_points(resolution: int) -> int:
    # the 1D engine runs at the finer default unless the caller asks for more
    return max(DEFAULT_CDF_POINTS, int(resolution))


def concentration_point(
    domain: FeasibleSet,
    schedule,
    steps: int | None = None,
    resolution: int = DEFAULT_RESOLUTION,
    tol: float = CONVERGENCE_TOL,
    branching: int = 2,
) -> SolutionReport:
    """Limit of the quantile track once successive even-step marginals agree.

    ``steps`` caps the number of tree levels (default: :func:`default_step_cap`).
    Raises NotConverged, carrying the partial report, if the cap is hit first.
    """
    assignment = as_assignment(schedule)
    if not has_parity(assignment):
        raise DomainError("concentration_point needs an alternating or hybrid schedule")
    level = schedule_level(assignment)
    cap = default_step_cap(assignment) if steps is None else int(steps)
    method = "alternating" if assignment.eps >= 0.5 else f"hybrid({assignment.eps:g})"
    base = {"schedule": assignment.to_dict(), "level": level, "step_cap": cap, "tol": tol}

    if domain.is_segment:
        track, grid, converged, sup, h, seg = _segment_run(
            domain, assignment, level, cap, tol, _cdf_points(resolution), branching, True
        )
        t = grid.quantile(level)
        point = seg.point(t)
        cell = grid.cell * float(np.hypot(*seg.direction))
        diag = dict(base, engine="cdf", points=len(grid.xs) - 1, cell_diagonal=cell, parameter=t)
        gap = 0.0
        measure = grid
    else:
        boundary = extract_pareto_boundary(domain)
        if len(boundary.chain) == 1:
            p = boundary.chain[0]
            diag = dict(base, engine="degenerate-frontier", cell_diagonal=0.0, converged=True, levels=0)
            return SolutionReport((float(p[0]), float(p[1])), method, 0.0, diag)
        measure0 = GridMeasure.from_domain(domain, resolution)
        track, measure, converged, sup, h = _grid_run(measure0, assignment, level, cap, tol, branching, True)
        if converged:
            # y is read one level later, at an odd step
            measure = evolve_grid(measure, Mix(assignment.p1_at(h + 1)), branching)
            c1, c2 = _marginal_cdfs(measure.mass)
            track.steps = np.append(track.steps, h + 1)
            track.xs = np.append(track.xs, _grid_quantile(c1, measure.x_edges, level))
            track.ys = np.append(track.ys, _grid_quantile(c2, measure.y_edges, level))
        point = track.limit()
        gap = float(boundary.distance(np.asarray([point]))[0])
        diag = dict(
            base,
            engine="grid",
            resolution=resolution,
            cell_diagonal=measure.cell_diagonal,
            box_mass_0_05=box_mass(measure, point, 0.05),
            lipschitz_lambda=boundary.lipschitz_lambda,
        )
    diag.update(converged=converged, levels=h, sup_distance=sup, x_minus_y=point[0] - point[1])
    report = SolutionReport((float(point[0]), float(point[1])), method, gap, diag, track, measure)
    if not converged:
        raise NotConverged(f"no concentration after {h} levels (sup distance {sup:.3g} >= {tol:g})", report)
    return report


def random_median_limit(
    domain: FeasibleSet, steps: int = DEFAULT_STEPS, resolution: int = DEFAULT_RESOLUTION, branching: int = 2
) -> tuple[tuple[float, float], QuantileTrack]:
    """Medians of the random-controller value after ``steps`` levels."""
    boundary = None if domain.is_segment else extract_pareto_boundary(domain)
    if boundary is not None and len(boundary.chain) == 1:
        p = boundary.chain[0]
        track = QuantileTrack(0.5, np.array([0]), np.array([p[0]]), np.array([p[1]]), parity=False)
        return (float(p[0]), float(p[1])), track
    track = track_quantiles(domain, AssignmentModel.random(), steps, 0.5, resolution, branching)
    return track.limit(), track


def ref_solution(
    domain: FeasibleSet,
    eps_schedule: Sequence[float] = DEFAULT_EPS_SCHEDULE,
    steps: int | None = None,
    resolution: int = DEFAULT_RESOLUTION,
    random_steps: int = DEFAULT_STEPS,
    tol: float = CONVERGENCE_TOL,
) -> SolutionReport:
    """Estimate of the eps -> 0 limit of the hybrid concentration points.

    The estimate is the last point plus the last difference (first-order
    extrapolation for a halving schedule). The random-schedule median limit
    is reported alongside as an independent route to the same point.
    """
    eps_schedule = [float(e) for e in eps_schedule]
    if len(eps_schedule) < 2:
        raise ScheduleTooShort("the eps schedule needs at least two entries")
    if any(not 0.0 < e <= 0.5 for e in eps_schedule):
        raise DomainError("every eps must lie in (0, 1/2]")
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise DomainError("the eps schedule must be strictly decreasing")

    runs = [concentration_point(domain, AssignmentModel.hybrid(e), steps, resolution, tol) for e in eps_schedule]
    pts = np.array([r.point for r in runs])
    dists = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cauchy = bool(np.all(np.diff(dists) < 0)) if len(dists) > 1 else True
    estimate = pts[-1] + (pts[-1] - pts[-2])
    if domain.is_segment:
        seg = _OrientedSegment.of(domain)
        t = float(np.dot(estimate - seg.start, seg.direction) / np.dot(seg.direction, seg.direction))
        estimate = np.asarray(seg.point(t))
        gap = 0.0
    else:
        boundary = extract_pareto_boundary(domain)
        gap = float(boundary.distance(estimate[None, :])[0])
    median, _ = random_median_limit(domain, random_steps, resolution)
    diag = {
        "eps_schedule": eps_schedule,
        "points": pts.tolist(),
        "x_minus_y": (pts[:, 0] - pts[:, 1]).tolist(),
        "levels": [r.diagnostics["levels"] for r in runs],
        "box_mass_0_05": [r.diagnostics.get("box_mass_0_05") for r in runs],
        "pareto_gaps": [r.pareto_gap for r in runs],
        "successive_distances": dists.tolist(),
        "cauchy": cauchy,
        "random_median_limit": list(median),
        "random_median_steps": random_steps,
        "cross_route_discrepancy": float(np.linalg.norm(estimate - np.asarray(median))),
        "resolution": resolution,
        "cell_diagonal": max(r.cell_diagonal for r in runs),
    }
    return SolutionReport((float(estimate[0]), float(estimate[1])), "ref_limit", gap, diag)


def axiom_report(
    domain: FeasibleSet,
    solution: SolutionReport | None = None,
    transformed: SolutionReport | None = None,
    scale: Sequence[float] = PROBE_SCALE,
    shift: Sequence[float] = PROBE_SHIFT,
    **ref_kwargs,
) -> AxiomReport:
    """Efficiency, symmetry and affine-invariance gaps of the REF point.

    ``solution`` and ``transformed`` (REF of the mapped domain) are computed
    when not supplied; ``ref_kwargs`` go to :func:`ref_solution`.
    """
    if solution is None:
        solution = ref_solution(domain, **ref_kwargs)
    image = affine_transform(domain, scale, shift)
    if transformed is None:
        transformed = ref_solution(image, **ref_kwargs)
    mapped = affine_point(solution.point, scale, shift)
    scale_gap = float(math.dist(mapped, transformed.point))
    sym = abs(solution.point[0] - solution.point[1]) if is_symmetric(domain) else None
    details = {
        "point": list(solution.point),
        "mapped_point": list(mapped),
        "transformed_point": list(transformed.point),
        "probe_scale": list(scale),
        "probe_shift": list(shift),
    }
    return AxiomReport(solution.pareto_gap, sym, scale_gap, details)


# -- ternary trees -----------------------------------------------------------


def ternary_alternating_fixed_point(tol: float = 1e-12) -> FixedPointReport:
    """Interior root of ``1 - (1 - x^3)^3 = x``, by bisection on [0.05, 0.95]."""

    def g(x: float) -> float:
        return 1.0 - (1.0 - x**3) ** 3 - x

    r = bisect(g, 0.05, 0.95, tol=tol)
    slope = 9.0 * r**2 * (1.0 - r**3) ** 2
    return FixedPointReport.classify(r, slope)


def ternary_random_limit(
    domain: FeasibleSet | None = None,
    steps: int = DEFAULT_STEPS,
    resolution: int = DEFAULT_RESOLUTION,
    measure: GridMeasure | None = None,
    count: int = 2,
) -> list[tuple[tuple[float, float], float]]:
    """Heaviest cells after ``steps`` levels of the ternary MIX(1/2) evolution."""
    if measure is None:
        if domain is None or domain.is_segment:
            raise SegmentDomain("ternary_random_limit needs a polygon domain")
        measure = GridMeasure.from_domain(domain, resolution)
    for _ in range(steps):
        measure = evolve_grid(measure, Mix(0.5), branching=3)
    return top_cells(measure, count)
