"""Feasible payoff sets: convex polygons and zero-sum segments.

Provides the Pareto-efficient boundary, quadrant predicates, exact uniform
sampling by fan triangulation, positive affine maps and a small convex
clipping routine used for exact area computations.
"""

from __future__ import annotations

import json
import math
import operator
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidDomain, NonPositiveScale, SegmentDomain

GEOM_TOL = 1e-9

Point = tuple[float, float]

_RELATIONS = {
    ">": operator.gt,
    ">=": operator.ge,
    "≥": operator.ge,
    "<": operator.lt,
    "<=": operator.le,
    "≤": operator.le,
}


def _cross(o: Sequence[float], a: Sequence[float], b: Sequence[float]) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def polygon_area(vertices: Sequence[Sequence[float]]) -> float:
    """Signed shoelace area (positive for counter-clockwise order)."""
    n = len(vertices)
    s = 0.0
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


@dataclass(frozen=True)
class FeasibleSet:
    """Compact convex payoff region ``C``.

    Use :meth:`polygon` or :meth:`segment` rather than the raw constructor;
    they validate and normalise the input (polygons are stored
    counter-clockwise).
    """

    kind: str
    vertices: tuple[Point, ...] = ()
    endpoints: tuple[Point, ...] = ()

    # -- construction -----------------------------------------------------
    @classmethod
    def polygon(cls, vertices: Iterable[Sequence[float]]) -> "FeasibleSet":
        pts = [(float(x), float(y)) for x, y in vertices]
        if len(pts) >= 2 and _close(pts[0], pts[-1]):
            pts = pts[:-1]
        for i in range(len(pts)):
            if _close(pts[i], pts[(i + 1) % len(pts)]):
                raise InvalidDomain(f"duplicated consecutive vertex {pts[i]}")
        if len(pts) < 3:
            raise InvalidDomain("polygon needs at least 3 vertices")
        if polygon_area(pts) < 0:
            pts.reverse()
        n = len(pts)
        strict = 0
        for i in range(n):
            c = _cross(pts[i - 1], pts[i], pts[(i + 1) % n])
            if c < -GEOM_TOL:
                raise InvalidDomain(f"polygon is not convex at vertex {pts[i]}")
            if c > GEOM_TOL:
                strict += 1
        if strict < 3:
            raise InvalidDomain("polygon has empty interior (collinear vertices)")
        return cls("polygon", vertices=tuple(pts))

    @classmethod
    def segment(cls, p: Sequence[float], q: Sequence[float]) -> "FeasibleSet":
        a = (float(p[0]), float(p[1]))
        b = (float(q[0]), float(q[1]))
        if _close(a, b):
            raise InvalidDomain("segment endpoints must be distinct")
        return cls("segment", endpoints=(a, b))

    @classmethod
    def from_dict(cls, doc: dict) -> "FeasibleSet":
        kind = doc.get("kind")
        if kind == "polygon":
            if "vertices" not in doc:
                raise InvalidDomain("polygon document needs 'vertices'")
            return cls.polygon(doc["vertices"])
        if kind == "segment":
            ends = doc.get("endpoints")
            if ends is None or len(ends) != 2:
                raise InvalidDomain("segment document needs two 'endpoints'")
            return cls.segment(ends[0], ends[1])
        raise InvalidDomain(f"unknown domain kind {kind!r}")

    @classmethod
    def from_json(cls, text: str) -> "FeasibleSet":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "FeasibleSet":
        return cls.from_json(Path(path).read_text())

    def to_dict(self) -> dict:
        if self.is_segment:
            return {"kind": "segment", "endpoints": [list(p) for p in self.endpoints]}
        return {"kind": "polygon", "vertices": [list(p) for p in self.vertices]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    # -- basic queries ----------------------------------------------------
    @property
    def is_segment(self) -> bool:
        return self.kind == "segment"

    @property
    def points(self) -> tuple[Point, ...]:
        return self.endpoints if self.is_segment else self.vertices

    @property
    def area(self) -> float:
        return 0.0 if self.is_segment else polygon_area(self.vertices)

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.points]
        ys = [p[1] for p in self.points]
        return min(xs), min(ys), max(xs), max(ys)

    def contains(self, point: Sequence[float], tol: float = GEOM_TOL) -> bool:
        if self.is_segment:
            (ax, ay), (bx, by) = self.endpoints
            if abs(_cross((ax, ay), (bx, by), point)) > tol * max(1.0, math.hypot(bx - ax, by - ay)):
                return False
            t = ((point[0] - ax) * (bx - ax) + (point[1] - ay) * (by - ay)) / ((bx - ax) ** 2 + (by - ay) ** 2)
            return -tol <= t <= 1 + tol
        n = len(self.vertices)
        return all(
            _cross(self.vertices[i], self.vertices[(i + 1) % n], point) >= -tol for i in range(n)
        )

    # -- sampling ---------------------------------------------------------
    def fan_triangles(self) -> tuple[np.ndarray, np.ndarray]:
        """Fan triangulation from vertex 0.

        Returns ``(tri, cum)``: ``tri`` has shape (T, 3, 2); ``cum`` holds the
        cumulative area fractions with ``cum[-1] == 1``.
        """
        if self.is_segment:
            raise SegmentDomain("segments have no triangulation")
        v = np.asarray(self.vertices, dtype=float)
        tri = np.stack([np.repeat(v[:1], len(v) - 2, axis=0), v[1:-1], v[2:]], axis=1)
        e1 = tri[:, 1] - tri[:, 0]
        e2 = tri[:, 2] - tri[:, 0]
        areas = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        cum = np.cumsum(areas) / areas.sum()
        cum[-1] = 1.0
        return tri, cum

    def point_from_uniforms(self, u1, u2=None, u3=None) -> np.ndarray:
        """Deterministic map from i.i.d. U[0,1) draws to a uniform point of the set.

        Segments only consume ``u1``. Polygons pick a fan triangle with ``u1``
        (area weighted) and place the point with the folded barycentric pair
        ``(u2, u3)``. Works elementwise on arrays; the tree kernels replicate
        the same floating-point operations so results agree bit for bit.
        """
        u1 = np.asarray(u1, dtype=float)
        if self.is_segment:
            (ax, ay), (bx, by) = self.endpoints
            return np.stack([ax + u1 * (bx - ax), ay + u1 * (by - ay)], axis=-1)
        tri, cum = self.fan_triangles()
        idx = np.minimum(np.searchsorted(cum, u1, side="right"), len(cum) - 1)
        r1 = np.asarray(u2, dtype=float)
        r2 = np.asarray(u3, dtype=float)
        fold = r1 + r2 > 1.0
        r1 = np.where(fold, 1.0 - r1, r1)
        r2 = np.where(fold, 1.0 - r2, r2)
        a = tri[idx, 0]
        b = tri[idx, 1]
        c = tri[idx, 2]
        x = a[..., 0] + r1 * (b[..., 0] - a[..., 0]) + r2 * (c[..., 0] - a[..., 0])
        y = a[..., 1] + r1 * (b[..., 1] - a[..., 1]) + r2 * (c[..., 1] - a[..., 1])
        return np.stack([x, y], axis=-1)

    def kernel_arrays(self) -> tuple[int, np.ndarray, np.ndarray]:
        """Flat arrays consumed by the compiled tree kernels."""
        if self.is_segment:
            (ax, ay), (bx, by) = self.endpoints
            return 0, np.array([[[ax, ay], [bx, by], [0.0, 0.0]]]), np.ones(1)
        tri, cum = self.fan_triangles()
        return 1, np.ascontiguousarray(tri), np.ascontiguousarray(cum)


def _close(a: Sequence[float], b: Sequence[float], tol: float = GEOM_TOL) -> bool:
    return abs(a[0] - b[0]) <= tol and abs(a[1] - b[1]) <= tol


def sample_uniform(domain: FeasibleSet, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Exact uniform draws from ``domain`` (shape (2,) or (size, 2))."""
    shape = () if size is None else (size,)
    u = rng.random((3,) + shape)
    return domain.point_from_uniforms(u[0], u[1], u[2])


def affine_transform(domain: FeasibleSet, scale: Sequence[float], shift: Sequence[float]) -> FeasibleSet:
    sx, sy = float(scale[0]), float(scale[1])
    if not (sx > 0 and sy > 0):
        raise NonPositiveScale(f"scale must be positive, got {(sx, sy)}")
    dx, dy = float(shift[0]), float(shift[1])
    mapped = [(sx * x + dx, sy * y + dy) for x, y in domain.points]
    if domain.is_segment:
        return FeasibleSet.segment(*mapped)
    return FeasibleSet.polygon(mapped)


def affine_point(point: Sequence[float], scale: Sequence[float], shift: Sequence[float]) -> Point:
    return (scale[0] * point[0] + shift[0], scale[1] * point[1] + shift[1])


def quadrant_membership(point: Sequence[float], origin: Sequence[float], spec: Sequence[str]) -> bool:
    """True iff ``point[i] spec[i] origin[i]`` for both coordinates."""
    r1, r2 = (_RELATIONS[s] for s in spec)
    return bool(r1(point[0], origin[0]) and r2(point[1], origin[1]))


def quadrant_mask(points: np.ndarray, origin: Sequence[float], spec: Sequence[str]) -> np.ndarray:
    r1, r2 = (_RELATIONS[s] for s in spec)
    points = np.asarray(points, dtype=float)
    return r1(points[..., 0], origin[0]) & r2(points[..., 1], origin[1])


def is_symmetric(domain: FeasibleSet, tol: float = GEOM_TOL) -> bool:
    pts = domain.points
    swapped = [(y, x) for x, y in pts]
    return all(any(_close(p, q, tol) for q in pts) for p in swapped) and all(
        any(_close(p, q, tol) for q in swapped) for p in pts
    )


@dataclass(frozen=True)
class ParetoBoundary:
    """Strictly efficient chain, from the best point for player 1 to the best for player 2."""

    chain: tuple[Point, ...]
    lipschitz_lambda: float

    @property
    def m1(self) -> Point:
        return self.chain[0]

    @property
    def m2(self) -> Point:
        return self.chain[-1]

    def distance(self, points) -> np.ndarray:
        """Euclidean distance from each point to the chain (segments included)."""
        p = np.asarray(points, dtype=float)
        chain = np.asarray(self.chain, dtype=float)
        if len(chain) == 1:
            return np.hypot(p[..., 0] - chain[0, 0], p[..., 1] - chain[0, 1])
        best = np.full(p.shape[:-1], np.inf)
        for a, b in zip(chain[:-1], chain[1:]):
            d = b - a
            t = ((p[..., 0] - a[0]) * d[0] + (p[..., 1] - a[1]) * d[1]) / (d @ d)
            t = np.clip(t, 0.0, 1.0)
            dist = np.hypot(p[..., 0] - (a[0] + t * d[0]), p[..., 1] - (a[1] + t * d[1]))
            best = np.minimum(best, dist)
        return best


def extract_pareto_boundary(domain: FeasibleSet) -> ParetoBoundary:
    """Maximal chain of points not weakly dominated by another vertex.

    Axis-parallel edges at the extremes are trimmed to their dominating end.
    """
    if domain.is_segment:
        raise SegmentDomain("zero-sum segments have a degenerate frontier; use the 1D engine")
    v = domain.vertices
    n = len(v)
    xmax = max(p[0] for p in v)
    ymax = max(p[1] for p in v)
    start = max((i for i in range(n) if v[i][0] >= xmax - GEOM_TOL), key=lambda i: v[i][1])
    stop = max((i for i in range(n) if v[i][1] >= ymax - GEOM_TOL), key=lambda i: v[i][0])
    chain = [v[start]]
    i = start
    while i != stop:
        i = (i + 1) % n
        chain.append(v[i])
    lam = 1.0
    for a, b in zip(chain[:-1], chain[1:]):
        dx = abs(b[0] - a[0])
        dy = abs(b[1] - a[1])
        if dx > GEOM_TOL and dy > GEOM_TOL:
            lam = max(lam, dy / dx, dx / dy)
    return ParetoBoundary(tuple(chain), lam)


def pareto_distance(point: Sequence[float], boundary: ParetoBoundary) -> float:
    return float(boundary.distance(np.asarray(point, dtype=float)))


def clip_polygon(subject: Sequence[Sequence[float]], clip: Sequence[Sequence[float]]) -> list[Point]:
    """Sutherland-Hodgman clipping of ``subject`` by a convex CCW ``clip`` polygon."""
    out = [tuple(map(float, p)) for p in subject]
    m = len(clip)
    for i in range(m):
        a, b = clip[i], clip[(i + 1) % m]
        inp, out = out, []
        if not inp:
            break
        prev = inp[-1]
        prev_in = _cross(a, b, prev) >= 0
        for cur in inp:
            cur_in = _cross(a, b, cur) >= 0
            if cur_in != prev_in:
                out.append(_intersect(prev, cur, a, b))
            if cur_in:
                out.append(cur)
            prev, prev_in = cur, cur_in
    return out


def clip_halfplane(subject: Sequence[Sequence[float]], normal: Sequence[float], offset: float) -> list[Point]:
    """Keep the part of ``subject`` where ``normal . p <= offset``."""
    out: list[Point] = []
    n = len(subject)
    for i in range(n):
        p = subject[i]
        q = subject[(i + 1) % n]
        fp = normal[0] * p[0] + normal[1] * p[1] - offset
        fq = normal[0] * q[0] + normal[1] * q[1] - offset
        if fp <= 0:
            out.append((float(p[0]), float(p[1])))
        if (fp < 0 < fq) or (fq < 0 < fp):
            t = fp / (fp - fq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def _intersect(p, q, a, b) -> Point:
    d1x, d1y = q[0] - p[0], q[1] - p[1]
    d2x, d2y = b[0] - a[0], b[1] - a[1]
    den = d1x * d2y - d1y * d2x
    t = ((a[0] - p[0]) * d2y - (a[1] - p[1]) * d2x) / den
    return (p[0] + t * d1x, p[1] + t * d1y)


BUILTIN_DOMAINS = {
    "triangle": {"kind": "polygon", "vertices": [[0, 0], [1, 0], [0, 1]]},
    "square": {"kind": "polygon", "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]]},
    "pentagon": {"kind": "polygon", "vertices": [[0, 0], [1, 0], [1, 0.5], [0.5, 1], [0, 1]]},
    "asymmetric": {"kind": "polygon", "vertices": [[0, 0], [2, 0], [0, 1]]},
    "segment": {"kind": "segment", "endpoints": [[0, 0], [1, -1]]},
}


def resolve_domain(spec: str | dict | FeasibleSet) -> FeasibleSet:
    """Accept a FeasibleSet, a dict, inline JSON, a builtin name or a file path."""
    if isinstance(spec, FeasibleSet):
        return spec
    if isinstance(spec, dict):
        return FeasibleSet.from_dict(spec)
    text = str(spec).strip()
    if text.startswith("{"):
        return FeasibleSet.from_json(text)
    if text in BUILTIN_DOMAINS:
        return FeasibleSet.from_dict(BUILTIN_DOMAINS[text])
    path = Path(text)
    if not path.exists():
        raise InvalidDomain(f"no such domain file or builtin name: {text!r}")
    return FeasibleSet.load(path)
