"""Analytic evolution of value distributions.

One dimension: the CDF of player 1's payoff in a zero-sum game is pushed
through polynomial maps level by level (:func:`iterate_cdf`). Two dimensions:
a cell-mass discretisation of the value measure is pushed through the
"pick the better of k i.i.d. draws for the controller" operators
(:func:`evolve_grid`).
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, SegmentDomain, UnnormalizedInput
from .geometry import FeasibleSet, ParetoBoundary, quadrant_mask

NEUTRAL_BAND = 1e-9
GOLDEN_B = (math.sqrt(5.0) - 1.0) / 2.0


def _check_unit(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0.0) | (arr > 1.0)) or np.any(np.isnan(arr)):
        raise DomainError(f"{name} must lie in [0, 1]")
    return arr


def phi(x):
    """Two-level alternating map ``2x^2 - x^4``."""
    x = _check_unit(x)
    out = 2.0 * x**2 - x**4
    return float(out) if out.ndim == 0 else out


def phi_eps(x, eps: float):
    """Two-level hybrid map for the assignment (1/2 + eps, 1/2 - eps)."""
    x = _check_unit(x)
    if not 0.0 <= eps <= 0.5:
        raise DomainError(f"eps must lie in [0, 1/2], got {eps}")
    e2 = (2.0 * eps) ** 2
    e3 = (2.0 * eps) ** 3
    out = x + e2 * (-2.0 * x**3 + 3.0 * x**2 - x) + e3 * (-((x - x**2) ** 2))
    return float(out) if out.ndim == 0 else out


def phi_eps_derivative(x: float, eps: float) -> float:
    e2 = (2.0 * eps) ** 2
    e3 = (2.0 * eps) ** 3
    return 1.0 + e2 * (-6.0 * x**2 + 6.0 * x - 1.0) + e3 * (-2.0 * (x - x**2) * (1.0 - 2.0 * x))


@dataclass(frozen=True)
class FixedPointReport:
    value: float
    multiplier: float
    classification: str

    @classmethod
    def classify(cls, value: float, multiplier: float, band: float = NEUTRAL_BAND) -> "FixedPointReport":
        m = abs(multiplier)
        if m < 1.0 - band:
            kind = "attracting"
        elif m > 1.0 + band:
            kind = "repelling"
        else:
            kind = "neutral"
        return cls(float(value), float(multiplier), kind)

    def to_dict(self) -> dict:
        return {"value": self.value, "multiplier": self.multiplier, "classification": self.classification}


def b_eps(eps: float) -> FixedPointReport:
    """Interior fixed point of :func:`phi_eps` and its stability.

    Uses the rationalised form ``1 / (sqrt(1 + eps^2) + 1 - eps)``, which is
    algebraically the usual closed form but does not cancel for small eps.
    """
    if not 0.0 < eps <= 0.5:
        raise DomainError(f"eps must lie in (0, 1/2], got {eps}")
    value = 1.0 / (math.sqrt(1.0 + eps * eps) + 1.0 - eps)
    return FixedPointReport.classify(value, phi_eps_derivative(value, eps))


def quantile_level(eps: float | None) -> float:
    """Quantile level tracked for a hybrid parameter (1/2 for the random model)."""
    if eps is None or eps <= 0.0:
        return 0.5
    return b_eps(eps).value


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Plain bisection for a sign change of ``f`` on ``[lo, hi]``."""
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise DomainError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- one-dimensional CDF maps ------------------------------------------------


@dataclass(frozen=True)
class Phi:
    """Alternating binary pair (max then min): two levels per step."""

    levels = 2

    def __call__(self, F: np.ndarray) -> np.ndarray:
        return 2.0 * F**2 - F**4


@dataclass(frozen=True)
class PhiEps:
    eps: float
    levels = 2

    def __call__(self, F: np.ndarray) -> np.ndarray:
        return phi_eps(F, self.eps)


@dataclass(frozen=True)
class RawPair:
    """One level: max of k draws with probability ``p``, min otherwise.

    Written as ``F^k + (1-p)(1 - (1-F)^k - F^k)`` so that F=0 and F=1 map to
    themselves exactly.
    """

    p: float
    branching: int = 2
    levels = 1

    def __call__(self, F: np.ndarray) -> np.ndarray:
        k = self.branching
        hi = F**k
        return hi + (1.0 - self.p) * (1.0 - (1.0 - F) ** k - hi)


@dataclass(frozen=True)
class AlternatingPair:
    """Alternating pair for k-ary trees: ``1 - (1 - F^k)^k``."""

    branching: int = 2
    levels = 2

    def __call__(self, F: np.ndarray) -> np.ndarray:
        return 1.0 - (1.0 - F**self.branching) ** self.branching


def parse_cdf_map(name: str, eps: float | None = None, p: float | None = None, branching: int = 2):
    name = name.lower().replace("-", "_")
    if name == "phi":
        return Phi() if branching == 2 else AlternatingPair(branching)
    if name == "phi_eps":
        if eps is None:
            raise DomainError("phi_eps needs eps")
        return PhiEps(float(eps))
    if name in ("raw", "raw_pair"):
        if p is None:
            raise DomainError("raw_pair needs p")
        return RawPair(float(p), branching)
    if name in ("alternating", "ternary"):
        return AlternatingPair(3 if name == "ternary" else branching)
    raise DomainError(f"unknown CDF map {name!r}")


@dataclass(frozen=True)
class CdfGrid:
    """CDF sampled on a strictly increasing grid over [0, 1]."""

    xs: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        F = np.asarray(self.F, dtype=float)
        if xs.shape != F.shape or xs.ndim != 1 or len(xs) < 2:
            raise DomainError("xs and F must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(xs) <= 0):
            raise DomainError("xs must be strictly increasing")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "F", F)

    @classmethod
    def uniform(cls, points: int = 4096) -> "CdfGrid":
        """Uniform law on [0, 1] with ``points`` intervals."""
        xs = np.linspace(0.0, 1.0, points + 1)
        return cls(xs, xs.copy())

    @property
    def cell(self) -> float:
        return float(np.max(np.diff(self.xs)))

    def __call__(self, x):
        return np.interp(x, self.xs, self.F)

    def quantile(self, q: float) -> float:
        """Smallest x with F(x) = q, linear between grid points."""
        j = int(np.searchsorted(self.F, q, side="left"))
        if j <= 0:
            return float(self.xs[0])
        if j >= len(self.F):
            return float(self.xs[-1])
        f0, f1 = self.F[j - 1], self.F[j]
        return float(self.xs[j - 1] + (q - f0) / (f1 - f0) * (self.xs[j] - self.xs[j - 1]))

    def sup_distance(self, other: "CdfGrid") -> float:
        return float(np.max(np.abs(self.F - other.F)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,F\n")
        for x, f in zip(self.xs, self.F):
            buf.write(f"{float(x)!r},{float(f)!r}\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"x": self.xs.tolist(), "F": self.F.tolist()})

    @classmethod
    def from_csv(cls, text: str) -> "CdfGrid":
        lines = [ln for ln in text.strip().splitlines() if ln]
        if lines[0].replace(" ", "") != "x,F":
            from .errors import SchemaMismatch

            raise SchemaMismatch("CDF CSV must have header x,F")
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
        return cls(data[:, 0], data[:, 1])


def iterate_cdf(grid: CdfGrid, steps: int, cdf_map) -> CdfGrid:
    """Apply ``cdf_map`` pointwise ``steps`` times.

    After each step the vector is clipped to [0, 1] and made monotone with a
    running maximum; both only remove rounding noise at the ulp level.
    """
    F = grid.F.copy()
    for _ in range(steps):
        F = np.maximum.accumulate(np.clip(cdf_map(F), 0.0, 1.0))
    return CdfGrid(grid.xs, F)


def iterate_cdf_until(grid: CdfGrid, cdf_map, tol: float = 1e-6, max_steps: int = 200):
    """Iterate until successive steps differ by less than ``tol`` in sup norm.

    Returns ``(grid, steps_taken, converged)``.
    """
    cur = grid
    for n in range(1, max_steps + 1):
        nxt = iterate_cdf(cur, 1, cdf_map)
        done = nxt.sup_distance(cur) < tol
        cur = nxt
        if done:
            return cur, n, True
    return cur, max_steps, False


# -- two-dimensional grid measures -------------------------------------------


@dataclass(frozen=True)
class Mix:
    """Player 1 picks (coordinate-1 best) with probability ``p1``, else player 2."""

    p1: float

    def __post_init__(self):
        if not 0.0 <= self.p1 <= 1.0:
            raise DomainError(f"p1 must lie in [0, 1], got {self.p1}")


MAX1 = Mix(1.0)
MAX2 = Mix(0.0)


def pick_best_weights(marginal: np.ndarray, k: int = 2) -> np.ndarray:
    """Per-unit-mass weight of each slice when the best of ``k`` draws is kept.

    With ``F`` the mass strictly below the slice and ``c`` its own mass, the
    slice's new mass is ``(F + c)^k - F^k``; dividing by ``c`` gives
    ``sum_{m=1..k} C(k, m) F^(k-m) c^(m-1)``. Draws tied in the same slice are
    resolved uniformly, so cells within a slice keep their proportions.
    """
    below = np.concatenate(([0.0], np.cumsum(marginal)[:-1]))
    w = np.zeros_like(marginal)
    for m in range(1, k + 1):
        w += math.comb(k, m) * below ** (k - m) * marginal ** (m - 1)
    return w


@dataclass(frozen=True)
class GridMeasure:
    """Cell masses on an ``nx`` x ``ny`` grid over ``box``; ``mass[i, j]`` is
    the cell in x-column ``i`` and y-row ``j``, represented by its centre."""

    box: tuple[float, float, float, float]
    mass: np.ndarray
    domain: FeasibleSet | None = field(default=None, compare=False)

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if m.ndim != 2:
            raise DomainError("mass must be a 2-D array")
        object.__setattr__(self, "mass", m)
        object.__setattr__(self, "box", tuple(float(v) for v in self.box))

    # -- construction ------------------------------------------------------
    @classmethod
    def from_domain(cls, domain: FeasibleSet, nx: int = 512, ny: int | None = None) -> "GridMeasure":
        """Uniform law on the domain, discretised by exact cell/polygon areas."""
        ny = nx if ny is None else ny
        if domain.is_segment:
            if nx != ny:
                raise DomainError("segment embedding needs a square grid")
            return cls.from_segment(domain, nx)
        x0, y0, x1, y1 = domain.bounds()
        xe = np.linspace(x0, x1, nx + 1)
        ye = np.linspace(y0, y1, ny + 1)
        areas = _cell_areas(domain, xe, ye)
        return cls((x0, y0, x1, y1), areas / areas.sum(), domain)

    @classmethod
    def from_segment(cls, domain: FeasibleSet, n: int = 512) -> "GridMeasure":
        """Uniform law on a segment as equal masses on the grid diagonal it crosses."""
        (ax, ay), (bx, by) = domain.endpoints
        if ax == bx or ay == by:
            raise SegmentDomain("axis-parallel segments cannot be embedded on a grid diagonal")
        box = (min(ax, bx), min(ay, by), max(ax, bx), max(ay, by))
        mass = np.zeros((n, n))
        i = np.arange(n)
        # cell i along the segment parameter, mapped to its x column and y row
        col = i if bx > ax else n - 1 - i
        row = i if by > ay else n - 1 - i
        mass[col, row] = 1.0 / n
        return cls(box, mass, domain)

    @classmethod
    def point_mass(cls, box, shape: tuple[int, int], cell: tuple[int, int]) -> "GridMeasure":
        mass = np.zeros(shape)
        mass[cell] = 1.0
        return cls(box, mass)

    # -- geometry of the grid ---------------------------------------------
    @property
    def nx(self) -> int:
        return self.mass.shape[0]

    @property
    def ny(self) -> int:
        return self.mass.shape[1]

    @property
    def x_edges(self) -> np.ndarray:
        return np.linspace(self.box[0], self.box[2], self.nx + 1)

    @property
    def y_edges(self) -> np.ndarray:
        return np.linspace(self.box[1], self.box[3], self.ny + 1)

    @property
    def cell_size(self) -> tuple[float, float]:
        return ((self.box[2] - self.box[0]) / self.nx, (self.box[3] - self.box[1]) / self.ny)

    @property
    def cell_diagonal(self) -> float:
        return math.hypot(*self.cell_size)

    def centers(self) -> np.ndarray:
        """Cell centres, shape (nx, ny, 2)."""
        xe, ye = self.x_edges, self.y_edges
        cx = 0.5 * (xe[:-1] + xe[1:])
        cy = 0.5 * (ye[:-1] + ye[1:])
        X, Y = np.meshgrid(cx, cy, indexing="ij")
        return np.stack([X, Y], axis=-1)

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def marginal(self, coordinate: int) -> np.ndarray:
        return self.mass.sum(axis=1) if coordinate == 1 else self.mass.sum(axis=0)

    def marginal_cdf(self, coordinate: int) -> np.ndarray:
        """Marginal CDF at the upper edge of each column (coordinate 1) or row."""
        return np.cumsum(self.marginal(coordinate))

    def with_mass(self, mass: np.ndarray) -> "GridMeasure":
        return GridMeasure(self.box, mass, self.domain)

    # -- serialisation -----------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("xmin,ymin,xmax,ymax,nx,ny\n")
        x0, y0, x1, y1 = self.box
        buf.write(f"{x0!r},{y0!r},{x1!r},{y1!r},{self.nx},{self.ny}\n")
        for row in self.mass:
            buf.write(",".join(repr(float(v)) for v in row))
            buf.write("\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"box": list(self.box), "nx": self.nx, "ny": self.ny, "mass": self.mass.tolist()})

    @classmethod
    def from_csv(cls, text: str) -> "GridMeasure":
        lines = text.strip().splitlines()
        vals = lines[1].split(",")
        box = tuple(float(v) for v in vals[:4])
        nx, ny = int(vals[4]), int(vals[5])
        mass = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]])
        if mass.shape != (nx, ny):
            from .errors import SchemaMismatch

            raise SchemaMismatch(f"expected {nx}x{ny} masses, got {mass.shape}")
        return cls(box, mass)

    @classmethod
    def from_json(cls, text: str) -> "GridMeasure":
        doc = json.loads(text)
        return cls(tuple(doc["box"]), np.asarray(doc["mass"], dtype=float))


def _cell_areas(domain: FeasibleSet, xe: np.ndarray, ye: np.ndarray) -> np.ndarray:
    """Exact area of every grid cell intersected with the convex polygon.

    Cells whose four corners are inside are full; cells entirely outside one
    edge's half-plane are empty; only the remaining boundary cells are
    clipped (via shapely).
    """
    import shapely

    v = np.asarray(domain.vertices)
    X, Y = np.meshgrid(xe, ye, indexing="ij")
    nxc, nyc = len(xe) - 1, len(ye) - 1
    inside_all = np.ones((nxc, nyc), bool)
    outside_any = np.zeros((nxc, nyc), bool)
    scale = max(xe[-1] - xe[0], ye[-1] - ye[0])
    tol = 1e-12 * scale
    for a, b in zip(v, np.roll(v, -1, axis=0)):
        s = (b[0] - a[0]) * (Y - a[1]) - (b[1] - a[1]) * (X - a[0])
        corners = np.stack([s[:-1, :-1], s[1:, :-1], s[:-1, 1:], s[1:, 1:]])
        inside_all &= np.all(corners >= -tol, axis=0)
        outside_any |= np.all(corners <= tol, axis=0)
    dx = np.diff(xe)[:, None]
    dy = np.diff(ye)[None, :]
    areas = np.where(inside_all, dx * dy, 0.0)
    todo = ~inside_all & ~outside_any
    if np.any(todo):
        ii, jj = np.nonzero(todo)
        boxes = shapely.box(xe[ii], ye[jj], xe[ii + 1], ye[jj + 1])
        areas[ii, jj] = shapely.area(shapely.intersection(boxes, shapely.Polygon(v)))
    return areas


def _normalised(measure: GridMeasure) -> np.ndarray:
    total = measure.mass.sum()
    if abs(total - 1.0) > 1e-6:
        raise UnnormalizedInput(f"total mass {total!r} is not 1")
    # renormalise: total mass is a repelling fixed point (S -> S^k), so any
    # rounding drift would otherwise double every level
    return measure.mass / total


def evolve_grid(measure: GridMeasure, operator: Mix, branching: int = 2) -> GridMeasure:
    """One tree level: ``p1 * MAX1 + (1 - p1) * MAX2`` applied to the same input."""
    m = _normalised(measure)
    p = operator.p1
    if p >= 1.0:
        factor = pick_best_weights(m.sum(axis=1), branching)[:, None]
    elif p <= 0.0:
        factor = pick_best_weights(m.sum(axis=0), branching)[None, :]
    else:
        w1 = pick_best_weights(m.sum(axis=1), branching)
        w2 = pick_best_weights(m.sum(axis=0), branching)
        factor = p * w1[:, None] + (1.0 - p) * w2[None, :]
    return measure.with_mass(m * factor)


def evolve_assignment(
    measure: GridMeasure,
    assignment,
    levels: int,
    start_height: int = 1,
    branching: int = 2,
    callback: Callable[[int, GridMeasure], bool | None] | None = None,
) -> GridMeasure:
    """Apply ``levels`` tree levels, the i-th one using the assignment's
    player-1 probability at height ``start_height + i``.

    ``callback(height, measure)`` runs after every level; returning True stops
    early.
    """
    cur = measure
    for i in range(levels):
        h = start_height + i
        cur = evolve_grid(cur, Mix(assignment.p1_at(h)), branching)
        if callback is not None and callback(h, cur):
            break
    return cur


def hybrid_schedule(measure: GridMeasure, eps: float, levels: int) -> GridMeasure:
    """MIX(1/2 + eps) at odd heights and MIX(1/2 - eps) at even heights, from height 1."""
    from .tree import AssignmentModel

    return evolve_assignment(measure, AssignmentModel.hybrid(eps), levels)


def quadrant_mass(measure: GridMeasure, origin: Sequence[float], spec: Sequence[str]) -> float:
    return float(measure.mass[quadrant_mask(measure.centers(), origin, spec)].sum())


def box_mass(measure: GridMeasure, center: Sequence[float], half_width: float) -> float:
    """Mass of cells whose centre lies in the closed L-infinity box."""
    c = measure.centers()
    sel = (np.abs(c[..., 0] - center[0]) <= half_width) & (np.abs(c[..., 1] - center[1]) <= half_width)
    return float(measure.mass[sel].sum())


def marginal_quantile(measure: GridMeasure, coordinate: int, q: float) -> float:
    """First crossing of level ``q`` by the marginal CDF.

    Mass is spread uniformly inside each column (row), so the CDF is linear
    between cell edges and the crossing is interpolated inside its cell.
    """
    if not 0.0 < q < 1.0:
        raise DomainError(f"q must lie in (0, 1), got {q}")
    marg = measure.marginal(coordinate)
    total = marg.sum()
    cdf = np.cumsum(marg) / total
    edges = measure.x_edges if coordinate == 1 else measure.y_edges
    j = int(np.searchsorted(cdf, q, side="left"))
    j = min(j, len(marg) - 1)
    below = cdf[j - 1] if j > 0 else 0.0
    frac = (q - below) / (marg[j] / total) if marg[j] > 0 else 0.0
    return float(edges[j] + min(max(frac, 0.0), 1.0) * (edges[j + 1] - edges[j]))


def pareto_band_mass(measure: GridMeasure, boundary: ParetoBoundary, eps_band: float) -> float:
    d = boundary.distance(measure.centers())
    return float(measure.mass[d <= eps_band].sum())


def top_cells(measure: GridMeasure, count: int = 2) -> list[tuple[tuple[float, float], float]]:
    """The ``count`` heaviest cells as ``((x, y), mass)`` pairs, heaviest first."""
    flat = measure.mass.ravel()
    order = np.argsort(flat, kind="stable")[::-1][:count]
    c = measure.centers().reshape(-1, 2)
    return [((float(c[i, 0]), float(c[i, 1])), float(flat[i])) for i in order]
