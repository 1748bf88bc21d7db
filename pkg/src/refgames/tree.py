"""Monte Carlo values of random extensive-form games.

Leaves carry i.i.d. uniform payoffs from the feasible set; each internal node
is controlled by player 1 or 2 according to an :class:`AssignmentModel`
indexed by the node's *height* (distance to the leaves). The root value is
obtained by streaming backward induction; :func:`exact_spe_value` is the
materialised textbook version used as an oracle.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError, EmptySampleSet, LengthMismatch, SchemaMismatch
from .geometry import FeasibleSet
from .streams import CounterStream, replicate_key


@dataclass(frozen=True)
class AssignmentModel:
    """Probability that player 1 controls a node, by height parity."""

    p1_odd_height: float
    p1_even_height: float

    def __post_init__(self):
        for name in ("p1_odd_height", "p1_even_height"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"probability must lie in [0, 1], got {p}", name)

    @classmethod
    def alternating(cls) -> "AssignmentModel":
        return cls(1.0, 0.0)

    @classmethod
    def random(cls) -> "AssignmentModel":
        return cls(0.5, 0.5)

    @classmethod
    def hybrid(cls, eps: float) -> "AssignmentModel":
        if not 0.0 <= eps <= 0.5:
            raise ConfigError(f"eps must lie in [0, 1/2], got {eps}", "eps")
        return cls(0.5 + eps, 0.5 - eps)

    @classmethod
    def parse(cls, text: str, eps: float | None = None) -> "AssignmentModel":
        """Parse ``alternating``, ``random``, ``hybrid`` (with ``eps``),
        ``hybrid:0.1`` or an explicit ``p_odd,p_even`` pair."""
        text = text.strip().lower()
        if text == "alternating":
            return cls.alternating()
        if text == "random":
            return cls.random()
        if text.startswith("hybrid"):
            _, _, tail = text.partition(":")
            value = float(tail) if tail else eps
            if value is None:
                raise ConfigError("hybrid schedule needs eps", "eps")
            return cls.hybrid(float(value))
        if "," in text:
            a, b = text.split(",")
            return cls(float(a), float(b))
        raise ConfigError(f"unknown assignment {text!r}", "assignment")

    def p1_at(self, height: int) -> float:
        return self.p1_odd_height if height % 2 == 1 else self.p1_even_height

    @property
    def eps(self) -> float | None:
        """Hybrid parameter when the model is of the form (1/2+eps, 1/2-eps)."""
        if abs(self.p1_odd_height + self.p1_even_height - 1.0) > 1e-12:
            return None
        return self.p1_odd_height - 0.5

    @property
    def name(self) -> str:
        if (self.p1_odd_height, self.p1_even_height) == (1.0, 0.0):
            return "alternating"
        if (self.p1_odd_height, self.p1_even_height) == (0.5, 0.5):
            return "random"
        if self.eps is not None and self.eps > 0:
            return f"hybrid({self.eps:g})"
        return f"custom({self.p1_odd_height:g},{self.p1_even_height:g})"

    def to_dict(self) -> dict:
        return {"name": self.name, "p1_odd_height": self.p1_odd_height, "p1_even_height": self.p1_even_height}


@dataclass(frozen=True)
class GameSpec:
    domain: FeasibleSet
    assignment: AssignmentModel
    depth: int
    branching: int = 2

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigError("depth must be >= 1", "depth")
        if self.branching < 2:
            raise ConfigError("branching must be >= 2", "branching")
        if (self.depth + 1) * math.log2(self.branching) > 62:
            raise ConfigError("tree too deep for 64-bit node numbering", "depth")

    @property
    def n_leaves(self) -> int:
        return self.branching**self.depth

    @property
    def n_internal(self) -> int:
        return (self.branching**self.depth - 1) // (self.branching - 1)

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.to_dict(),
            "assignment": self.assignment.to_dict(),
            "depth": self.depth,
            "branching": self.branching,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GameSpec":
        a = doc["assignment"]
        return cls(
            FeasibleSet.from_dict(doc["domain"]),
            AssignmentModel(float(a["p1_odd_height"]), float(a["p1_even_height"])),
            int(doc["depth"]),
            int(doc.get("branching", 2)),
        )


def _kernel_args(spec: GameSpec):
    kind, tri, cum = spec.domain.kernel_arrays()
    use_ab = False
    sigma1 = 1.0
    if spec.domain.is_segment:
        (ax, ay), (bx, by) = spec.domain.endpoints
        dx, dy = bx - ax, by - ay
        # alpha-beta is exact only when the players rank leaves in opposite order
        if dx * dy < 0:
            use_ab = True
            sigma1 = 1.0 if dx > 0 else -1.0
    a = spec.assignment
    return (spec.depth, spec.branching, a.p1_odd_height, a.p1_even_height, kind, tri, cum, use_ab, sigma1)


def sample_spe_value(spec: GameSpec, stream, *, compiled: bool = True) -> np.ndarray:
    """Root SPE payoff of one random game drawn from ``stream``.

    With a :class:`CounterStream` and ``compiled=True`` the numba walker is
    used; any other stream (e.g. a replay of explicit leaves) goes through the
    pure-Python recursion. Both keep only one frame per level.
    """
    if compiled and isinstance(stream, CounterStream):
        out = np.empty((1, 2))
        depth, k, p_odd, p_even, kind, tri, cum, use_ab, sigma1 = _kernel_args(spec)
        _kernels.batch_values(
            np.uint64(stream.seed), stream.replicate, out, depth, k, p_odd, p_even, kind, tri, cum, use_ab, sigma1
        )
        return out[0]
    leaf_offset = spec.n_internal

    def walk(node: int, level: int) -> np.ndarray:
        if level == spec.depth:
            return np.asarray(stream.leaf(node, node - leaf_offset, spec.domain), dtype=float)
        who = stream.controller(node, spec.depth - level, spec.assignment)
        best = None
        for c in range(spec.branching):
            v = walk(node * spec.branching + 1 + c, level + 1)
            if best is None or v[who - 1] > best[who - 1]:
                best = v
        return best

    return walk(0, 0)


def exact_spe_value(
    explicit_leaves: Sequence[Sequence[float]], explicit_controllers: Sequence[int], branching: int = 2
) -> np.ndarray:
    """Backward induction on a fully materialised tree.

    ``explicit_controllers`` lists the controlling player (1 or 2) of every
    internal node in breadth-first order.
    """
    leaves = np.asarray(explicit_leaves, dtype=float).reshape(-1, 2)
    ctrl = np.asarray(explicit_controllers, dtype=np.int64).ravel()
    n = len(leaves)
    depth = round(math.log(n, branching)) if n > 1 else 0
    if depth < 1 or branching**depth != n:
        raise LengthMismatch(f"{n} leaves is not a positive power of {branching}")
    n_internal = (n - 1) // (branching - 1)
    if len(ctrl) != n_internal:
        raise LengthMismatch(f"expected {n_internal} controllers, got {len(ctrl)}")
    vals = leaves
    for level in range(depth - 1, -1, -1):
        width = branching**level
        first = (width - 1) // (branching - 1)
        who = ctrl[first : first + width]
        v = vals.reshape(width, branching, 2)
        coord = np.where((who == 1)[:, None], v[:, :, 0], v[:, :, 1])
        pick = np.argmax(coord, axis=1)
        vals = v[np.arange(width), pick]
    return vals[0]


def record_stream(spec: GameSpec, seed: int, replicate: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Every leaf and controller draw a replicate would use, in BFS order."""
    depth, k, p_odd, p_even, kind, tri, cum, _, _ = _kernel_args(spec)
    leaves = np.empty((spec.n_leaves, 2))
    controllers = np.empty(spec.n_internal, np.int64)
    rkey = replicate_key(np.uint64(int(seed) & ((1 << 64) - 1)), replicate)
    _kernels.record_tree(np.uint64(rkey), depth, k, p_odd, p_even, kind, tri, cum, leaves, controllers)
    return leaves, controllers


@dataclass
class ValueSampleSet:
    """Monte Carlo SPE payoff profiles for one game specification."""

    samples: np.ndarray
    spec: GameSpec | None = None
    seed: int | None = None
    wall_time: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1, 2)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def payoff1(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def payoff2(self) -> np.ndarray:
        return self.samples[:, 1]

    def meta_dict(self) -> dict:
        out = dict(self.meta)
        if self.spec is not None:
            out["spec"] = self.spec.to_dict()
        out["seed"] = self.seed
        out["wall_time"] = self.wall_time
        out["replicates"] = len(self)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("replicate,payoff1,payoff2\n")
        for i, (a, b) in enumerate(self.samples):
            buf.write(f"{i},{float(a)!r},{float(b)!r}\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"meta": self.meta_dict(), "samples": self.samples.tolist()})

    @classmethod
    def from_csv(cls, text: str) -> "ValueSampleSet":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [h.strip() for h in rows[0]] != ["replicate", "payoff1", "payoff2"]:
            raise SchemaMismatch("sample CSV must have header replicate,payoff1,payoff2")
        data = np.array([[float(r[1]), float(r[2])] for r in rows[1:] if r], dtype=float)
        return cls(data.reshape(-1, 2))

    @classmethod
    def from_json(cls, text: str) -> "ValueSampleSet":
        doc = json.loads(text)
        meta = doc.get("meta", {})
        spec = GameSpec.from_dict(meta["spec"]) if "spec" in meta else None
        return cls(np.asarray(doc["samples"], dtype=float), spec, meta.get("seed"), meta.get("wall_time"))

    @classmethod
    def load(cls, path: str | Path) -> "ValueSampleSet":
        path = Path(path)
        text = path.read_text()
        return cls.from_json(text) if path.suffix == ".json" else cls.from_csv(text)


def simulate(
    spec: GameSpec,
    replicates: int = 100_000,
    seed: int = 0,
    threads: int = 1,
    chunk: int = 4096,
) -> ValueSampleSet:
    """Parallel Monte Carlo driver.

    Replicate ``r`` only reads the stream keyed by ``(seed, r)``, and results
    are written by replicate index, so the output does not depend on
    ``threads``.
    """
    if replicates < 1:
        raise ConfigError("replicates must be >= 1", "replicates")
    depth, k, p_odd, p_even, kind, tri, cum, use_ab, sigma1 = _kernel_args(spec)
    out = np.empty((replicates, 2))
    useed = np.uint64(int(seed) & ((1 << 64) - 1))

    def run(start: int) -> None:
        stop = min(start + chunk, replicates)
        _kernels.batch_values(useed, start, out[start:stop], depth, k, p_odd, p_even, kind, tri, cum, use_ab, sigma1)

    t0 = time.perf_counter()
    starts = range(0, replicates, chunk)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)
    return ValueSampleSet(out, spec, int(seed), time.perf_counter() - t0)


def _as_points(samples) -> np.ndarray:
    arr = samples.samples if isinstance(samples, ValueSampleSet) else np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise EmptySampleSet("no samples")
    return arr


def empirical_box_mass(samples, center: Sequence[float] | float, half_width: float) -> float:
    """Fraction of samples inside the closed L-infinity box around ``center``."""
    pts = _as_points(samples)
    c = np.atleast_1d(np.asarray(center, dtype=float))
    pts = pts.reshape(len(pts), -1)
    inside = np.all(np.abs(pts[:, : len(c)] - c) <= half_width, axis=1)
    return float(inside.mean())


def ks_statistic(samples: Sequence[float], reference_cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Two-sided Kolmogorov-Smirnov distance D_N to a continuous reference CDF."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = len(x)
    if n == 0:
        raise EmptySampleSet("no samples")
    f = np.asarray(reference_cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def empirical_quantile(samples: Sequence[float], q: float) -> float:
    """Order-statistic quantile, interpolating linearly between neighbours."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptySampleSet("no samples")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    return float(np.quantile(x, q, method="linear"))
