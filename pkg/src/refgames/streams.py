"""Counter-based random streams.

Every random quantity in a simulated game is a pure function of
``(seed, replicate, node, lane)``: the seed and replicate are hashed into a
64-bit key, and the draw is the SplitMix64 output at counter position
``4 * node + lane + 1`` under that key. The top 53 bits become a double in
[0, 1). Nodes are numbered
in breadth-first (heap) order, so the stream can be read in any order and
pruned subtrees simply never ask for their draws.

Lanes: 0 is the controller coin of an internal node, 1-3 are the uniforms that
place a leaf payoff.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV53 = 1.0 / 9007199254740992.0

CONTROLLER_LANE = 0
LEAF_LANES = (1, 2, 3)


@njit(cache=True, nogil=True, inline="always")
def _mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def replicate_key(seed, replicate):
    base = _mix64(np.uint64(seed) ^ np.uint64(_GOLDEN))
    return _mix64(base + np.uint64(replicate + 1) * np.uint64(_GOLDEN))


@njit(cache=True, nogil=True, inline="always")
def draw(rkey, node, lane):
    # SplitMix64 output at counter position 4*node + lane + 1 of the replicate key
    ctr = np.uint64(node) * np.uint64(4) + np.uint64(lane + 1)
    h = _mix64(rkey + ctr * np.uint64(_GOLDEN))
    return np.float64(h >> np.uint64(11)) * _INV53


def reference_draw(seed: int, replicate: int, node: int, lane: int) -> float:
    """Pure-Python twin of the compiled stream (used to cross-check it)."""

    def mix(z: int) -> int:
        z &= MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    base = mix((seed & MASK64) ^ _GOLDEN)
    rkey = mix(base + ((replicate + 1) * _GOLDEN & MASK64))
    h = mix(rkey + (((node * 4 + lane + 1) * _GOLDEN) & MASK64))
    return (h >> 11) * _INV53


class CounterStream:
    """Random-access stream for one replicate of one seed."""

    def __init__(self, seed: int, replicate: int = 0):
        self.seed = int(seed) & MASK64
        self.replicate = int(replicate)
        self.key = np.uint64(replicate_key(np.uint64(self.seed), self.replicate))

    def uniform(self, node: int, lane: int) -> float:
        return float(draw(self.key, node, lane))

    def leaf(self, node: int, leaf_number: int, domain) -> np.ndarray:
        u = [self.uniform(node, lane) for lane in LEAF_LANES]
        return domain.point_from_uniforms(*u)

    def controller(self, node: int, height: int, assignment) -> int:
        return 1 if self.uniform(node, CONTROLLER_LANE) < assignment.p1_at(height) else 2


class ReplayStream:
    """Stream that serves explicitly given leaves and (optionally) controllers.

    Leaves are indexed by leaf number (left to right); controllers by
    breadth-first node index. Without explicit controllers the assignment
    model is sampled from ``rng`` (deterministic for the alternating model).
    """

    def __init__(self, leaves, controllers=None, rng: np.random.Generator | None = None):
        self.leaves = np.asarray(leaves, dtype=float)
        self.controllers = None if controllers is None else list(controllers)
        self.rng = rng or np.random.default_rng(0)

    def leaf(self, node: int, leaf_number: int, domain) -> np.ndarray:
        return self.leaves[leaf_number]

    def controller(self, node: int, height: int, assignment) -> int:
        if self.controllers is not None:
            return int(self.controllers[node])
        return 1 if self.rng.random() < assignment.p1_at(height) else 2
