"""Compiled streaming backward induction.

Both walkers keep one frame per tree level (an explicit stack for the
exhaustive walker, the call stack for alpha-beta), so memory is O(depth)
whatever the number of leaves. Node numbering is breadth-first: the children
of node ``i`` are ``k*i + 1 .. k*i + k``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .streams import draw, replicate_key

SEGMENT = 0
POLYGON = 1


@njit(cache=True, nogil=True, inline="always")
def _is_p1(rkey, node, height, p_odd, p_even):
    p = p_odd if height % 2 == 1 else p_even
    if p >= 1.0:
        return True
    if p <= 0.0:
        return False
    return draw(rkey, node, 0) < p


@njit(cache=True, nogil=True)
def _controller(rkey, node, height, p_odd, p_even):
    return 1 if _is_p1(rkey, node, height, p_odd, p_even) else 2


@njit(cache=True, nogil=True)
def _leaf_point(rkey, node, kind, tri, cum):
    if kind == SEGMENT:
        u = draw(rkey, node, 1)
        ax = tri[0, 0, 0]
        ay = tri[0, 0, 1]
        return ax + u * (tri[0, 1, 0] - ax), ay + u * (tri[0, 1, 1] - ay)
    u1 = draw(rkey, node, 1)
    u2 = draw(rkey, node, 2)
    u3 = draw(rkey, node, 3)
    # searchsorted(cum, u1, side="right")
    lo = 0
    hi = cum.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if cum[mid] <= u1:
            lo = mid + 1
        else:
            hi = mid
    idx = min(lo, cum.shape[0] - 1)
    if u2 + u3 > 1.0:
        r1 = 1.0 - u2
        r2 = 1.0 - u3
    else:
        r1 = u2
        r2 = u3
    ax = tri[idx, 0, 0]
    ay = tri[idx, 0, 1]
    x = ax + r1 * (tri[idx, 1, 0] - ax) + r2 * (tri[idx, 2, 0] - ax)
    y = ay + r1 * (tri[idx, 1, 1] - ay) + r2 * (tri[idx, 2, 1] - ay)
    return x, y


@njit(cache=True, nogil=True)
def full_value(rkey, depth, k, p_odd, p_even, kind, tri, cum):
    """Exhaustive depth-first backward induction; ties keep the first child."""
    node = np.empty(depth, np.int64)
    cnt = np.empty(depth, np.int64)
    ctrl = np.empty(depth, np.int64)
    bx = np.empty(depth)
    by = np.empty(depth)
    t = 0
    node[0] = 0
    cnt[0] = 0
    ctrl[0] = _controller(rkey, 0, depth, p_odd, p_even)
    while True:
        if cnt[t] == k:
            vx = bx[t]
            vy = by[t]
            if t == 0:
                return vx, vy
            t -= 1
        else:
            child = node[t] * k + 1 + cnt[t]
            cnt[t] += 1
            if t + 1 < depth:
                t += 1
                node[t] = child
                cnt[t] = 0
                ctrl[t] = _controller(rkey, child, depth - t, p_odd, p_even)
                continue
            vx, vy = _leaf_point(rkey, child, kind, tri, cum)
        # fold the finished child (vx, vy) into level t
        if cnt[t] == 1:
            bx[t] = vx
            by[t] = vy
        elif ctrl[t] == 1:
            if vx > bx[t]:
                bx[t] = vx
                by[t] = vy
        elif vy > by[t]:
            bx[t] = vx
            by[t] = vy


@njit(cache=True, nogil=True, inline="always")
def _last_level(rkey, node, k, ismax, sigma1):
    first = node * k + 1
    best = sigma1 * draw(rkey, first, 1)
    if k == 2:
        v = sigma1 * draw(rkey, first + 1, 1)
        return max(best, v) if ismax else min(best, v)
    for c in range(1, k):
        v = sigma1 * draw(rkey, first + c, 1)
        best = max(best, v) if ismax else min(best, v)
    return best


# not cached: numba cache entries for recursive functions crash on reload
@njit(nogil=True)
def alphabeta_value(rkey, node, height, k, p_odd, p_even, sigma1, alpha, beta):
    """Fail-soft alpha-beta value of ``node`` for a zero-sum-like segment.

    Player 1 maximises ``v = sigma1 * u`` and player 2 minimises it, ``u``
    being the leaf's segment parameter. The two lowest levels are evaluated
    exhaustively (exact values are valid fail-soft results and avoid
    unpredictable branches). At the root the window is infinite, so the
    result is exact and, leaf draws being distinct, ``sigma1 * v`` is the
    winning leaf's parameter.
    """
    ismax = _is_p1(rkey, node, height, p_odd, p_even)
    if height == 1:
        return _last_level(rkey, node, k, ismax, sigma1)
    first = node * k + 1
    if height == 2 and k == 2:
        a = _last_level(rkey, first, 2, _is_p1(rkey, first, 1, p_odd, p_even), sigma1)
        b = _last_level(rkey, first + 1, 2, _is_p1(rkey, first + 1, 1, p_odd, p_even), sigma1)
        return max(a, b) if ismax else min(a, b)
    if height == 2:
        out = 0.0
        for c in range(k):
            w = _last_level(rkey, first + c, k, _is_p1(rkey, first + c, 1, p_odd, p_even), sigma1)
            if c == 0:
                out = w
            else:
                out = max(out, w) if ismax else min(out, w)
        return out
    if ismax:
        best = -np.inf
        for c in range(k):
            v = alphabeta_value(rkey, first + c, height - 1, k, p_odd, p_even, sigma1, max(alpha, best), beta)
            if v > best:
                best = v
                if best >= beta:
                    break
    else:
        best = np.inf
        for c in range(k):
            v = alphabeta_value(rkey, first + c, height - 1, k, p_odd, p_even, sigma1, alpha, min(beta, best))
            if v < best:
                best = v
                if best <= alpha:
                    break
    return best


@njit(nogil=True)
def batch_values(seed, start, out, depth, k, p_odd, p_even, kind, tri, cum, use_ab, sigma1):
    """Fill ``out[r]`` with the root value of replicate ``start + r``."""
    ax = tri[0, 0, 0]
    ay = tri[0, 0, 1]
    dx = tri[0, 1, 0] - ax
    dy = tri[0, 1, 1] - ay
    for r in range(out.shape[0]):
        rkey = replicate_key(seed, start + r)
        if use_ab:
            u = sigma1 * alphabeta_value(rkey, 0, depth, k, p_odd, p_even, sigma1, -np.inf, np.inf)
            out[r, 0] = ax + u * dx
            out[r, 1] = ay + u * dy
        else:
            x, y = full_value(rkey, depth, k, p_odd, p_even, kind, tri, cum)
            out[r, 0] = x
            out[r, 1] = y


@njit(cache=True, nogil=True)
def record_tree(rkey, depth, k, p_odd, p_even, kind, tri, cum, leaves, controllers):
    """Materialise every leaf and controller draw of one replicate."""
    n_internal = controllers.shape[0]
    for node in range(n_internal):
        level = 0
        first = 0
        width = 1
        while node >= first + width:
            first += width
            width *= k
            level += 1
        controllers[node] = _controller(rkey, node, depth - level, p_odd, p_even)
    for j in range(leaves.shape[0]):
        x, y = _leaf_point(rkey, n_internal + j, kind, tri, cum)
        leaves[j, 0] = x
        leaves[j, 1] = y
