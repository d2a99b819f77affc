"""Compiled inner loops (numba).  All arithmetic is int64 and exact; callers
check that products stay below 2**62."""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _prod_at(nums, idx, d):
    p = np.int64(1)
    for i in range(d):
        p *= nums[i, idx[i]]
    return p


@njit(cache=True, nogil=True)
def lattice_max_abs_disc(q, nums, sizes, denom, n_points):
    """Max over lattice corners ``a`` of ``|c(a) * denom - N * prod(nums[i, a_i])|``.

    ``q[n, i]`` is the number of lattice values on axis ``i`` that are <= the
    point's coordinate, so point ``n`` lies in the open box at ``a`` iff
    ``q[n] <= a`` componentwise.

    Depth-first branch and bound over index boxes of the first d-1 axes; the
    last axis is always solved exactly by a scan of cumulative counts, so
    leaves are exact and a box is dropped only when no corner in it can beat
    the incumbent.  The returned maximum is exact.

    Each stacked box carries (a) a histogram over the last axis of the
    points below its lower corner and (b) the rows of ``q`` for points below
    its upper corner but not its lower one, stored contiguously in a shared
    buffer.

    Returns (best, corner, sign) with ``sign`` +1 when the count exceeds the
    volume at the corner.
    """
    N, d = q.shape
    e = d - 1
    K = sizes[e]
    last = nums[e]
    depth = 2
    for i in range(e):
        s = sizes[i]
        while s > 1:
            s = (s + 1) // 2
            depth += 1
    slots = depth + 4
    stack_lo = np.zeros((slots, d), dtype=np.int64)
    stack_hi = np.zeros((slots, d), dtype=np.int64)
    stack_start = np.zeros(slots, dtype=np.int64)
    stack_len = np.zeros(slots, dtype=np.int64)
    hists = np.zeros((slots, K), dtype=np.int64)
    buf = np.empty((max(1, N) * (2 * depth + 4), d), dtype=np.int32)
    active = np.zeros(K, dtype=np.int64)

    ln = 0
    for n in range(N):
        if q[n, e] > K - 1:
            continue
        inside_hi = True
        inside_lo = True
        for i in range(e):
            if q[n, i] > sizes[i] - 1:
                inside_hi = False
            if q[n, i] > 0:
                inside_lo = False
        if inside_lo:
            hists[0, q[n, e]] += 1
        elif inside_hi:
            for i in range(d):
                buf[ln, i] = q[n, i]
            ln += 1
    for i in range(e):
        stack_hi[0, i] = sizes[i] - 1
    stack_len[0] = ln
    sp = 1

    best = np.int64(-1)
    best_corner = np.zeros(d, dtype=np.int64)
    best_sign = 0
    lo = np.empty(d, dtype=np.int64)
    hi = np.empty(d, dtype=np.int64)
    while sp > 0:
        sp -= 1
        top = sp
        for i in range(e):
            lo[i] = stack_lo[top, i]
            hi[i] = stack_hi[top, i]
        start = stack_start[top]
        length = stack_len[top]
        p_lo = n_points * _prod_at(nums, lo, e)
        p_hi = n_points * _prod_at(nums, hi, e)
        for a in range(K):
            active[a] = 0
        for k in range(start, start + length):
            active[buf[k, e]] += 1
        c_lo = np.int64(0)
        c_act = np.int64(0)
        ub = np.int64(-1)
        for a in range(K):
            c_lo += hists[top, a]
            c_act += active[a]
            c_hi = c_lo + c_act
            x = last[a]
            v = c_lo * denom - p_lo * x
            if abs(v) > best:
                best = abs(v)
                best_sign = 1 if v > 0 else -1
                for i in range(e):
                    best_corner[i] = lo[i]
                best_corner[e] = a
            v = c_hi * denom - p_hi * x
            if abs(v) > best:
                best = abs(v)
                best_sign = 1 if v > 0 else -1
                for i in range(e):
                    best_corner[i] = hi[i]
                best_corner[e] = a
            u = c_hi * denom - p_lo * x
            if u > ub:
                ub = u
            u = p_hi * x - c_lo * denom
            if u > ub:
                ub = u
        if ub <= best:
            continue
        j = -1
        width = 0
        for i in range(e):
            if hi[i] - lo[i] > width:
                width = hi[i] - lo[i]
                j = i
        if j < 0:
            continue
        mid = (lo[j] + hi[j]) // 2
        # child 2 (upper half) gets slot sp, child 1 (lower half) slot sp+1;
        # child 1 is popped first, so its rows go above child 2's
        s2 = start + length
        l2 = 0
        c2 = sp
        c1 = sp + 1
        for a in range(K):
            hists[c1, a] = hists[top, a]
        # slot ``top`` == c2 is reused: its histogram already holds the
        # parent's counts and only gains the rows that drop below lo2
        for k in range(start, start + length):
            below = buf[k, j] <= mid + 1
            if below:
                for i in range(e):
                    if i != j and buf[k, i] > lo[i]:
                        below = False
                        break
            if below:
                hists[c2, buf[k, e]] += 1
            else:
                for i in range(d):
                    buf[s2 + l2, i] = buf[k, i]
                l2 += 1
        s1 = s2 + l2
        l1 = 0
        for k in range(start, start + length):
            if buf[k, j] <= mid:
                for i in range(d):
                    buf[s1 + l1, i] = buf[k, i]
                l1 += 1
        for i in range(e):
            stack_lo[c2, i] = lo[i]
            stack_hi[c2, i] = hi[i]
            stack_lo[c1, i] = lo[i]
            stack_hi[c1, i] = hi[i]
        stack_lo[c2, j] = mid + 1
        stack_hi[c1, j] = mid
        stack_start[c2] = s2
        stack_len[c2] = l2
        stack_start[c1] = s1
        stack_len[c1] = l1
        sp += 2
    return best, best_corner, best_sign


@njit(cache=True, nogil=True)
def product_max_weight(hi_nums, lo_nums, sizes):
    """Max over index tuples of ``prod(hi_nums[i, a_i]) - prod(lo_nums[i, a_i])``.

    Returns (max, argmax tuple).
    """
    d = sizes.shape[0]
    idx = np.zeros(d, dtype=np.int64)
    best = np.int64(-1)
    arg = np.zeros(d, dtype=np.int64)
    # prefix products for the first d-1 axes, last axis scanned in the loop
    ph = np.ones(d + 1, dtype=np.int64)
    pl = np.ones(d + 1, dtype=np.int64)
    for i in range(d - 1):
        ph[i + 1] = ph[i] * hi_nums[i, 0]
        pl[i + 1] = pl[i] * lo_nums[i, 0]
    last = d - 1
    while True:
        a = ph[last]
        b = pl[last]
        for k in range(sizes[last]):
            w = a * hi_nums[last, k] - b * lo_nums[last, k]
            if w > best:
                best = w
                for i in range(last):
                    arg[i] = idx[i]
                arg[last] = k
        # odometer over the first d-1 axes
        i = last - 1
        while i >= 0:
            idx[i] += 1
            if idx[i] < sizes[i]:
                break
            idx[i] = 0
            i -= 1
        if i < 0:
            break
        for t in range(i, last):
            ph[t + 1] = ph[t] * hi_nums[t, idx[t]]
            pl[t + 1] = pl[t] * lo_nums[t, idx[t]]
    return best, arg
