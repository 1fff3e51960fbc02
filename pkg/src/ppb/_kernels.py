"""Compiled single-pass loops over sorted int64 picosecond timestamps.

All kernels release the GIL so shards can run on a thread pool.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def dead_time_keep(t, dead):
    """Non-paralyzable dead time: keep an event only if it is at least
    ``dead`` after the previous *kept* event."""
    n = t.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    if n == 0:
        return keep
    keep[0] = True
    last = t[0]
    for i in range(1, n):
        if t[i] - last >= dead:
            keep[i] = True
            last = t[i]
    return keep


@njit(cache=True, nogil=True)
def start_stop_counts(start, stop, lo, bw, nbins):
    """Each start is paired with the first stop at delay >= lo; counted if
    that delay falls inside [lo, lo + nbins*bw)."""
    counts = np.zeros(nbins, dtype=np.int64)
    ns = start.shape[0]
    nt = stop.shape[0]
    if ns == 0 or nt == 0:
        return counts
    hi = lo + nbins * bw
    j = np.searchsorted(stop, start[0] + lo)
    for i in range(ns):
        target = start[i] + lo
        while j < nt and stop[j] < target:
            j += 1
        if j == nt:
            break
        d = stop[j] - start[i]
        if d < hi:
            counts[(d - lo) // bw] += 1
    return counts


@njit(cache=True, nogil=True)
def multi_stop_counts(start, stop, lo, bw, nbins):
    """Every (start, stop) pair with delay in [lo, lo + nbins*bw)."""
    counts = np.zeros(nbins, dtype=np.int64)
    ns = start.shape[0]
    nt = stop.shape[0]
    if ns == 0 or nt == 0:
        return counts
    hi = lo + nbins * bw
    j = np.searchsorted(stop, start[0] + lo)
    for i in range(ns):
        target = start[i] + lo
        while j < nt and stop[j] < target:
            j += 1
        k = j
        while k < nt:
            d = stop[k] - start[i]
            if d >= hi:
                break
            counts[(d - lo) // bw] += 1
            k += 1
    return counts


@njit(cache=True, nogil=True)
def threefold_counts(a, b, probe, w_lo, w_hi, lo, bw, nbins):
    """Herald = every (a, b) pair with b - a in [w_lo, w_hi]; for each herald,
    all probe events with probe - a in [lo, lo + nbins*bw) are histogrammed.

    Returns (counts, number of heralds).
    """
    counts = np.zeros(nbins, dtype=np.int64)
    n_herald = 0
    na = a.shape[0]
    nb = b.shape[0]
    npr = probe.shape[0]
    if na == 0 or nb == 0:
        return counts, n_herald
    hi = lo + nbins * bw
    jb = np.searchsorted(b, a[0] + w_lo)
    jp = np.searchsorted(probe, a[0] + lo)
    for i in range(na):
        ta = a[i]
        while jb < nb and b[jb] < ta + w_lo:
            jb += 1
        k = jb
        n_here = 0
        while k < nb and b[k] <= ta + w_hi:
            n_here += 1
            k += 1
        if n_here == 0:
            continue
        n_herald += n_here
        while jp < npr and probe[jp] < ta + lo:
            jp += 1
        p = jp
        while p < npr:
            d = probe[p] - ta
            if d >= hi:
                break
            counts[(d - lo) // bw] += n_here
            p += 1
    return counts, n_herald


@njit(cache=True, nogil=True)
def count_pairs_in_window(a, b, w_lo, w_hi):
    """Number of (a, b) pairs with b - a in [w_lo, w_hi]."""
    na = a.shape[0]
    nb = b.shape[0]
    total = 0
    if na == 0 or nb == 0:
        return total
    jb = np.searchsorted(b, a[0] + w_lo)
    for i in range(na):
        while jb < nb and b[jb] < a[i] + w_lo:
            jb += 1
        k = jb
        while k < nb and b[k] <= a[i] + w_hi:
            total += 1
            k += 1
    return total


@njit(cache=True, nogil=True)
def greedy_match(a, b, offset, half):
    """Match each a (in time order) to the nearest unused b with
    |b - a - offset| <= half. Each event is used at most once."""
    na = a.shape[0]
    nb = b.shape[0]
    used = np.zeros(nb, dtype=np.bool_)
    matched = 0
    j = 0
    for i in range(na):
        target = a[i] + offset
        while j < nb and b[j] < target - half:
            j += 1
        best = -1
        best_d = half + 1
        k = j
        while k < nb and b[k] <= target + half:
            if not used[k]:
                d = abs(b[k] - target)
                if d < best_d:
                    best_d = d
                    best = k
            k += 1
        if best >= 0:
            used[best] = True
            matched += 1
    return matched
