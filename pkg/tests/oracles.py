"""Brute-force reference implementations used as test oracles."""

import numpy as np


def brute_start_stop(start, stop, lo, bw, nbins):
    counts = np.zeros(nbins, dtype=np.int64)
    if len(stop) == 0:
        return counts
    hi = lo + nbins * bw
    for chunk in range(0, len(start), 512):
        a = start[chunk:chunk + 512]
        d = stop[None, :] - a[:, None]
        ok = d >= lo
        has = ok.any(axis=1)
        first = np.where(has, np.argmax(ok, axis=1), 0)
        dd = d[np.arange(len(a)), first][has]
        dd = dd[dd < hi]
        np.add.at(counts, (dd - lo) // bw, 1)
    return counts


def brute_multi_stop(start, stop, lo, bw, nbins):
    counts = np.zeros(nbins, dtype=np.int64)
    hi = lo + nbins * bw
    for chunk in range(0, len(start), 512):
        d = (stop[None, :] - start[chunk:chunk + 512, None]).ravel()
        d = d[(d >= lo) & (d < hi)]
        np.add.at(counts, (d - lo) // bw, 1)
    return counts


def brute_threefold(a, b, p, w_lo, w_hi, lo, bw, nbins):
    counts = np.zeros(nbins, dtype=np.int64)
    n_herald = 0
    hi = lo + nbins * bw
    for ta in a:
        for tb in b:
            if w_lo <= tb - ta <= w_hi:
                n_herald += 1
                for tp in p:
                    d = tp - ta
                    if lo <= d < hi:
                        counts[(d - lo) // bw] += 1
    return counts, n_herald


def brute_threefold_dense(a, b, p, w_lo, w_hi, lo, bw, nbins):
    """Same enumeration as brute_threefold, broadcast instead of looped."""
    counts = np.zeros(nbins, dtype=np.int64)
    ia, ib = np.nonzero((b[None, :] - a[:, None] >= w_lo) & (b[None, :] - a[:, None] <= w_hi))
    hi = lo + nbins * bw
    for ta in a[ia]:
        d = p - ta
        d = d[(d >= lo) & (d < hi)]
        np.add.at(counts, (d - lo) // bw, 1)
    return counts, int(ia.size)
