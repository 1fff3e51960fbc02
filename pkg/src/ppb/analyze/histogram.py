"""Delay histograms over sorted timestamp streams.

The start stream is sharded into contiguous blocks that are histogrammed on
a thread pool and summed, so results do not depend on the worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import InputError

START_STOP = "start-stop"
MULTI_STOP = "multi-stop"
_MIN_SHARD = 200_000


@dataclass
class Histogram:
    """Uniform delay histogram. ``bin_width`` and ``origin`` are in ps;
    ``origin`` is the left edge of bin 0."""

    bin_width: int
    origin: int
    counts: np.ndarray
    acquisition_time: float
    n_start: int
    n_stop: int
    mode: str = MULTI_STOP

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.bin_width <= 0:
            raise InputError("bin_width must be positive")
        if self.acquisition_time <= 0:
            raise InputError("acquisition_time must be positive")
        if np.any(self.counts < 0):
            raise InputError("histogram counts must be non-negative")

    @property
    def nbins(self):
        return int(self.counts.size)

    @property
    def edges(self):
        return self.origin + self.bin_width * np.arange(self.nbins + 1, dtype=np.int64)

    @property
    def centers(self):
        return self.origin + self.bin_width * (np.arange(self.nbins) + 0.5)

    @property
    def total(self):
        return int(self.counts.sum())

    def bin_of(self, tau_ps):
        i = int(np.floor((tau_ps - self.origin) / self.bin_width))
        if not 0 <= i < self.nbins:
            raise InputError(f"delay {tau_ps} ps lies outside the histogram")
        return i


def worker_count(workers=None):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("PPB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"PPB_THREADS must be an integer, got {env!r}") from None
    return max(1, min(8, os.cpu_count() or 1))


def _shards(n, workers):
    n_shards = max(1, min(workers, n // _MIN_SHARD))
    bounds = np.linspace(0, n, n_shards + 1).astype(np.int64)
    return list(zip(bounds[:-1], bounds[1:]))


def run_sharded(func, start, workers=None):
    """Apply ``func(start_block)`` over contiguous shards; return the results list."""
    shards = _shards(start.size, worker_count(workers))
    if len(shards) == 1:
        return [func(start)]
    with ThreadPoolExecutor(max_workers=len(shards)) as pool:
        return list(pool.map(lambda ab: func(start[ab[0]:ab[1]]), shards))


def _as_times(stream, name):
    ts = np.ascontiguousarray(getattr(stream, "timestamps", stream), dtype=np.int64)
    if ts.size > 1 and np.any(ts[1:] < ts[:-1]):
        raise InputError(f"{name} stream is not time-sorted")
    return ts


def _duration(*streams):
    for s in streams:
        d = getattr(s, "duration", None)
        if d:
            return float(d)
    raise InputError("acquisition time unknown; pass EventStreams or duration=")


def _binning(resolution, range_ps):
    resolution = int(resolution)
    if resolution < 1:
        raise InputError("resolution must be at least 1 ps")
    lo, hi = int(range_ps[0]), int(range_ps[1])
    if hi <= lo:
        raise InputError("range must be increasing")
    nbins = int(np.ceil((hi - lo) / resolution))
    return resolution, lo, nbins


def start_stop_histogram(start, stop, resolution, range_ps, mode=START_STOP,
                         workers=None, duration=None):
    """TCSPC delay histogram of ``stop - start`` over ``range_ps = (lo, hi)``.

    ``start-stop``: each start is paired with the first stop at delay >= lo.
    ``multi-stop``: every stop in range counts (full cross-correlation).
    The upper edge is rounded up to a whole number of bins.
    """
    a = _as_times(start, "start")
    b = _as_times(stop, "stop")
    bw, lo, nbins = _binning(resolution, range_ps)
    if mode == START_STOP:
        kernel = _kernels.start_stop_counts
    elif mode == MULTI_STOP:
        kernel = _kernels.multi_stop_counts
    else:
        raise InputError(f"unknown histogram mode {mode!r}")
    parts = run_sharded(lambda blk: kernel(blk, b, np.int64(lo), np.int64(bw), nbins), a, workers)
    counts = np.sum(parts, axis=0) if len(parts) > 1 else parts[0]
    T = duration if duration is not None else _duration(start, stop)
    return Histogram(bw, lo, counts, T, int(a.size), int(b.size), mode)


def rebin(h, new_bin_width):
    """Sum groups of adjacent bins; a trailing partial group is zero-padded."""
    new_bin_width = int(new_bin_width)
    if new_bin_width <= 0 or new_bin_width % h.bin_width:
        raise InputError(f"new bin width {new_bin_width} ps is not a multiple of {h.bin_width} ps")
    factor = new_bin_width // h.bin_width
    if factor == 1:
        return Histogram(h.bin_width, h.origin, h.counts.copy(), h.acquisition_time,
                         h.n_start, h.n_stop, h.mode)
    n = int(np.ceil(h.nbins / factor)) * factor
    padded = np.zeros(n, dtype=np.int64)
    padded[:h.nbins] = h.counts
    counts = padded.reshape(-1, factor).sum(axis=1)
    return Histogram(new_bin_width, h.origin, counts, h.acquisition_time, h.n_start, h.n_stop, h.mode)


def centered_range(center_ps, coarse_ps, n_side):
    """(lo, hi) spanning 2*n_side+1 coarse bins with the middle one centered on
    ``center_ps``; fine bins that divide ``coarse_ps`` rebin onto it exactly."""
    coarse_ps = int(coarse_ps)
    lo = int(round(center_ps)) - coarse_ps // 2 - n_side * coarse_ps
    return lo, lo + (2 * n_side + 1) * coarse_ps


def threefold_histogram(herald_a, herald_b, probe, herald_window, bin_ps, range_ps,
                        herald_offset=0, workers=None, duration=None):
    """Histogram of probe delays relative to herald_a for every herald pair.

    A herald is any (a, b) pair with ``|t_b - t_a - herald_offset| <=
    herald_window / 2`` (window in seconds, offset in ps). ``n_start`` of the
    result is the number of heralds, ``n_stop`` the number of probe events.
    """
    a = _as_times(herald_a, "herald_a")
    b = _as_times(herald_b, "herald_b")
    p = _as_times(probe, "probe")
    if herald_window <= 0:
        raise InputError("herald_window must be positive")
    half = int(round(herald_window * 1e12 / 2))
    w_lo = np.int64(int(round(herald_offset)) - half)
    w_hi = np.int64(int(round(herald_offset)) + half)
    bw, lo, nbins = _binning(bin_ps, range_ps)
    parts = run_sharded(
        lambda blk: _kernels.threefold_counts(blk, b, p, w_lo, w_hi, np.int64(lo), np.int64(bw), nbins),
        a, workers)
    counts = np.sum([c for c, _ in parts], axis=0)
    n_herald = int(sum(n for _, n in parts))
    T = duration if duration is not None else _duration(herald_a, herald_b, probe)
    return Histogram(bw, lo, counts, T, n_herald, int(p.size), MULTI_STOP)


def count_heralds(herald_a, herald_b, herald_window, herald_offset=0):
    a = _as_times(herald_a, "herald_a")
    b = _as_times(herald_b, "herald_b")
    half = int(round(herald_window * 1e12 / 2))
    off = int(round(herald_offset))
    return int(_kernels.count_pairs_in_window(a, b, np.int64(off - half), np.int64(off + half)))
