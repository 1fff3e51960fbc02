"""Seeded event-stream generation for a thermal photon-pair source.

Pairs are emitted by a doubly stochastic Poisson process. The intensity is
piecewise constant on segments of length ``thermal_coherence_time`` (random
common phase) and each segment's level is exponentially distributed, which
makes the pair count per segment geometric and g2(0) exactly 2. Only
non-empty segments are ever drawn, so the cost scales with the number of
pairs, not with duration / coherence time.

Timestamps are int64 picoseconds throughout.
"""

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from ._kernels import dead_time_keep
from .errors import InputError, ParameterError
from .theory import TwoPhotonWaveform

PS = 1e12
_TARGET_CHUNK = 1 << 20


class DetectionEvent(NamedTuple):
    channel: int
    timestamp: int


@dataclass
class EventStream:
    """Time-ordered picosecond timestamps recorded on one channel."""

    timestamps: np.ndarray
    duration: float
    channel: int = 0

    def __post_init__(self):
        self.timestamps = np.ascontiguousarray(self.timestamps, dtype=np.int64)
        if self.duration <= 0:
            raise ParameterError("stream duration must be positive")

    def __len__(self):
        return int(self.timestamps.size)

    def __iter__(self):
        for t in self.timestamps:
            yield DetectionEvent(self.channel, int(t))

    @property
    def rate(self):
        return len(self) / self.duration

    def is_sorted(self, strict=False):
        d = np.diff(self.timestamps)
        return bool(np.all(d > 0) if strict else np.all(d >= 0))

    def with_channel(self, channel):
        return EventStream(self.timestamps, self.duration, channel)


@dataclass
class SourceConfig:
    pair_rate: float
    waveform: TwoPhotonWaveform
    thermal_coherence_time: float = 0.0
    background_rate_signal: float = 0.0
    background_rate_idler: float = 0.0
    duration: float = 1.0
    seed: int = 0

    def validate(self):
        for name in ("pair_rate", "background_rate_signal", "background_rate_idler"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ParameterError(f"{name} must be a finite non-negative rate, got {value!r}")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ParameterError(f"duration must be positive, got {self.duration!r}")
        if not self.thermal_coherence_time >= 0:
            raise ParameterError("thermal_coherence_time must be >= 0")
        if not isinstance(self.waveform, TwoPhotonWaveform):
            raise InputError("waveform must be a TwoPhotonWaveform")
        if abs(self.waveform.norm() - 1.0) > 1e-6:
            raise InputError(f"waveform density integrates to {self.waveform.norm():.9f}, not 1")
        if np.any(self.waveform.density < 0):
            raise InputError("waveform density has negative entries")
        return self


@dataclass
class DetectorConfig:
    """Lumped detection chain: ``efficiency`` folds filters, coupling and QE."""

    efficiency: float = 1.0
    jitter_sigma: float = 0.0
    dead_time: float = 50e-9
    dark_rate: float = 0.0

    def validate(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ParameterError(f"efficiency must lie in [0, 1], got {self.efficiency!r}")
        if not self.jitter_sigma >= 0:
            raise ParameterError("jitter_sigma must be >= 0")
        if not self.dead_time >= 0:
            raise ParameterError("dead_time must be >= 0")
        if not self.dark_rate >= 0:
            raise ParameterError("dark_rate must be >= 0")
        return self


IDEAL_DETECTOR = DetectorConfig(efficiency=1.0, jitter_sigma=0.0, dead_time=0.0, dark_rate=0.0)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _children(seed, n):
    if isinstance(seed, np.random.Generator):
        return [np.random.default_rng(s) for s in seed.bit_generator.seed_seq.spawn(n)]
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _poisson_times(rng, rate, lo, hi):
    """Sorted Poisson arrival times (float ps) on [lo, hi)."""
    n = rng.poisson(rate * (hi - lo) / PS)
    t = lo + (hi - lo) * rng.random(n)
    t.sort()
    return t


def pair_emission_chunks(rate, coherence_time, duration, rng, target=_TARGET_CHUNK):
    """Yield ``(lo, hi, times)`` covering [0, duration) in order.

    ``times`` are sorted float picoseconds of pair emissions inside [lo, hi).
    ``coherence_time`` of 0 gives a Poisson source, ``inf`` (or anything
    longer than the acquisition) a single exponential intensity level.
    """
    T = duration * PS
    if rate <= 0:
        yield 0.0, T, np.empty(0)
        return

    if coherence_time == 0 or coherence_time * PS >= T:
        level = rate if coherence_time == 0 else rng.exponential(rate)
        n_blocks = max(1, int(math.ceil(level * duration / target)))
        edges = np.linspace(0.0, T, n_blocks + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            yield lo, hi, _poisson_times(rng, level, lo, hi)
        return

    L = coherence_time * PS
    phase = rng.random() * L
    n_segments = int(math.ceil((T + phase) / L))
    mu = rate * coherence_time
    q = mu / (1.0 + mu)  # P(segment non-empty)
    batch = max(16, int(target / (1.0 + mu)))
    last = -1
    lo = 0.0
    while True:
        idx = last + np.cumsum(rng.geometric(q, size=batch))
        done = idx[-1] >= n_segments
        idx = idx[idx < n_segments]
        if idx.size:
            n_per = rng.geometric(1.0 - q, size=idx.size)
            seg_start = np.repeat(idx * L - phase, n_per)
            t = seg_start + L * rng.random(seg_start.size)
            t = t[(t >= 0.0) & (t < T)]
            t.sort()
            last = int(idx[-1])
        else:
            t = np.empty(0)
        hi = T if done else min(T, (last + 1) * L - phase)
        yield lo, hi, t
        lo = hi
        if done:
            return


def _delays_ps(waveform, rng, size):
    return waveform.sample(rng, size) * PS


def simulate_source(config):
    """Ideal (pre-detector) signal and idler streams.

    Signal photons mark the pair emission time; idlers are delayed by a draw
    from the waveform density. Homogeneous Poisson background is added per
    channel. Identical configs give bit-identical streams.
    """
    config.validate()
    rng_pairs, rng_delay, rng_bs, rng_bi = _children(config.seed, 4)
    T = config.duration * PS
    sig_parts, idl_parts = [], []
    for lo, hi, t in pair_emission_chunks(config.pair_rate, config.thermal_coherence_time,
                                          config.duration, rng_pairs):
        idler = t + _delays_ps(config.waveform, rng_delay, t.size)
        sig_parts.append(t)
        idl_parts.append(idler)
        sig_parts.append(_poisson_times(rng_bs, config.background_rate_signal, lo, hi))
        idl_parts.append(_poisson_times(rng_bi, config.background_rate_idler, lo, hi))

    def finish(parts):
        t = np.floor(np.concatenate(parts)).astype(np.int64)
        t = t[(t >= 0) & (t < T)]
        t.sort(kind="stable")
        return t

    return (EventStream(finish(sig_parts), config.duration, 0),
            EventStream(finish(idl_parts), config.duration, 1))


def _finish_detection(times, det, duration, rng, channel):
    """Dark counts, jitter, re-sort and dead time on float-or-int ps times."""
    T = duration * PS
    dark = _poisson_times(rng, det.dark_rate, 0.0, T)
    t = np.concatenate([np.asarray(times, dtype=float), dark]) if dark.size else np.asarray(times, dtype=float)
    if det.jitter_sigma > 0 and t.size:
        t = t + rng.normal(0.0, det.jitter_sigma * PS, t.size)
    t = np.floor(t + 0.5).astype(np.int64)
    t = t[(t >= 0) & (t < T)]
    t.sort(kind="stable")
    if det.dead_time > 0 and t.size:
        t = t[dead_time_keep(t, np.int64(round(det.dead_time * PS)))]
    return EventStream(t, duration, channel)


def apply_detector(stream, det, seed=None):
    """Efficiency thinning, dark counts, Gaussian jitter, then dead time."""
    det.validate()
    if not stream.is_sorted():
        raise InputError("input stream must be time-sorted")
    rng_thin, rng_finish = _children(seed, 2)
    ts = stream.timestamps
    if det.efficiency < 1.0:
        ts = ts[rng_thin.random(ts.size) < det.efficiency]
    if det.dark_rate == 0 and det.jitter_sigma == 0 and det.dead_time == 0:
        return EventStream(ts.copy(), stream.duration, stream.channel)
    return _finish_detection(ts, det, stream.duration, rng_finish, stream.channel)


def beam_splitter(stream, transmittance=0.5, seed=None, channels=None):
    """Route each event to output A with probability ``transmittance``, else B."""
    if not 0.0 <= transmittance <= 1.0:
        raise ParameterError("transmittance must lie in [0, 1]")
    rng = _rng(seed)
    to_a = rng.random(len(stream)) < transmittance
    ca, cb = channels if channels is not None else (stream.channel, stream.channel)
    return (EventStream(stream.timestamps[to_a], stream.duration, ca),
            EventStream(stream.timestamps[~to_a], stream.duration, cb))


@dataclass
class Route:
    """Detectors fed by one arm: (channel, branching probability) pairs.

    The branching probabilities are the beam-splitter ratios and must sum to
    at most one.
    """

    outputs: list = field(default_factory=list)

    @classmethod
    def direct(cls, channel):
        return cls([(channel, 1.0)])

    @classmethod
    def split(cls, channel_a, channel_b, transmittance=0.5):
        return cls([(channel_a, transmittance), (channel_b, 1.0 - transmittance)])

    @property
    def channels(self):
        return [c for c, _ in self.outputs]


def _detect_probs(route, detectors):
    return np.array([p * detectors[c].efficiency for c, p in route.outputs], dtype=float)


def simulate_detection(config, signal_route, idler_route, detectors):
    """Detected streams for a full chain (source, splitters, detectors).

    Equivalent in distribution to simulate_source followed by beam_splitter
    and apply_detector on every output, but pairs losing both photons are
    never generated: thinning the Cox process keeps its segment structure and
    scales its mean rate by P(at least one photon detected).

    Returns a dict channel -> EventStream.
    """
    config.validate()
    for det in detectors.values():
        det.validate()
    channels = signal_route.channels + idler_route.channels
    if len(set(channels)) != len(channels):
        raise ParameterError("a detector channel may be fed by only one arm")
    missing = [c for c in channels if c not in detectors]
    if missing:
        raise ParameterError(f"no detector configured for channel(s) {missing}")

    (rng_pairs, rng_delay, rng_outcome, rng_bg, rng_route_bg,
     *rng_finish) = _children(config.seed, 5 + len(channels))

    ps = _detect_probs(signal_route, detectors)
    pi = _detect_probs(idler_route, detectors)
    lost_s = 1.0 - ps.sum()
    lost_i = 1.0 - pi.sum()
    p_any = 1.0 - lost_s * lost_i
    # joint outcome table (signal detector or lost) x (idler detector or lost)
    ext_s = np.concatenate([[lost_s], ps])
    ext_i = np.concatenate([[lost_i], pi])
    joint = np.outer(ext_s, ext_i)
    joint[0, 0] = 0.0
    cum = np.cumsum(joint.ravel())
    if p_any > 0:
        cum /= cum[-1]
    n_i_ext = ext_i.size

    parts = {c: [] for c in channels}
    sig_channels = signal_route.channels
    idl_channels = idler_route.channels
    bg_arms = [(config.background_rate_signal, ps, sig_channels),
               (config.background_rate_idler, pi, idl_channels)]

    rate = config.pair_rate * p_any
    for lo, hi, t in pair_emission_chunks(rate, config.thermal_coherence_time,
                                          config.duration, rng_pairs):
        if t.size:
            outcome = np.searchsorted(cum, rng_outcome.random(t.size), side="right")
            outcome = np.minimum(outcome, cum.size - 1)
            ks = outcome // n_i_ext - 1
            ki = outcome % n_i_ext - 1
            for k, c in enumerate(sig_channels):
                parts[c].append(t[ks == k])
            for k, c in enumerate(idl_channels):
                sel = t[ki == k]
                parts[c].append(sel + _delays_ps(config.waveform, rng_delay, sel.size))
        for bg_rate, probs, arm_channels in bg_arms:
            total = probs.sum()
            if bg_rate <= 0 or total <= 0:
                continue
            tb = _poisson_times(rng_bg, bg_rate * total, lo, hi)
            which = np.searchsorted(np.cumsum(probs) / total, rng_route_bg.random(tb.size), side="right")
            which = np.minimum(which, probs.size - 1)
            for k, c in enumerate(arm_channels):
                parts[c].append(tb[which == k])

    out = {}
    for c, rng in zip(channels, rng_finish):
        times = np.concatenate(parts[c]) if parts[c] else np.empty(0)
        times = np.floor(times)
        out[c] = _finish_detection(times, detectors[c], config.duration, rng, c)
    return out


def with_duration(config, duration):
    return replace(config, duration=duration)
