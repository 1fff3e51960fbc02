"""Normalized correlation functions built from delay histograms."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .. import _kernels
from ..errors import FitError, InputError, NoPeakError, NormalizationError
from ..peaks import half_max_width, wing_baseline
from .histogram import (MULTI_STOP, START_STOP, Histogram, _as_times, _duration,
                        centered_range, rebin, start_stop_histogram, threefold_histogram)

PEAK_SIGNIFICANCE = 5.0


@dataclass
class CorrelationCurve:
    """g2 per bin; ``tau``, ``peak_tau``, ``fwhm`` and ``bin_width`` in ps.

    Bins whose normalization is undefined hold NaN.
    """

    tau: np.ndarray
    g2: np.ndarray
    sigma_g2: np.ndarray
    bin_width: float
    peak_value: float = math.nan
    peak_sigma: float = math.nan
    peak_tau: float = math.nan
    fwhm: float = math.nan
    meta: dict = field(default_factory=dict)

    def index_of(self, tau_ps):
        i = int(np.floor((tau_ps - (self.tau[0] - self.bin_width / 2)) / self.bin_width))
        if not 0 <= i < self.tau.size:
            raise InputError(f"delay {tau_ps} ps lies outside the curve")
        return i

    def value_at(self, tau_ps):
        """(g2, sigma) of the bin containing ``tau_ps``."""
        i = self.index_of(tau_ps)
        return float(self.g2[i]), float(self.sigma_g2[i])

    def wing_stats(self, fraction=0.2):
        """Mean of the outer ``fraction`` of bins and its propagated sigma."""
        n_side = max(1, int(round(self.tau.size * fraction / 2)))
        idx = np.r_[0:n_side, self.tau.size - n_side:self.tau.size]
        g, s = self.g2[idx], self.sigma_g2[idx]
        ok = np.isfinite(g)
        n = int(ok.sum())
        if n == 0:
            return math.nan, math.nan
        return float(g[ok].mean()), float(math.sqrt(np.sum(s[ok] ** 2)) / n)


@dataclass
class PeakInfo:
    tau: float
    counts: int
    significant: bool


def find_peak(h, coarse_ps=None, significance=PEAK_SIGNIFICANCE):
    """Delay (ps) of the histogram maximum, located on a coarser binning.

    Falls back to the bin containing zero delay when the maximum is not
    ``significance`` Poisson sigmas above the wing level, so pure noise never
    drags the evaluation point around.
    """
    hc = h
    if coarse_ps and coarse_ps > h.bin_width:
        width = int(coarse_ps) // h.bin_width * h.bin_width
        hc = rebin(h, width)
        # ignore the zero-padded tail bin of a partial group
        if h.nbins % (width // h.bin_width):
            hc = Histogram(hc.bin_width, hc.origin, hc.counts[:-1], hc.acquisition_time,
                           hc.n_start, hc.n_stop, hc.mode)
    counts = hc.counts.astype(float)
    base = wing_baseline(counts, 0.2)
    i = int(np.argmax(counts))
    excess = counts[i] - base
    significant = excess > significance * math.sqrt(max(base, 1.0))
    if significant:
        return PeakInfo(float(hc.centers[i]), int(hc.counts[i]), True)
    lo, hi = h.origin, h.origin + h.nbins * h.bin_width
    tau0 = 0.0 if lo <= 0 < hi else float(h.centers[h.nbins // 2])
    return PeakInfo(tau0, int(hc.counts[i]), False)


def normalize_cross_correlation(h, peak_coarse_ps=None):
    """g2(tau) = counts / (N_start N_stop dtau T) with N = events / T.

    Per-bin sigma is sqrt(counts) scaled identically.
    """
    T = h.acquisition_time
    if h.n_start <= 0 or h.n_stop <= 0 or T <= 0:
        raise NormalizationError("zero singles rate: cannot normalize the histogram")
    expected = h.n_start * h.n_stop * (h.bin_width * 1e-12) / T
    g2 = h.counts / expected
    sigma = np.sqrt(h.counts) / expected
    return _finish_curve(h.centers.astype(float), g2, sigma, h.bin_width,
                         find_peak(h, peak_coarse_ps),
                         meta={"expected_per_bin": expected, "mode": h.mode})


def _finish_curve(tau, g2, sigma, bin_width, peak, meta=None):
    curve = CorrelationCurve(tau, g2, sigma, float(bin_width), meta=meta or {})
    g_peak, s_peak = curve.value_at(peak.tau)
    curve.peak_value, curve.peak_sigma, curve.peak_tau = g_peak, s_peak, float(peak.tau)
    if peak.significant:
        curve.peak_tau = float(tau[curve.index_of(peak.tau)])
        try:
            finite = np.where(np.isfinite(g2), g2, 0.0)
            curve.fwhm = half_max_width(tau, finite, wing_baseline(finite))
        except NoPeakError:
            curve.fwhm = math.nan
    return curve


def cross_correlation(start, stop, resolution, range_ps, rebin_ps=None, mode=START_STOP,
                      workers=None):
    """Histogram at ``resolution`` then (optionally) rebin and normalize."""
    h = start_stop_histogram(start, stop, resolution, range_ps, mode=mode, workers=workers)
    if rebin_ps:
        h = rebin(h, rebin_ps)
    return normalize_cross_correlation(h), h


def auto_correlation(a, b, resolution, range_ps, rebin_ps=None, mode=START_STOP, workers=None):
    """Two-sided HBT correlation of the two outputs of one split mode.

    ``range_ps`` should straddle zero; use ``centered_range`` for a bin centered
    on zero delay. The peak is evaluated at zero delay by symmetry.
    """
    lo, hi = range_ps
    if not lo < 0 < hi:
        raise InputError("auto-correlation range must contain delays of both signs")
    h = start_stop_histogram(a, b, resolution, range_ps, mode=mode, workers=workers)
    if rebin_ps:
        h = rebin(h, rebin_ps)
    curve = normalize_cross_correlation(h)
    g0, s0 = curve.value_at(0.0)
    curve.peak_value, curve.peak_sigma, curve.peak_tau = g0, s0, float(curve.tau[curve.index_of(0.0)])
    try:
        curve.fwhm = half_max_width(curve.tau, curve.g2, wing_baseline(curve.g2))
    except NoPeakError:
        curve.fwhm = math.nan
    return curve


@dataclass
class GaussianFit:
    baseline: float
    amplitude: float
    center: float
    sigma: float
    errors: tuple
    residual_rms: float
    g2_zero: float
    iterations: int

    def __call__(self, tau):
        return gaussian(np.asarray(tau, dtype=float), self.baseline, self.amplitude,
                        self.center, self.sigma)


def gaussian(tau, baseline, amplitude, center, sigma):
    return baseline + amplitude * np.exp(-0.5 * ((tau - center) / sigma) ** 2)


def gaussian_fit(curve, max_iterations=200, xtol=1e-8):
    """Least-squares fit of baseline + A exp(-(tau - c)^2 / 2 sigma^2).

    Initialized from the wing median, the peak excess, the argmax and the
    half-maximum width. Weighted by ``sigma_g2`` when every bin has a positive
    uncertainty.
    """
    x = np.asarray(curve.tau, dtype=float)
    y = np.asarray(curve.g2, dtype=float)
    ok = np.isfinite(y)
    x, y = x[ok], y[ok]
    s = np.asarray(curve.sigma_g2, dtype=float)[ok]
    if x.size < 10:
        raise FitError("need at least 10 bins spanning the peak", {"n_bins": int(x.size)})
    weighted = bool(np.all(s > 0))
    w = 1.0 / s if weighted else np.ones_like(y)

    base0 = wing_baseline(y, 0.2)
    i = int(np.argmax(y))
    amp0 = y[i] - base0
    try:
        width0 = half_max_width(x, y, base0) / (2 * math.sqrt(2 * math.log(2)))
    except NoPeakError:
        width0 = (x[-1] - x[0]) / 10
    span = x[-1] - x[0]
    width0 = float(np.clip(width0, abs(x[1] - x[0]) / 2, span))
    # no resolvable peak: the Gaussian is degenerate, report a constant
    scatter = np.median(s) if weighted else float(np.std(y))
    if amp0 <= 3 * scatter:
        mean = float(np.average(y, weights=w ** 2))
        err = float(1 / math.sqrt(np.sum(w ** 2))) if weighted else float(np.std(y) / math.sqrt(y.size))
        rms = float(np.sqrt(np.mean((y - mean) ** 2)))
        return GaussianFit(mean, 0.0, float(x[i]), width0, (err, math.nan, math.nan, math.nan),
                           rms, mean, 0)
    p0 = np.array([base0, amp0, x[i], width0])

    def resid(p):
        return w * (gaussian(x, *p) - y)

    def jac(p):
        b, a, c, sg = p
        e = np.exp(-0.5 * ((x - c) / sg) ** 2)
        return w[:, None] * np.column_stack([
            np.ones_like(x), e, a * e * (x - c) / sg ** 2, a * e * (x - c) ** 2 / sg ** 3])

    res = least_squares(resid, p0, jac=jac, method="lm", xtol=xtol, ftol=1e-12,
                        gtol=1e-12, x_scale="jac", max_nfev=max_iterations)
    diagnostics = {"status": int(res.status), "message": res.message, "nfev": int(res.nfev),
                   "cost": float(res.cost), "params": res.x.tolist(), "p0": p0.tolist()}
    if res.status <= 0 or not np.all(np.isfinite(res.x)):
        raise FitError(f"Gaussian fit did not converge: {res.message}", diagnostics)
    b, a, c, sg = res.x
    sg = abs(sg)
    J = res.jac
    dof = max(1, x.size - 4)
    cov = np.linalg.pinv(J.T @ J)
    if not weighted:
        cov *= 2 * res.cost / dof
    errors = tuple(float(e) for e in np.sqrt(np.clip(np.diag(cov), 0, None)))
    rms = float(np.sqrt(np.mean((gaussian(x, b, a, c, sg) - y) ** 2)))
    g0 = float(b + a * math.exp(-0.5 * (c / sg) ** 2)) if sg > 0 else float(b)
    return GaussianFit(float(b), float(a), float(c), float(sg), errors, rms, g0, int(res.nfev))


@dataclass
class CoincidenceResult:
    """Rates in cps; ``offset`` in ps is the window center (peak delay)."""

    raw: float
    accidental: float
    net: float
    sigma_net: float
    offset: float
    window: float


def coincidence_count(a, b, window, T=None, offset=None, hist_range_ps=None, hist_bin_ps=100,
                      workers=None):
    """Net coincidence rate inside a window centered on the correlation peak.

    Raw coincidences use greedy nearest matching (each event at most once);
    the accidental rate comes from the flat wings of the a->b histogram
    scaled to the window width. The default histogram spans +-200 ns so the
    wings clear the dead-time dips next to the peak.
    """
    if not window > 0:
        raise InputError("coincidence window must be positive")
    ta = _as_times(a, "a")
    tb = _as_times(b, "b")
    T = T if T is not None else _duration(a, b)
    w_ps = window * 1e12
    if hist_range_ps is None:
        half_range = max(200_000, int(10 * w_ps))
        hist_range_ps = (-half_range, half_range)
    h = start_stop_histogram(ta, tb, hist_bin_ps, hist_range_ps, mode=MULTI_STOP,
                             workers=workers, duration=T)
    if offset is None:
        coarse = max(hist_bin_ps, int(round(w_ps / 4 / hist_bin_ps)) * hist_bin_ps)
        offset = find_peak(h, coarse).tau
    half = int(round(w_ps / 2))
    raw_counts = int(_kernels.greedy_match(ta, tb, np.int64(round(offset)), np.int64(half)))

    n_side = max(1, int(round(h.nbins * 0.1)))
    wings = np.concatenate([h.counts[:n_side], h.counts[-n_side:]]).astype(float)
    scale = w_ps / h.bin_width
    acc_counts = wings.mean() * scale
    acc_var = scale ** 2 * wings.mean() / wings.size
    net_counts = max(raw_counts - acc_counts, 0.0)
    sigma = math.sqrt(raw_counts + acc_var)
    return CoincidenceResult(raw_counts / T, acc_counts / T, net_counts / T, sigma / T,
                             float(offset), float(window))


def heralded_g2(threefold, r0, n_si1_0, g_si2):
    """g_C(tau) = G3(tau) R(0) / (N_SI1(0) G_SI2(tau)), bin by bin.

    ``r0`` (herald singles) and ``n_si1_0`` (herald coincidences) must share
    units; counts or rates both work. Bins with an empty denominator are NaN.
    g_C(0) is reported at the peak of ``g_si2``.
    """
    if (threefold.bin_width, threefold.origin, threefold.nbins) != (g_si2.bin_width, g_si2.origin, g_si2.nbins):
        raise InputError("three-fold and two-fold histograms must share binning")
    if n_si1_0 <= 0 or r0 <= 0:
        raise NormalizationError("herald rates must be positive")
    g3 = threefold.counts.astype(float)
    g2f = g_si2.counts.astype(float)
    scale = r0 / n_si1_0
    with np.errstate(divide="ignore", invalid="ignore"):
        gc = np.where(g2f > 0, g3 * scale / g2f, np.nan)
        rel = np.sqrt(1.0 / np.maximum(g3, 1.0) + 1.0 / g2f)
        sigma = np.where(g2f > 0, np.where(g3 > 0, gc * rel, scale / g2f), np.nan)
    i_peak = int(np.argmax(g_si2.counts))
    peak = PeakInfo(float(g_si2.centers[i_peak]), int(g_si2.counts[i_peak]), True)
    curve = CorrelationCurve(g_si2.centers.astype(float), gc, sigma, float(g_si2.bin_width),
                             meta={"r0": r0, "n_si1_0": n_si1_0})
    curve.peak_tau = peak.tau
    curve.peak_value, curve.peak_sigma = curve.value_at(peak.tau)
    return curve


def conditional_peak(curve):
    """(peak value, sigma) of a normalized conditional auto-correlation."""
    g = np.where(np.isfinite(curve.g2), curve.g2, -np.inf)
    i = int(np.argmax(g))
    return float(curve.g2[i]), float(curve.sigma_g2[i])


@dataclass
class HeraldedReport:
    """Conditional-HBT results. Curves are at ``bin_ps``; the ``*_window``
    values integrate the probe over one herald window centered on the pair peak."""

    g_c: CorrelationCurve
    g_sii: CorrelationCurve
    threefold: Histogram
    twofold: Histogram
    r0: int
    n_si1_0: int
    herald_offset: float
    probe_center: float
    g_c0: float
    sigma_g_c0: float
    g_sii_peak: float
    sigma_g_sii_peak: float


def heralded_analysis(d1, d2, d3, herald_window, bin_ps=300, n_side=4, workers=None):
    """Full conditional-HBT reduction from three detector streams.

    d1 heralds, d2 defines the herald coincidence, d3 is the probe. The
    herald singles R(0) and herald coincidence count N_SI1(0) are measured
    from the same streams. ``herald_window`` (s) must be a whole multiple of
    ``bin_ps``.
    """
    w_ps = int(round(herald_window * 1e12))
    bin_ps = int(bin_ps)
    if w_ps % bin_ps:
        raise InputError(f"herald window {w_ps} ps is not a multiple of the {bin_ps} ps bin")
    T = _duration(d1, d2, d3)
    probe_range = (-max(200_000, 10 * w_ps), max(200_000, 10 * w_ps))
    h12 = start_stop_histogram(d1, d2, 100, probe_range, mode=MULTI_STOP, workers=workers)
    herald_offset = find_peak(h12, max(100, w_ps // 4 // 100 * 100)).tau
    h13 = start_stop_histogram(d1, d3, 100, probe_range, mode=MULTI_STOP, workers=workers)
    center = find_peak(h13, max(100, w_ps // 4 // 100 * 100)).tau
    center = bin_ps * round(center / bin_ps)

    rng = centered_range(center, w_ps, n_side)
    g3 = threefold_histogram(d1, d2, d3, herald_window, bin_ps, rng,
                             herald_offset=herald_offset, workers=workers)
    g13 = start_stop_histogram(d1, d3, bin_ps, rng, mode=MULTI_STOP, workers=workers)
    r0 = len(d1)
    n12 = g3.n_start
    if n12 == 0:
        raise NormalizationError("no herald coincidences between the first two channels")

    g_c = heralded_g2(g3, r0, n12, g13)
    g_sii = normalize_cross_correlation(g3)

    g3w, g13w = rebin(g3, w_ps), rebin(g13, w_ps)
    g_cw = heralded_g2(g3w, r0, n12, g13w)
    g_c0, s_c0 = g_cw.g2[n_side], g_cw.sigma_g2[n_side]
    g_siiw = normalize_cross_correlation(g3w)
    pk, spk = conditional_peak(g_siiw)
    return HeraldedReport(g_c, g_sii, g3, g13, r0, n12, float(herald_offset), float(center),
                          float(g_c0), float(s_c0), pk, spk)
