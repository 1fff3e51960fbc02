import math
import warnings

import numpy as np
import pytest

from ppb import simulate as S, theory
from ppb.analyze import (MULTI_STOP, CorrelationCurve, Histogram, auto_correlation, cauchy_schwarz_R,
                         centered_range, coincidence_count, conditional_peak, cross_correlation,
                         dead_time_correct, find_peak, gaussian, gaussian_fit, heralded_analysis,
                         heralded_g2, heralding_efficiency, normalize_cross_correlation,
                         pair_rate_estimate, rate_report, start_stop_histogram, threefold_histogram)
from ppb.errors import (EstimateError, FitError, InputError, NormalizationError, ParameterError,
                        SaturationError)

from conftest import poisson_times

IDEAL = S.DetectorConfig(efficiency=1.0, jitter_sigma=0.0, dead_time=0.0)
SHARP = theory.exponential_waveform(50e-12)


def es(ts, duration, channel=0):
    return S.EventStream(np.asarray(ts, dtype=np.int64), duration, channel)


def cfg(**kw):
    base = dict(pair_rate=0.0, waveform=SHARP, duration=2.0, seed=1)
    base.update(kw)
    return S.SourceConfig(**base)


def cross_streams(config, det_s=IDEAL, det_i=IDEAL):
    return S.simulate_detection(config, S.Route.direct(1), S.Route.direct(2), {1: det_s, 2: det_i})


# normalization


def test_normalization_definition():
    n_s, n_i, T, bw = 1_000_000, 2_000_000, 2.0, 1000
    per_bin = n_s * n_i * bw * 1e-12 / T
    h = Histogram(bw, -10_000, np.full(20, per_bin), T, n_s, n_i)
    c = normalize_cross_correlation(h)
    assert np.allclose(c.g2, 1.0)
    assert np.allclose(c.sigma_g2, np.sqrt(per_bin) / per_bin)


def test_zero_singles_rejected():
    h = Histogram(4, 0, np.zeros(10), 1.0, 0, 10)
    with pytest.raises(NormalizationError):
        normalize_cross_correlation(h)


def test_coincidence_budget_oracle():
    """Ideal pairs: excess area above the floor equals detected pairs within 3 sigma."""
    eta = 0.2
    det = S.DetectorConfig(efficiency=eta, jitter_sigma=0.0, dead_time=0.0)
    c = cfg(pair_rate=5e5, background_rate_signal=2e5, background_rate_idler=2e5, seed=3)
    out = cross_streams(c, det, det)
    h = start_stop_histogram(out[1], out[2], 100, (-100_000, 100_000), mode=MULTI_STOP)
    floor = len(out[1]) * len(out[2]) * 100e-12 / c.duration
    excess = h.total - floor * h.nbins
    expected = c.pair_rate * eta * eta * c.duration
    assert abs(excess - expected) < 3 * math.sqrt(h.total + expected)


def test_operating_point_cross_correlation_peak(default_waveform):
    det = S.DetectorConfig(efficiency=0.045, jitter_sigma=350e-12, dead_time=50e-9)
    c = cfg(pair_rate=3.3e7, waveform=default_waveform, thermal_coherence_time=1.8e-9,
            background_rate_signal=1e6, background_rate_idler=8e5, duration=2.0, seed=5)
    out = cross_streams(c, det, det)
    curve, _ = cross_correlation(out[1], out[2], 4, (-100_000, 100_000), rebin_ps=300, mode=MULTI_STOP)
    assert 10 < curve.peak_value < 100
    wing, sigma = curve.wing_stats()
    assert abs(wing - 1) < 3 * sigma + 0.005
    assert 0 < curve.peak_tau < 1000


# auto-correlation


def test_poisson_split_is_flat():
    c = cfg(background_rate_signal=1e6, duration=2.0, seed=9)
    out = S.simulate_detection(c, S.Route.split(2, 3), S.Route([]), {2: IDEAL, 3: IDEAL})
    curve = auto_correlation(out[2], out[3], 1000, centered_range(0, 1000, 20), mode=MULTI_STOP)
    z = (curve.g2 - 1) / curve.sigma_g2
    assert np.max(np.abs(z)) < 4
    assert abs(curve.peak_value - 1) < 3 * curve.peak_sigma


@pytest.mark.parametrize("seed", [1, 2])
def test_auto_correlation_symmetry(seed):
    c = cfg(pair_rate=2e6, thermal_coherence_time=3e-9, background_rate_signal=1e5, seed=seed)
    det = S.DetectorConfig(efficiency=0.5, jitter_sigma=200e-12, dead_time=0.0)
    out = S.simulate_detection(c, S.Route.split(2, 3), S.Route([]), {2: det, 3: det})
    curve = auto_correlation(out[2], out[3], 500, centered_range(0, 500, 30), mode=MULTI_STOP)
    diff = curve.g2 - curve.g2[::-1]
    sig = np.hypot(curve.sigma_g2, curve.sigma_g2[::-1])
    assert np.max(np.abs(diff) / sig) < 4.5


def test_auto_correlation_needs_two_sided_range():
    with pytest.raises(InputError):
        auto_correlation(es([1], 1.0), es([2], 1.0), 4, (0, 100))


# peak finding


def test_find_peak_falls_back_to_zero_on_noise():
    rng = np.random.default_rng(0)
    h = Histogram(100, -5000, rng.poisson(100, 100), 1.0, 100, 100)
    info = find_peak(h)
    assert not info.significant and info.tau == 0.0
    counts = rng.poisson(100, 100)
    counts[70] += 2000
    info = find_peak(Histogram(100, -5000, counts, 1.0, 100, 100))
    assert info.significant and info.tau == pytest.approx(2050)


# Gaussian fit


def _curve(tau, g, sigma=None):
    sigma = np.zeros_like(g) if sigma is None else sigma
    return CorrelationCurve(tau, g, sigma, float(tau[1] - tau[0]))


def test_gaussian_fit_exact_round_trip():
    tau = np.arange(-6000, 6000, 100.0) + 50
    fit = gaussian_fit(_curve(tau, gaussian(tau, 1.0, 0.74, 0.0, 800.0)))
    assert fit.baseline == pytest.approx(1.0, abs=1e-6)
    assert fit.amplitude == pytest.approx(0.74, abs=1e-6)
    assert fit.center == pytest.approx(0.0, abs=1e-6)
    assert fit.sigma == pytest.approx(800.0, rel=1e-6)
    assert fit.g2_zero == pytest.approx(1.74, abs=1e-6)
    assert fit.residual_rms < 1e-9


@pytest.mark.parametrize("seed", range(4))
def test_gaussian_fit_noisy_within_three_sigma(seed):
    rng = np.random.default_rng(seed)
    tau = np.arange(-6000, 6000, 100.0) + 50
    scale = 1e4 / 1.74
    counts = rng.poisson(scale * gaussian(tau, 1.0, 0.74, 100.0, 800.0))
    fit = gaussian_fit(_curve(tau, counts / scale, np.sqrt(counts) / scale))
    for value, truth, err in zip((fit.baseline, fit.amplitude, fit.center, fit.sigma),
                                 (1.0, 0.74, 100.0, 800.0), fit.errors):
        assert abs(value - truth) < 3 * err


def test_gaussian_fit_flat_curve():
    rng = np.random.default_rng(1)
    tau = np.arange(-5000, 5000, 100.0)
    g = 1 + 0.01 * rng.standard_normal(tau.size)
    fit = gaussian_fit(_curve(tau, g, np.full(tau.size, 0.01)))
    assert fit.amplitude == 0.0
    assert fit.baseline == pytest.approx(g.mean(), abs=0.02)


def test_gaussian_fit_errors():
    tau = np.arange(5.0)
    with pytest.raises(FitError):
        gaussian_fit(_curve(tau, np.ones(5)))
    tau = np.arange(-6000, 6000, 100.0)
    with pytest.raises(FitError) as info:
        gaussian_fit(_curve(tau, gaussian(tau, 1.0, 0.74, 2000.0, 300.0) + 0.3 * np.sin(tau)),
                     max_iterations=1)
    assert "nfev" in info.value.diagnostics


# coincidences


def test_coincidence_self_match():
    rng = np.random.default_rng(2)
    ts = poisson_times(rng, 1e5, 1.0)
    cc = coincidence_count(es(ts, 1.0), es(ts, 1.0), 4.1e-9, 1.0, offset=0)
    assert cc.raw * 1.0 == len(ts)


def test_independent_poisson_net_is_zero():
    rng = np.random.default_rng(4)
    T = 30.0
    a, b = poisson_times(rng, 1e5, T), poisson_times(rng, 1e5, T)
    cc = coincidence_count(es(a, T), es(b, T), 4.1e-9, T)
    assert cc.accidental == pytest.approx(1e5 * 1e5 * 4.1e-9, rel=0.05)
    assert abs(cc.raw - cc.accidental) < 3 * cc.sigma_net
    assert cc.net <= 3 * cc.sigma_net


def test_coincidence_window_must_be_positive():
    with pytest.raises(InputError):
        coincidence_count(es([1], 1.0), es([1], 1.0), 0.0, 1.0)


def test_greedy_match_uses_each_event_once():
    a = es([1000, 1100], 1.0)
    b = es([1050], 1.0)
    assert coincidence_count(a, b, 4e-9, 1.0, offset=0).raw == 1


# rates


def test_dead_time_correct_values():
    assert dead_time_correct(12345.0, 0.0) == 12345.0
    assert dead_time_correct(500_000, 50e-9) == pytest.approx(512_820.51, abs=0.01)
    with pytest.raises(SaturationError):
        dead_time_correct(2e7, 50e-9)


@pytest.mark.parametrize("rate", [1e5, 1e6, 5e6])
def test_dead_time_round_trip(rate):
    T = 2.0
    s = S.simulate_source(cfg(background_rate_signal=rate, duration=T, seed=int(rate)))[0]
    out = S.apply_detector(s, S.DetectorConfig(dead_time=50e-9), seed=1)
    corrected = dead_time_correct(len(out) / T, 50e-9)
    assert abs(corrected - rate) < 3 * math.sqrt(rate / T)


def test_pair_rate_identities():
    assert pair_rate_estimate(3.0, 7.0, 21.0) == 1.0
    assert pair_rate_estimate(1_420_000, 1_300_000, 61_700) == pytest.approx(2.99190e7, rel=1e-5)
    with pytest.raises(EstimateError):
        pair_rate_estimate(1.0, 1.0, 0.0)


@pytest.mark.parametrize("eta", [0.1, 0.3, 0.5])
def test_pair_rate_estimator_recovers_generation_rate(eta):
    det = S.DetectorConfig(efficiency=eta, jitter_sigma=0.0, dead_time=0.0)
    c = cfg(pair_rate=2e5, waveform=theory.doppler_averaged_g2(theory.default_tau_grid()),
            duration=5.0, seed=int(eta * 10))
    out = cross_streams(c, det, det)
    rep = rate_report(out[1], out[2], 4.1e-9, dead_time=0.0)
    assert rep.n_pair_estimate == pytest.approx(c.pair_rate, rel=0.05)


def test_heralding_efficiency():
    assert heralding_efficiency(5.0, 5.0) == 1.0
    assert heralding_efficiency(61_700, 1_420_000) == pytest.approx(0.04345, abs=5e-5)
    with pytest.warns(RuntimeWarning):
        assert heralding_efficiency(2.0, 1.0) == 1.0
    with pytest.raises(InputError):
        heralding_efficiency(1.0, 0.0)


def test_simulated_heralding_matches_efficiency():
    det = S.DetectorConfig(efficiency=0.25, jitter_sigma=0.0, dead_time=0.0)
    c = cfg(pair_rate=4e5, duration=2.0, seed=12)
    out = cross_streams(c, det, det)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rep = rate_report(out[1], out[2], 4.1e-9, dead_time=0.0)
    assert rep.heralding_s == pytest.approx(0.25, abs=0.01)
    assert rep.heralding_i == pytest.approx(0.25, abs=0.01)
    assert rep.n_c <= min(rep.n_s, rep.n_i)


def test_cauchy_schwarz_values():
    R, _ = cauchy_schwarz_R(84.70, 1.74, 1.74)
    assert R == pytest.approx(2369.56, abs=0.01)
    assert cauchy_schwarz_R(1.0, 1.0, 1.0)[0] == 1.0
    with pytest.raises(ParameterError):
        cauchy_schwarz_R(1.0, 0.0, 1.0)


def test_cauchy_schwarz_sigma_matches_finite_differences():
    x = np.array([84.70, 1.74, 1.74])
    s = np.array([0.01, 0.09, 0.06])
    f = lambda v: v[0] ** 2 / (v[1] * v[2])
    grad = np.array([(f(x + h) - f(x - h)) / (2e-6) for h in np.eye(3) * 1e-6])
    _, sigma = cauchy_schwarz_R(*x, *s)
    assert sigma == pytest.approx(math.sqrt(np.sum((grad * s) ** 2)), rel=1e-6)
    assert sigma == pytest.approx(147.3, abs=0.1)


def _r_from_streams(c, det, n_side=20, seed_shift=0):
    cross = cross_streams(c, det, det)
    gsi, _ = cross_correlation(cross[1], cross[2], 100, (-50_000, 50_000), rebin_ps=1000, mode=MULTI_STOP)
    vals = [(gsi.peak_value, gsi.peak_sigma)]
    for route in ("s", "i"):
        sr, ir = (S.Route.split(2, 3), S.Route([])) if route == "s" else (S.Route([]), S.Route.split(2, 3))
        cc = S.SourceConfig(**{**c.__dict__, "seed": c.seed + 1 + (route == "i")})
        out = S.simulate_detection(cc, sr, ir, {2: det, 3: det})
        a = auto_correlation(out[2], out[3], 100, centered_range(0, 1000, n_side), rebin_ps=1000, mode=MULTI_STOP)
        vals.append((a.peak_value, a.peak_sigma))
    (g1, s1), (g2, s2), (g3, s3) = vals
    return cauchy_schwarz_R(g1, g2, g3, s1, s2, s3)


@pytest.mark.parametrize("seed", [10, 20, 30])
def test_classical_bound_for_independent_poisson(seed):
    c = cfg(background_rate_signal=2e5, background_rate_idler=2e5, duration=2.0, seed=seed)
    R, sR = _r_from_streams(c, IDEAL)
    assert R <= 1 + 3 * sR


def test_nonclassicality_detected():
    det = S.DetectorConfig(efficiency=0.2, jitter_sigma=200e-12, dead_time=0.0)
    c = cfg(pair_rate=1e6, waveform=theory.doppler_averaged_g2(theory.default_tau_grid()),
            thermal_coherence_time=2e-9, background_rate_signal=1e5, background_rate_idler=1e5,
            duration=2.0, seed=40)
    R, sR = _r_from_streams(c, det)
    assert R > 1 + 3 * sR


# heralded


def _three(c, det=IDEAL):
    return S.simulate_detection(c, S.Route.direct(1), S.Route.split(2, 3), {1: det, 2: det, 3: det})


def test_heralded_g2_flat_for_uncorrelated_probe():
    rng = np.random.default_rng(8)
    c = cfg(pair_rate=5e5, duration=2.0, seed=14)
    out = _three(c)
    probe = es(poisson_times(rng, 3e5, 2.0), 2.0, 3)
    rng_ = centered_range(0, 1000, 10)
    g3 = threefold_histogram(out[1], out[2], probe, 3e-9, 1000, rng_)
    g13 = start_stop_histogram(out[1], probe, 1000, rng_, mode=MULTI_STOP)
    curve = heralded_g2(g3, len(out[1]), g3.n_start, g13)
    z = (curve.g2 - 1) / curve.sigma_g2
    assert np.max(np.abs(z)) < 4
    # probe independent of the herald: conditional auto-correlation is 1
    peak, sigma = conditional_peak(normalize_cross_correlation(g3))
    assert abs(peak - 1) < 4 * sigma


def test_heralded_g2_masks_empty_bins():
    g3 = Histogram(100, 0, np.array([1, 0, 2]), 1.0, 5, 10)
    g13 = Histogram(100, 0, np.array([4, 0, 2]), 1.0, 5, 10)
    curve = heralded_g2(g3, 10, 5, g13)
    assert math.isnan(curve.g2[1]) and curve.g2[0] == pytest.approx(0.5)
    with pytest.raises(InputError):
        heralded_g2(g3, 10, 5, Histogram(200, 0, np.array([1, 1, 1]), 1.0, 5, 10))
    with pytest.raises(NormalizationError):
        heralded_g2(g3, 10, 0, g13)


def test_heralded_single_photons_antibunch():
    c = cfg(pair_rate=3e5, thermal_coherence_time=2e-9, duration=3.0, seed=15)
    rep = heralded_analysis(*(_three(c, S.DetectorConfig(efficiency=0.5, dead_time=0.0))[k] for k in (1, 2, 3)),
                            3.3e-9)
    assert rep.g_c0 < 0.1
    assert rep.r0 > rep.n_si1_0 > 0
    assert rep.g_sii.tau.size == 9 * 11


def test_heralded_window_must_fit_bins():
    with pytest.raises(InputError):
        heralded_analysis(es([1], 1.0), es([1], 1.0), es([1], 1.0), 3.25e-9, 300)
