"""Histogramming and correlation analysis of timestamp streams."""

from .correlate import (CoincidenceResult, CorrelationCurve, GaussianFit, HeraldedReport,
                        PeakInfo, auto_correlation, coincidence_count, conditional_peak,
                        cross_correlation, find_peak, gaussian, gaussian_fit, heralded_analysis,
                        heralded_g2, normalize_cross_correlation)
from .histogram import (MULTI_STOP, START_STOP, Histogram, centered_range, count_heralds, rebin,
                        start_stop_histogram, threefold_histogram, worker_count)
from .rates import (RateReport, cauchy_schwarz_R, dead_time_correct, heralding_efficiency,
                    pair_rate_estimate, rate_report)

__all__ = [
    "CoincidenceResult", "CorrelationCurve", "GaussianFit", "HeraldedReport", "Histogram",
    "MULTI_STOP", "PeakInfo", "RateReport", "START_STOP", "auto_correlation", "cauchy_schwarz_R",
    "centered_range", "coincidence_count", "conditional_peak", "count_heralds",
    "cross_correlation", "dead_time_correct", "find_peak", "gaussian", "gaussian_fit",
    "heralded_analysis", "heralded_g2", "heralding_efficiency", "normalize_cross_correlation",
    "pair_rate_estimate", "rate_report", "rebin", "start_stop_histogram", "threefold_histogram",
    "worker_count",
]
