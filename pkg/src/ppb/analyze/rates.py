"""Counting-rate estimators: dead-time correction, pair rate, heralding, R."""

import math
import warnings
from dataclasses import dataclass

from ..errors import EstimateError, InputError, ParameterError, SaturationError
from .correlate import coincidence_count


def dead_time_correct(measured_rate, dead_time):
    """Invert the non-paralyzable loss map: m / (1 - m tau)."""
    if measured_rate < 0 or dead_time < 0:
        raise ParameterError("rate and dead time must be non-negative")
    x = measured_rate * dead_time
    if x >= 1:
        raise SaturationError(f"measured rate {measured_rate} cps saturates a {dead_time} s dead time")
    return measured_rate / (1.0 - x)


def pair_rate_estimate(n_s, n_i, n_c):
    """Generated pair rate N_s N_i / N_c; independent of the arm efficiencies."""
    if not n_c > 0:
        raise EstimateError("pair rate undefined without coincidences")
    return n_s * n_i / n_c


def heralding_efficiency(n_c, n_single):
    """N_c / N_single, clipped to 1 with a warning when inputs are inconsistent."""
    if not n_single > 0:
        raise InputError("singles rate must be positive")
    eta = n_c / n_single
    if eta > 1:
        warnings.warn(f"coincidence rate exceeds singles rate ({eta:.3g}); clipped to 1",
                      RuntimeWarning, stacklevel=2)
        return 1.0
    return eta


def cauchy_schwarz_R(g_si_0, g_ss_0, g_ii_0, sigma_si=0.0, sigma_ss=0.0, sigma_ii=0.0):
    """R = g_si^2 / (g_ss g_ii) and its first-order uncertainty."""
    if min(g_si_0, g_ss_0, g_ii_0) <= 0:
        raise ParameterError("correlation values must be positive")
    R = g_si_0 ** 2 / (g_ss_0 * g_ii_0)
    rel = math.sqrt((2 * sigma_si / g_si_0) ** 2 + (sigma_ss / g_ss_0) ** 2 + (sigma_ii / g_ii_0) ** 2)
    return R, R * rel


@dataclass
class RateReport:
    """Rates in cps; ``window`` in s; ``n_c`` is the accidental-subtracted rate."""

    n_s: float
    n_i: float
    n_c: float
    window: float
    n_pair_estimate: float
    heralding_s: float
    heralding_i: float
    sigma_n_c: float = 0.0
    raw_coincidence: float = 0.0
    accidental: float = 0.0
    measured_s: float = 0.0
    measured_i: float = 0.0


def rate_report(signal, idler, window=4.1e-9, dead_time=50e-9, offset=None, workers=None):
    """Singles (dead-time corrected), net coincidences and derived figures of merit.

    Heralding efficiencies use the corrected singles rates of each arm.
    """
    T = signal.duration
    m_s, m_i = len(signal) / T, len(idler) / T
    n_s, n_i = dead_time_correct(m_s, dead_time), dead_time_correct(m_i, dead_time)
    cc = coincidence_count(signal, idler, window, T, offset=offset, workers=workers)
    n_c = min(cc.net, n_s, n_i)
    try:
        n_pair = pair_rate_estimate(n_s, n_i, n_c)
    except EstimateError:
        n_pair = math.nan
    h_s = heralding_efficiency(n_c, n_s) if n_s > 0 else math.nan
    h_i = heralding_efficiency(n_c, n_i) if n_i > 0 else math.nan
    return RateReport(n_s, n_i, n_c, window, n_pair, h_s, h_i, cc.sigma_net, cc.raw,
                      cc.accidental, m_s, m_i)
