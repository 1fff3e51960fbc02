"""Peak location and half-maximum width on sampled curves."""

import numpy as np

from .errors import NoPeakError


def wing_baseline(y, fraction=0.10):
    """Median of the outermost ``fraction`` of samples (half taken from each end)."""
    y = np.asarray(y, dtype=float)
    n_side = max(1, int(round(len(y) * fraction / 2)))
    wings = np.concatenate([y[:n_side], y[-n_side:]])
    wings = wings[np.isfinite(wings)]
    if wings.size == 0:
        return 0.0
    return float(np.median(wings))


def half_max_width(x, y, baseline=None):
    """Full width at half of (peak - baseline), with linear interpolation.

    The crossing is searched outward from the global maximum; when the curve
    never drops below the half level on one side the outermost sample is used.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise NoPeakError("need at least three samples to measure a width")
    if baseline is None:
        baseline = wing_baseline(y)
    finite = np.where(np.isfinite(y), y, -np.inf)
    i_peak = int(np.argmax(finite))
    peak = y[i_peak]
    if not np.isfinite(peak) or peak <= baseline:
        raise NoPeakError(f"peak {peak!r} does not exceed baseline {baseline!r}")
    half = baseline + 0.5 * (peak - baseline)

    i = i_peak
    while i > 0 and y[i - 1] >= half:
        i -= 1
    if i == 0:
        left = x[0]
    else:
        x0, x1, y0, y1 = x[i - 1], x[i], y[i - 1], y[i]
        left = x0 + (half - y0) * (x1 - x0) / (y1 - y0)

    j = i_peak
    n = len(y)
    while j < n - 1 and y[j + 1] >= half:
        j += 1
    if j == n - 1:
        right = x[-1]
    else:
        x0, x1, y0, y1 = x[j], x[j + 1], y[j], y[j + 1]
        right = x0 + (half - y0) * (x1 - x0) / (y1 - y0)
    return float(right - left)
