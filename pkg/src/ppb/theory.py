"""Doppler-averaged biphoton waveform for a warm ladder-type ensemble.

The two-photon amplitude of a single velocity class is modelled as a causal
exponential decay at half the intermediate-state decay rate carrying a
Doppler phase ``exp(-i k_i v tau)``. Averaging it over a one-dimensional
Maxwell-Boltzmann distribution gives the cross-correlation envelope
``|sum_v Psi_v(tau) f(v) dv|**2``, whose width is set by the single-photon
Doppler width rather than by the natural lifetime.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ParameterError
from .peaks import half_max_width, wing_baseline

K_B = 1.380649e-23  # J/K
AMU = 1.66053906660e-27  # kg
RB87_MASS = 86.909180527 * AMU
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class AtomicParams:
    """Ladder-system constants; defaults are the 87Rb 5S-5P-5D operating point.

    Rates are angular (rad/s), detunings in Hz, wavelengths in m.
    """

    gamma_e: float = 2 * math.pi * 6.065e6
    gamma_d: float = 2 * math.pi * 0.6673e6
    delta_p: float = 810e6
    delta_c: float = -810e6
    lambda_p: float = 780.2e-9
    lambda_c: float = 775.8e-9
    lambda_s: float = 775.8e-9
    lambda_i: float = 780.2e-9
    temperature: float = 325.15
    atomic_mass: float = RB87_MASS

    def __post_init__(self):
        for name in ("gamma_e", "gamma_d", "lambda_p", "lambda_c", "lambda_s", "lambda_i"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be positive, got {value!r}")
        if not (np.isfinite(self.temperature) and self.temperature > 0):
            raise ParameterError(f"temperature must be positive, got {self.temperature!r}")
        if not (np.isfinite(self.atomic_mass) and self.atomic_mass > 0):
            raise ParameterError(f"atomic_mass must be positive, got {self.atomic_mass!r}")

    @property
    def sigma_v(self):
        """1-D thermal velocity spread sqrt(k_B T / m) in m/s."""
        return math.sqrt(K_B * self.temperature / self.atomic_mass)

    @property
    def k_i(self):
        return 2.0 * math.pi / self.lambda_i

    def doppler_width(self):
        """FWHM Doppler width of the idler transition in Hz."""
        return self.k_i * self.sigma_v * FWHM_PER_SIGMA / (2.0 * math.pi)


@dataclass
class TwoPhotonWaveform:
    """Complex two-photon amplitude on a uniform delay grid (seconds).

    ``density`` is |amplitude|**2 scaled so its trapezoidal integral is one.
    """

    tau_grid: np.ndarray
    amplitude: np.ndarray
    density: np.ndarray = field(default=None)

    def __post_init__(self):
        self.tau_grid = np.asarray(self.tau_grid, dtype=float)
        self.amplitude = np.asarray(self.amplitude, dtype=complex)
        _check_uniform(self.tau_grid)
        if self.amplitude.shape != self.tau_grid.shape:
            raise InputError("amplitude and tau_grid must have the same shape")
        if self.density is None:
            power = np.abs(self.amplitude) ** 2
            norm = np.trapezoid(power, self.tau_grid)
            if not norm > 0:
                raise InputError("waveform has zero norm")
            self.amplitude = self.amplitude / math.sqrt(norm)
            self.density = power / norm
        else:
            self.density = np.asarray(self.density, dtype=float)

    @classmethod
    def from_density(cls, tau_grid, density):
        """Real, non-negative waveform with the given (unnormalized) density."""
        density = np.clip(np.asarray(density, dtype=float), 0.0, None)
        return cls(tau_grid, np.sqrt(density))

    @property
    def step(self):
        return float(self.tau_grid[1] - self.tau_grid[0])

    def norm(self):
        return float(np.trapezoid(self.density, self.tau_grid))

    def cdf(self):
        """Cumulative trapezoidal integral of the density, starting at 0."""
        increments = 0.5 * (self.density[1:] + self.density[:-1]) * np.diff(self.tau_grid)
        return np.concatenate([[0.0], np.cumsum(increments)])

    def sample(self, rng, size):
        """Draw ``size`` delays (s) by inverting the trapezoidal CDF.

        Draws are clipped to the first grid point with non-zero density, so a
        causal waveform never yields negative delays from the interpolated
        sliver before its edge.
        """
        cdf = self.cdf()
        cdf = cdf / cdf[-1]
        u = rng.random(size)
        support = np.flatnonzero(self.density > 0)
        t0 = self.tau_grid[support[0]] if support.size else self.tau_grid[0]
        return np.maximum(np.interp(u, cdf, self.tau_grid), t0)

    def mean_delay(self):
        return float(np.trapezoid(self.tau_grid * self.density, self.tau_grid))


def _check_uniform(grid, rtol=1e-6):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise InputError("delay grid must be one-dimensional with at least 3 points")
    steps = np.diff(grid)
    if not np.all(steps > 0) or np.ptp(steps) > rtol * abs(steps.mean()):
        raise InputError("delay grid must be uniform and increasing")


def maxwell_boltzmann_pdf(v, params):
    """One-dimensional Maxwell-Boltzmann velocity density in s/m."""
    if not isinstance(params, AtomicParams):
        raise ParameterError("params must be an AtomicParams instance")
    sigma = params.sigma_v
    v = np.asarray(v, dtype=float)
    return np.exp(-0.5 * (v / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))


def two_photon_amplitude(tau, v, params):
    """Single-velocity-class amplitude; zero for negative delays.

    ``tau`` and ``v`` broadcast against each other.
    """
    tau = np.asarray(tau, dtype=float)
    v = np.asarray(v, dtype=float)
    if not (np.all(np.isfinite(tau)) and np.all(np.isfinite(v))):
        raise InputError("tau and v must be finite")
    tau_pos = np.where(tau >= 0, tau, 0.0)
    amp = np.exp(-0.5 * params.gamma_e * tau_pos - 1j * params.k_i * v * tau_pos)
    return np.where(tau >= 0, amp, 0.0 + 0.0j)


def doppler_averaged_g2(tau_grid, params=None, n_velocity_points=256):
    """Velocity-averaged two-photon waveform on ``tau_grid`` (seconds).

    Trapezoidal quadrature over +-6 sigma_v; the integrand is Gaussian-weighted
    and smooth, so the error falls off spectrally with ``n_velocity_points``.
    """
    params = params or AtomicParams()
    tau_grid = np.asarray(tau_grid, dtype=float)
    _check_uniform(tau_grid)
    if n_velocity_points < 64:
        raise InputError("n_velocity_points must be at least 64")
    sigma = params.sigma_v
    v = np.linspace(-6.0 * sigma, 6.0 * sigma, int(n_velocity_points))
    weights = np.full(v.size, v[1] - v[0])
    weights[0] *= 0.5
    weights[-1] *= 0.5
    weights *= maxwell_boltzmann_pdf(v, params)

    amplitude = np.empty(tau_grid.size, dtype=complex)
    # bounded memory: at most ~4M complex entries per block
    block = max(1, 4_000_000 // v.size)
    for start in range(0, tau_grid.size, block):
        tau = tau_grid[start:start + block, None]
        amplitude[start:start + block] = two_photon_amplitude(tau, v[None, :], params) @ weights
    return TwoPhotonWaveform(tau_grid, amplitude)


def incoherent_average_modulus(tau_grid, params=None, n_velocity_points=256):
    """Pointwise sum_v |Psi_v| f(v) dv; upper bound on |coherent average|."""
    params = params or AtomicParams()
    sigma = params.sigma_v
    v = np.linspace(-6.0 * sigma, 6.0 * sigma, int(n_velocity_points))
    f = maxwell_boltzmann_pdf(v, params)
    mod = np.abs(two_photon_amplitude(np.asarray(tau_grid)[:, None], v[None, :], params))
    return np.trapezoid(mod * f[None, :], v, axis=1)


def default_tau_grid(t_min=-5e-9, t_max=20e-9, step=5e-12):
    n = int(round((t_max - t_min) / step)) + 1
    return t_min + step * np.arange(n)


def exponential_waveform(decay_time, tau_grid=None):
    """Causal exponential density exp(-tau/decay_time); e.g. an ideal narrowband pair."""
    if decay_time <= 0:
        raise ParameterError("decay_time must be positive")
    if tau_grid is None:
        step = decay_time / 50.0
        tau_grid = np.arange(-10 * step, 12.0 * decay_time, step)
    tau_grid = np.asarray(tau_grid, dtype=float)
    density = np.where(tau_grid >= 0, np.exp(-np.clip(tau_grid, 0, None) / decay_time), 0.0)
    return TwoPhotonWaveform.from_density(tau_grid, density)


def jitter_broadened_density(waveform, sigma):
    """Density convolved with a Gaussian of standard deviation ``sigma`` (s).

    For overlaying on measured histograms, where both detectors' timing spread
    smears the causal edge.
    """
    if sigma <= 0:
        return waveform.density.copy()
    dt = waveform.step
    half = int(math.ceil(6 * sigma / dt))
    kernel_t = dt * np.arange(-half, half + 1)
    kernel = np.exp(-0.5 * (kernel_t / sigma) ** 2)
    kernel /= kernel.sum()
    return np.convolve(waveform.density, kernel, mode="same")


def fwhm(curve):
    """Full width at half maximum in seconds.

    Accepts a TwoPhotonWaveform (grid in s), a Histogram or a CorrelationCurve
    (delays in ps). The baseline is the median of the outer 10% of samples.
    """
    if isinstance(curve, TwoPhotonWaveform):
        return half_max_width(curve.tau_grid, curve.density, wing_baseline(curve.density))
    if hasattr(curve, "counts"):
        y = np.asarray(curve.counts, dtype=float)
        return 1e-12 * half_max_width(curve.centers, y, wing_baseline(y))
    if hasattr(curve, "g2"):
        return 1e-12 * half_max_width(curve.tau, curve.g2, wing_baseline(curve.g2))
    raise InputError(f"cannot take the width of {type(curve).__name__}")


def write_waveform_csv(waveform, path):
    """Columns tau_ps, density (1/s), re_amplitude, im_amplitude."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau_ps", "density", "re_amplitude", "im_amplitude"])
        for t, d, a in zip(waveform.tau_grid, waveform.density, waveform.amplitude):
            writer.writerow([f"{t * 1e12:.6f}", f"{d:.9e}", f"{a.real:.9e}", f"{a.imag:.9e}"])


def read_waveform_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    tau = data[:, 0] * 1e-12
    amplitude = data[:, 2] + 1j * data[:, 3]
    return TwoPhotonWaveform(tau, amplitude)
