"""
Fourier-domain deconvolution: naive inverse baseline and the regularized
iterative Wiener filter G = H* Px / (|H|^2 Px + alpha sigma^2)
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pywt
from scipy.ndimage import uniform_filter1d

from ..core.config import SeriesKind, WaveletFamily, WienerConfig
from ..core.errors import EstimationError
from ..models.schemas import WienerLog
from ..models.series import Pulse, ReflectivitySeries, RfTrace
from .synth import NoiseModel
from .wavelets import MODE, filter_length, mad_sigma

logger = logging.getLogger(__name__)

NAIVE_FLOOR = 1e-12
NOISE_FAMILY = WaveletFamily.DB16
NOISE_LEVELS = 5


@dataclass(frozen=True)
class SpectralEstimate:
    """Spectra of one Wiener step on a shared FFT grid"""

    freq_grid_hz: np.ndarray
    Y: np.ndarray
    H: np.ndarray
    X1: np.ndarray
    Px1: np.ndarray
    G: np.ndarray


@dataclass(frozen=True)
class WienerResult:
    """Estimate x1 together with its iteration log"""

    series: ReflectivitySeries
    log: WienerLog


def estimate_noise_variance(
    trace: RfTrace,
    family: WaveletFamily = NOISE_FAMILY,
    levels: int = NOISE_LEVELS,
) -> NoiseModel:
    """sigma = median(|finest details|) / 0.6745 on an orthonormal DWT

    The same MAD rule fills sigma_j^2 for every level the length allows.
    """
    trace.require_processable()
    max_depth = pywt.dwt_max_level(len(trace), filter_length(family))
    depth = max(1, min(levels, max_depth))
    coeffs = pywt.wavedec(np.array(trace.samples), family.value, mode=MODE, level=depth)
    details = list(reversed(coeffs[1:]))
    by_level = {j: mad_sigma(d) ** 2 for j, d in enumerate(details, start=1)}
    logger.debug("Noise sigma^2 for %s: %.4g", trace.id, by_level[1])
    return NoiseModel(sigma2=by_level[1], sigma2_by_level=by_level)


def default_fft_size(n_trace: int, n_pulse: int) -> int:
    """Next power of two >= trace length + pulse length"""
    return 1 << (n_trace + n_pulse - 1).bit_length()


def _fft_size(trace: RfTrace, pulse: Pulse, requested: Optional[int]) -> int:
    if len(pulse) >= len(trace):
        raise EstimationError("pulse must be shorter than the trace")
    nfft = requested or default_fft_size(len(trace), len(pulse))
    if nfft < len(trace) or nfft < len(pulse):
        raise EstimationError(f"fft_size {nfft} shorter than the trace")
    return nfft


def pulse_spectrum(pulse: Pulse, nfft: int) -> np.ndarray:
    """H(f) with the pulse peak placed at time zero"""
    h = np.zeros(nfft)
    idx = (np.arange(len(pulse)) - pulse.alignment) % nfft
    h[idx] = pulse.samples
    return np.fft.fft(h)


def periodogram(
    x: np.ndarray, nfft: int, n: int, smoothing_bins: int = 1
) -> np.ndarray:
    """|X(f)|^2 / n, optionally smoothed by a circular moving average"""
    power = np.abs(np.fft.fft(x, nfft)) ** 2 / n
    if smoothing_bins > 1:
        power = uniform_filter1d(power, size=smoothing_bins, mode="wrap")
    return np.maximum(power, 0.0)


def naive_inverse(
    trace: RfTrace, pulse: Pulse, fft_size: Optional[int] = None
) -> ReflectivitySeries:
    """X1 = Y / H; unstable by construction, kept as a baseline"""
    nfft = _fft_size(trace, pulse, fft_size)
    Y = np.fft.fft(trace.samples, nfft)
    H = pulse_spectrum(pulse, nfft)

    magnitude = np.abs(H)
    floor = NAIVE_FLOOR * magnitude.max()
    H = np.where(magnitude < floor, floor * np.exp(1j * np.angle(H)), H)
    x1 = np.real(np.fft.ifft(Y / H))[: len(trace)]
    return ReflectivitySeries(
        samples=x1,
        sample_rate_hz=trace.sample_rate_hz,
        kind=SeriesKind.NAIVE_ESTIMATE,
        id=trace.id,
    )


def wiener_step(
    Y: np.ndarray,
    H: np.ndarray,
    Px1: np.ndarray,
    alpha: float,
    sigma2: float,
    freq_grid_hz: Optional[np.ndarray] = None,
) -> SpectralEstimate:
    """G = H* Px1 / (|H|^2 Px1 + alpha sigma^2) per bin, 0/0 -> 0, then X1 = G Y"""
    if not (Y.shape == H.shape == Px1.shape):
        raise ValueError("Y, H and Px1 must share one length")
    if np.any(Px1 < 0):
        raise ValueError("Px1 must be >= 0")

    numerator = np.conj(H) * Px1
    denominator = np.abs(H) ** 2 * Px1 + alpha * sigma2
    G = np.divide(
        numerator,
        denominator,
        out=np.zeros_like(numerator),
        where=denominator > 0,
    )
    if freq_grid_hz is None:
        freq_grid_hz = np.fft.fftfreq(Y.size)
    return SpectralEstimate(
        freq_grid_hz=freq_grid_hz, Y=Y, H=H, X1=G * Y, Px1=Px1, G=G
    )


def reflectivity_power(trace: RfTrace, pulse: Pulse, sigma2: float) -> float:
    """Flat spectrum level of a white reflectivity explaining the trace

    (mean(y^2) - sigma^2) / sum(h^2), floored at 0. It bounds Px1 from above:
    in bins where the trace is noise, the periodogram of x1 follows |Y / H|^2
    and would otherwise carry the iteration to the naive inverse.
    """
    energy = float(np.sum(pulse.samples**2))
    if energy == 0.0:
        raise EstimationError("pulse has zero energy")
    signal = float(np.mean(trace.samples**2)) - sigma2
    return max(signal, 0.0) / energy


def run_iterative_wiener(
    trace: RfTrace,
    pulse: Pulse,
    cfg: WienerConfig,
    noise: NoiseModel,
) -> WienerResult:
    """Iterative Wiener filter with a fixed iteration count

    Iteration 0 seeds Px1 from the periodogram of the inverse regularized by
    the constant q = alpha sigma^2; each iteration re-estimates Px1 from the
    current x1 (smoothed over cfg.smoothing_bins, capped at the white
    reflectivity level) and reapplies the filter.
    """
    if pulse.sample_rate_hz != trace.sample_rate_hz:
        raise ValueError("trace and pulse sample rates differ")
    n = len(trace)
    nfft = _fft_size(trace, pulse, cfg.fft_size)
    freq = np.fft.fftfreq(nfft, d=1.0 / trace.sample_rate_hz)
    Y = np.fft.fft(trace.samples, nfft)
    H = pulse_spectrum(pulse, nfft)
    q = cfg.alpha * noise.sigma2
    cap = reflectivity_power(trace, pulse, noise.sigma2)

    seed_den = np.abs(H) ** 2 + q
    X0 = np.divide(
        np.conj(H) * Y, seed_den, out=np.zeros_like(Y), where=seed_den > 0
    )
    x1 = np.real(np.fft.ifft(X0))[:n]
    Px1 = np.minimum(periodogram(x1, nfft, n, cfg.smoothing_bins), cap)

    residuals = []
    for iteration in range(cfg.iterations):
        est = wiener_step(Y, H, Px1, cfg.alpha, noise.sigma2, freq)
        x1 = np.real(np.fft.ifft(est.X1))[:n]
        residuals.append(float(np.sum(np.abs(Y - H * est.X1) ** 2) / nfft))
        Px1 = np.minimum(periodogram(x1, nfft, n, cfg.smoothing_bins), cap)
        logger.debug(
            "Wiener %s iteration %d: residual %.4g",
            trace.id,
            iteration + 1,
            residuals[-1],
        )

    series = ReflectivitySeries(
        samples=x1,
        sample_rate_hz=trace.sample_rate_hz,
        kind=SeriesKind.WIENER_ESTIMATE,
        id=trace.id,
    )
    log = WienerLog(
        alpha=cfg.alpha,
        sigma2=noise.sigma2,
        iterations=cfg.iterations,
        fft_size=nfft,
        smoothing_bins=cfg.smoothing_bins,
        reflectivity_power=cap,
        residual_energy=residuals,
    )
    return WienerResult(series=series, log=log)


def iterative_wiener(
    trace: RfTrace, pulse: Pulse, cfg: WienerConfig, noise: NoiseModel
) -> ReflectivitySeries:
    """First reflectivity estimate x1"""
    return run_iterative_wiener(trace, pulse, cfg, noise).series
