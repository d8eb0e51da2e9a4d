"""
Blind pulse estimation from third-order statistics

remove_mean -> estimate_cumulant -> bispectrum_of -> bicepstrum_of ->
extract_pulse_cepstrum -> reconstruct_pulse. Gaussian noise has a zero
bispectrum, so the chain sees only the skewed reflectivity convolved with
the pulse.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import welch
from scipy.signal.windows import parzen
from scipy.sparse import coo_matrix, vstack
from scipy.sparse.linalg import lsqr

from ..core.config import HosaOptions, MagnitudeSource
from ..core.errors import DegenerateInputError, EstimationError
from ..models.schemas import PulseQualityReport
from ..models.series import Pulse, RfTrace, normalize_pulse, remove_mean
from .metrics import normalized_cross_correlation
from .wiener import estimate_noise_variance

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
SMOOTHNESS = 1.0


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what} holds non-finite values")


@dataclass(frozen=True)
class CumulantGrid:
    """c(m1, m2) for |m1|, |m2| <= L

    values[i, j] holds c(i - L, j - L). The scale gamma_x = E[x^3] is folded
    into the values.
    """

    max_lag: int
    values: np.ndarray
    n_averaged: int
    n_traces: int
    n_segments: int = 1

    def __post_init__(self):
        size = 2 * self.max_lag + 1
        if self.values.shape != (size, size):
            raise ValueError(f"cumulant grid must be {size}x{size}")
        _check_finite(self.values, "cumulant grid")

    def at(self, m1: int, m2: int) -> float:
        return float(self.values[m1 + self.max_lag, m2 + self.max_lag])


@dataclass(frozen=True)
class BispectrumGrid:
    """C(f1, f2) on a K x K grid in FFT order"""

    size: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.size, self.size):
            raise ValueError(f"bispectrum grid must be {self.size}x{self.size}")
        _check_finite(self.values, "bispectrum")


@dataclass(frozen=True)
class BicepstrumGrid:
    """b(m1, m2) on a K x K quefrency grid (index m mod K) plus unwrap diagnostics"""

    size: int
    values: np.ndarray
    unwrap_residue: float = 0.0
    imaginary_residue: float = 0.0
    floored_fraction: float = 0.0
    linear_phase_removed: Tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.values.shape != (self.size, self.size):
            raise ValueError(f"bicepstrum grid must be {self.size}x{self.size}")
        _check_finite(self.values, "bicepstrum")

    def at(self, m1: int, m2: int) -> float:
        return float(self.values[m1 % self.size, m2 % self.size])


@dataclass(frozen=True)
class CepstrumSeq:
    """Complex cepstrum h^(n), n in [-K/2, K/2), stored in FFT order

    h^(0) is zero: the pulse gain is not identifiable.
    """

    values: np.ndarray

    def __post_init__(self):
        _check_finite(self.values, "cepstrum")
        if self.values[0] != 0.0:
            raise ValueError("h^(0) must be exactly 0")

    @property
    def size(self) -> int:
        return int(self.values.size)

    def at(self, n: int) -> float:
        return float(self.values[n % self.size])


@dataclass(frozen=True)
class PulseEstimate:
    pulse: Pulse
    quality: PulseQualityReport
    cepstrum: CepstrumSeq


def _segments(x: np.ndarray, segment_len: int) -> List[np.ndarray]:
    """Non-overlapping segments; a trailing remainder is dropped"""
    if x.size < segment_len:
        return [x]
    count = x.size // segment_len
    return [x[i * segment_len : (i + 1) * segment_len] for i in range(count)]


def _shifted(y: np.ndarray, lag: int) -> np.ndarray:
    """y(n + lag) with zeros outside the segment"""
    out = np.zeros_like(y)
    if lag >= 0:
        out[: y.size - lag] = y[lag:]
    else:
        out[-lag:] = y[: y.size + lag]
    return out


def _segment_moment(y: np.ndarray, max_lag: int) -> np.ndarray:
    """(1/M) sum_n y(n) y(n+m1) y(n+m2) for every lag pair

    Row m1 correlates the product y(n) y(n+m1) with y; zero padding to
    M + L keeps the circular correlation free of wrap-around.
    """
    lags = np.arange(-max_lag, max_lag + 1)
    products = np.stack([y * _shifted(y, lag) for lag in lags])
    nfft = 1 << (y.size + max_lag - 1).bit_length()
    spectra = np.fft.rfft(products, nfft, axis=1)
    reference = np.fft.rfft(y, nfft)
    corr = np.fft.irfft(np.conj(spectra) * reference, nfft, axis=1)
    return corr[:, lags % nfft] / y.size


def estimate_cumulant(
    traces: Sequence[RfTrace], max_lag: int, segment_len: int
) -> CumulantGrid:
    """Biased third-order moment averaged over all segments, then symmetrized

    Traces are expected zero-mean. Segments are summed in trace order so the
    result is reproducible bit for bit.
    """
    if max_lag < 0:
        raise EstimationError("max_lag must be >= 0")
    if segment_len <= 2 * max_lag:
        raise EstimationError(
            f"max_lag {max_lag} must be below segment_len/2 ({segment_len})"
        )
    if not traces:
        raise DegenerateInputError("no traces to estimate a cumulant from")

    size = 2 * max_lag + 1
    total = np.zeros((size, size))
    n_segments = 0
    n_averaged = 0
    for trace in traces:
        for segment in _segments(trace.samples, segment_len):
            if segment.size <= 2 * max_lag:
                continue
            total += _segment_moment(segment, max_lag)
            n_segments += 1
            n_averaged = n_averaged or segment.size
    if n_segments == 0:
        raise EstimationError(
            f"too few samples: no trace is longer than 2*max_lag ({2 * max_lag})"
        )

    average = total / n_segments
    logger.debug("Cumulant averaged over %d segments", n_segments)
    return CumulantGrid(
        max_lag=max_lag,
        values=0.5 * (average + average.T),
        n_averaged=n_averaged,
        n_traces=len(traces),
        n_segments=n_segments,
    )


def lag_window(max_lag: int) -> np.ndarray:
    """Separable 2-D Parzen window over the lag grid"""
    w = parzen(2 * max_lag + 1)
    return np.outer(w, w)


def bispectrum_of(
    grid: CumulantGrid, fft_size: int, window: bool = True
) -> BispectrumGrid:
    """2-D DFT of the (windowed) cumulant, lag origin circularly at (0, 0)"""
    max_lag = grid.max_lag
    if fft_size % 2 or fft_size < 2 * max_lag + 1:
        raise EstimationError(
            f"fft_size {fft_size} must be even and >= 2*max_lag+1 ({2 * max_lag + 1})"
        )

    values = grid.values * lag_window(max_lag) if window else grid.values
    padded = np.zeros((fft_size, fft_size))
    idx = np.arange(-max_lag, max_lag + 1) % fft_size
    padded[np.ix_(idx, idx)] = values
    return BispectrumGrid(size=fft_size, values=np.fft.fft2(padded))


def unwrap_phase_2d(phase: np.ndarray) -> np.ndarray:
    """Unwrap along rows, then columns, on the grid centred at DC"""
    centred = np.fft.fftshift(phase)
    unwrapped = np.unwrap(np.unwrap(centred, axis=1), axis=0)
    return np.fft.ifftshift(unwrapped)


def _integer_phase_slope(phase: np.ndarray, valid: np.ndarray) -> Tuple[int, int]:
    """Integer-sample part of the least-squares phase plane"""
    size = phase.shape[0]
    k = np.fft.fftfreq(size, 1.0 / size)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    count = int(valid.sum())
    if count < 3:
        return 0, 0
    design = np.column_stack([k1[valid], k2[valid], np.ones(count)])
    coef, *_ = np.linalg.lstsq(design, phase[valid], rcond=None)
    d1, d2 = (int(np.rint(c * size / TWO_PI)) for c in coef[:2])
    return d1, d2


def _unwrap_residue(phase: np.ndarray, valid: np.ndarray) -> float:
    """Fraction of neighbouring valid bins whose phase still jumps by > pi"""
    centred = np.fft.fftshift(phase)
    mask = np.fft.fftshift(valid)
    jumps = pairs = 0
    for axis in (0, 1):
        diff = np.abs(np.diff(centred, axis=axis))
        both = np.logical_and(
            np.delete(mask, 0, axis=axis), np.delete(mask, -1, axis=axis)
        )
        jumps += int(np.count_nonzero(diff[both] > math.pi))
        pairs += int(np.count_nonzero(both))
    return jumps / pairs if pairs else 0.0


def bicepstrum_of(
    bisp: BispectrumGrid, floor_eps: float = 0.1, imag_tolerance: float = 1e-6
) -> BicepstrumGrid:
    """Inverse 2-D DFT of log C with floored magnitude and unwrapped phase

    Bins below floor_eps * max|C| take log(floor) and zero phase. Only the
    integer-sample part of the least-squares phase plane is removed.
    """
    C = bisp.values
    magnitude = np.abs(C)
    peak = float(magnitude.max())
    if peak == 0.0:
        raise DegenerateInputError("bispectrum is identically zero")

    floor = floor_eps * peak
    floored = magnitude < floor
    valid = ~floored
    if np.sum(C.real[valid]) < 0:
        # negative skew: the sign belongs to the polarity convention
        C = -C

    log_magnitude = np.log(np.maximum(magnitude, floor))
    phase = unwrap_phase_2d(np.where(floored, 0.0, np.angle(C)))
    phase -= TWO_PI * np.rint(phase[valid].mean() / TWO_PI)

    d1, d2 = _integer_phase_slope(phase, valid)
    if d1 or d2:
        k = np.fft.fftfreq(bisp.size, 1.0 / bisp.size)
        phase -= TWO_PI * (d1 * k[:, None] + d2 * k[None, :]) / bisp.size
    phase[floored] = 0.0

    cepstrum = np.fft.ifft2(log_magnitude + 1j * phase)
    real_norm = float(np.linalg.norm(cepstrum.real))
    imag_norm = float(np.linalg.norm(cepstrum.imag))
    imaginary_residue = imag_norm / real_norm if real_norm > 0 else imag_norm
    if imaginary_residue > imag_tolerance:
        logger.warning(
            "Bicepstrum imaginary residue %.2e exceeds %.0e",
            imaginary_residue,
            imag_tolerance,
        )

    return BicepstrumGrid(
        size=bisp.size,
        values=cepstrum.real,
        unwrap_residue=_unwrap_residue(phase, valid),
        imaginary_residue=imaginary_residue,
        floored_fraction=float(floored.mean()),
        linear_phase_removed=(d1, d2),
    )


def extract_pulse_cepstrum(bic: BicepstrumGrid) -> CepstrumSeq:
    """h^(n) = b(-n, -n) for n != 0, h^(0) = 0

    With C computed as the forward DFT of c(m1, m2), the log H(z1^-1 z2^-1)
    term sits on the diagonal m1 = m2; the anti-diagonal is zero off the origin.
    """
    n = np.arange(bic.size)
    values = bic.values[(-n) % bic.size, (-n) % bic.size].copy()
    values[0] = 0.0
    return CepstrumSeq(values=values)


def _strongest_window(h: np.ndarray, length: int) -> Tuple[int, float]:
    """Circular start index of the `length`-sample window with most energy"""
    energy = h * h
    total = float(energy.sum())
    if total == 0.0:
        raise DegenerateInputError("reconstructed pulse has zero energy")
    wrapped = np.concatenate([energy, energy[: length - 1]])
    cumulative = np.concatenate([[0.0], np.cumsum(wrapped)])
    sums = cumulative[length : length + h.size] - cumulative[: h.size]
    start = int(np.argmax(sums))
    return start, min(float(sums[start]) / total, 1.0)


def _reconstruct(
    ceps: CepstrumSeq,
    pulse_len: int,
    sample_rate_hz: float,
    magnitude: Optional[np.ndarray],
    energy_fraction: float,
) -> Tuple[Pulse, float]:
    if pulse_len > ceps.size:
        raise EstimationError(f"pulse_len {pulse_len} exceeds the grid {ceps.size}")

    log_spectrum = np.fft.fft(ceps.values)
    if magnitude is None:
        spectrum = np.exp(log_spectrum)
    else:
        magnitude = np.asarray(magnitude, dtype=np.float64)
        if magnitude.shape != (ceps.size,):
            raise ValueError(f"magnitude must hold {ceps.size} bins")
        spectrum = magnitude * np.exp(1j * log_spectrum.imag)
    h = np.real(np.fft.ifft(spectrum))

    start, captured = _strongest_window(h, pulse_len)
    if captured < energy_fraction:
        raise EstimationError(
            f"only {captured:.1%} of the pulse energy fits in {pulse_len} samples "
            f"(need {energy_fraction:.0%})"
        )
    samples = np.take(h, start + np.arange(pulse_len), mode="wrap")
    return normalize_pulse(samples, sample_rate_hz), captured


def reconstruct_pulse(
    ceps: CepstrumSeq,
    pulse_len: int,
    fs: float,
    magnitude: Optional[np.ndarray] = None,
    energy_fraction: float = 0.99,
) -> Pulse:
    """h = IDFT(exp(DFT(h^))), cut to the window holding >= energy_fraction

    With `magnitude` given, only the phase (odd part of h^) is taken from the
    cepstrum and |H| comes from the caller.
    """
    return _reconstruct(ceps, pulse_len, fs, magnitude, energy_fraction)[0]


def power_spectrum_magnitude(
    traces: Sequence[RfTrace], fft_size: int, noise_sigma2: float = 0.0
) -> np.ndarray:
    """|H| up to scale: ensemble Welch spectrum minus the white-noise floor"""
    psd = np.zeros(fft_size)
    for trace in traces:
        _, p = welch(
            trace.samples,
            fs=1.0,
            nperseg=min(fft_size, len(trace)),
            nfft=fft_size,
            detrend=False,
            return_onesided=False,
            scaling="density",
        )
        psd += p
    psd /= len(traces)
    return np.sqrt(np.maximum(psd - noise_sigma2, 0.0))


def _fold(k: np.ndarray, size: int) -> np.ndarray:
    """Bin index k mapped onto [0, K/2] using |H(-k)| = |H(k)|"""
    k = k % size
    return np.minimum(k, size - k)


def bispectral_magnitude(
    bisp: BispectrumGrid, floor_eps: float = 0.1, smoothness: float = SMOOTHNESS
) -> np.ndarray:
    """|H| up to scale from log|C(k1, k2)| = a(k1) + a(k2) + a(k1 + k2)

    Least squares over the bins with |C| >= floor_eps * max|C|. A light
    second-difference penalty between neighbouring solved bins ties together
    the low and high bands that every equation couples. Bins no equation
    reaches get zero magnitude.
    """
    size = bisp.size
    magnitude = np.abs(bisp.values)
    peak = float(magnitude.max())
    if peak == 0.0:
        raise DegenerateInputError("bispectrum is identically zero")

    k1, k2 = np.nonzero(magnitude >= floor_eps * peak)
    columns = np.stack([_fold(k1, size), _fold(k2, size), _fold(k1 + k2, size)])
    n_unknowns = size // 2 + 1
    n_rows = k1.size
    data = coo_matrix(
        (np.ones(3 * n_rows), (np.tile(np.arange(n_rows), 3), columns.ravel())),
        shape=(n_rows, n_unknowns),
    )

    solved = np.zeros(n_unknowns, dtype=bool)
    solved[columns.ravel()] = True
    centres = np.flatnonzero(solved[:-2] & solved[1:-1] & solved[2:]) + 1
    stencil = coo_matrix(
        (
            np.tile(smoothness * np.array([1.0, -2.0, 1.0]), centres.size),
            (
                np.repeat(np.arange(centres.size), 3),
                (centres[:, None] + np.arange(-1, 2)).ravel(),
            ),
        ),
        shape=(centres.size, n_unknowns),
    )

    system = vstack([data, stencil]).tocsr()
    rhs = np.concatenate([np.log(magnitude[k1, k2]), np.zeros(centres.size)])
    a = lsqr(system, rhs, atol=1e-12, btol=1e-12, iter_lim=20 * n_unknowns)[0]

    folded = np.zeros(n_unknowns)
    folded[solved] = np.exp(a[solved] - a[solved].max())
    logger.debug(
        "Bispectral magnitude from %d bins, %d of %d frequencies solved",
        n_rows,
        int(solved.sum()),
        n_unknowns,
    )
    return folded[_fold(np.arange(size), size)]


def run_estimate_pulse(
    traces: Sequence[RfTrace],
    opts: Optional[HosaOptions] = None,
    truth: Optional[Pulse] = None,
) -> PulseEstimate:
    """Full estimation chain with its quality report"""
    opts = opts or HosaOptions()
    if not traces:
        raise DegenerateInputError("no traces")

    ensemble = list(traces[: opts.ensemble])
    if len(ensemble) < opts.ensemble:
        logger.warning(
            "Ensemble holds %d traces, fewer than the requested %d",
            len(ensemble),
            opts.ensemble,
        )
    rates = {trace.sample_rate_hz for trace in ensemble}
    if len(rates) > 1:
        raise EstimationError(f"ensemble mixes sample rates: {sorted(rates)}")
    for trace in ensemble:
        trace.require_processable()

    centred = [remove_mean(trace) for trace in ensemble]
    if not any(np.any(trace.samples) for trace in centred):
        raise DegenerateInputError("ensemble has zero energy")

    grid = estimate_cumulant(centred, opts.max_lag, opts.segment_len)
    bisp = bispectrum_of(grid, opts.fft_size, window=opts.lag_window)
    bic = bicepstrum_of(bisp, opts.floor_eps, opts.imag_tolerance)
    ceps = extract_pulse_cepstrum(bic)

    noise_sigma2 = float(
        np.mean([estimate_noise_variance(trace).sigma2 for trace in centred])
    )
    if opts.magnitude_source is MagnitudeSource.POWER_SPECTRUM:
        magnitude = power_spectrum_magnitude(centred, opts.fft_size, noise_sigma2)
    else:
        magnitude = bispectral_magnitude(bisp, opts.floor_eps)

    pulse, captured = _reconstruct(
        ceps, opts.pulse_len, rates.pop(), magnitude, opts.energy_fraction
    )

    flagged = (
        bic.unwrap_residue > opts.unwrap_tolerance
        or bic.imaginary_residue > opts.imag_tolerance
    )
    if flagged:
        logger.warning(
            "Pulse estimate flagged: unwrap residue %.3f, imaginary residue %.2e",
            bic.unwrap_residue,
            bic.imaginary_residue,
        )

    quality = PulseQualityReport(
        ensemble_size=len(ensemble),
        max_lag=opts.max_lag,
        fft_size=opts.fft_size,
        segment_len=opts.segment_len,
        n_segments=grid.n_segments,
        lag_window=opts.lag_window,
        floor_eps=opts.floor_eps,
        magnitude_source=opts.magnitude_source.value,
        unwrap_residue=bic.unwrap_residue,
        imaginary_residue=bic.imaginary_residue,
        floored_fraction=bic.floored_fraction,
        linear_phase_removed=list(bic.linear_phase_removed),
        energy_fraction=captured,
        noise_sigma2=noise_sigma2,
        flagged=flagged,
        ncc_vs_truth=(
            normalized_cross_correlation(pulse.samples, truth.samples)
            if truth is not None
            else None
        ),
    )
    logger.info(
        "Estimated %d-sample pulse from %d traces", len(pulse), len(ensemble)
    )
    return PulseEstimate(pulse=pulse, quality=quality, cepstrum=ceps)


def estimate_pulse(
    traces: Sequence[RfTrace], opts: Optional[HosaOptions] = None
) -> Pulse:
    return run_estimate_pulse(traces, opts).pulse
