"""
Fourier-wavelet regularized deconvolution of one trace

x1 from the iterative Wiener filter, a soft-threshold denoising pass on its
wavelet coefficients, then wavelet-domain Wiener gains and synthesis.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core.config import SeriesKind, ThresholdRule, WaveletConfig, WienerConfig
from ..models.schemas import LevelLog, ShrinkageLog
from ..models.series import Pulse, ReflectivitySeries, RfTrace
from .synth import NoiseModel
from .wavelets import (
    apply_gains,
    dwt,
    idwt,
    level_noise,
    padded_length,
    reflect_pad,
    soft_threshold,
    universal_thresholds,
    wiener_gains,
)
from .wiener import WienerResult, estimate_noise_variance, run_iterative_wiener

logger = logging.getLogger(__name__)

# sigma_j below this fraction of the rms of x1 is floating-point residue
ROUNDOFF = 1e-10


def without_roundoff(noise: NoiseModel, rms: float) -> NoiseModel:
    """Level variances at round-off size relative to `rms` set to zero"""
    floor = (ROUNDOFF * rms) ** 2
    by_level = {j: v if v > floor else 0.0 for j, v in noise.sigma2_by_level.items()}
    return NoiseModel(sigma2=by_level.get(1, 0.0), sigma2_by_level=by_level)


@dataclass(frozen=True)
class ForwardResult:
    """Both estimates of one trace and the logs that produced them"""

    wiener: WienerResult
    estimate: ReflectivitySeries
    log: ShrinkageLog

    @property
    def x1(self) -> ReflectivitySeries:
        return self.wiener.series


def run_forward_deconvolve(
    trace: RfTrace,
    pulse: Pulse,
    wcfg: WaveletConfig,
    wiener_cfg: WienerConfig,
    noise: Optional[NoiseModel] = None,
) -> ForwardResult:
    """Fourier stage, threshold pass, Wiener-gain pass"""
    noise = noise if noise is not None else estimate_noise_variance(trace)
    wiener = run_iterative_wiener(trace, pulse, wiener_cfg, noise)
    x1 = wiener.series.samples
    n = x1.size
    levels = wcfg.levels

    n_pad = max(
        padded_length(n, wcfg.threshold_family, levels),
        padded_length(n, wcfg.gain_family, levels),
    )
    padded = reflect_pad(x1, n_pad)

    dec = dwt(padded, wcfg.threshold_family, levels)
    rms = float(np.sqrt(np.mean(padded**2)))
    threshold_noise = without_roundoff(level_noise(dec), rms)
    if wcfg.threshold_rule is ThresholdRule.UNIVERSAL:
        thresholds = universal_thresholds(dec, threshold_noise)
    else:
        thresholds = (0.0,) * levels
    thresholded = soft_threshold(dec, thresholds)
    denoised = idwt(thresholded)

    # residual noise of x1 is colored: estimate sigma_j level by level
    gain_noise = level_noise(dwt(padded, wcfg.gain_family, levels))
    gain_dec = dwt(denoised, wcfg.gain_family, levels)
    gains = wiener_gains(gain_dec, gain_noise)
    x_tilde = idwt(apply_gains(gain_dec, gains))[:n]

    level_logs = [
        LevelLog(
            level=j,
            n_coefficients=int(dec.detail(j).size),
            sigma_threshold_pass=float(np.sqrt(threshold_noise.sigma2_by_level[j])),
            threshold=float(thresholds[j - 1]),
            survivors=int(np.count_nonzero(thresholded.detail(j))),
            sigma_gain_pass=float(np.sqrt(gain_noise.sigma2_by_level[j])),
            mean_gain=float(np.mean(gains.lambda_details[j - 1])),
        )
        for j in range(1, levels + 1)
    ]
    log = ShrinkageLog(
        threshold_family=wcfg.threshold_family.value,
        gain_family=wcfg.gain_family.value,
        levels=level_logs,
        sigma_approx=float(np.sqrt(gain_noise.sigma2_by_level[levels])),
        padded_length=n_pad,
    )
    logger.debug("Wavelet stage for %s: thresholds %s", trace.id, thresholds)

    estimate = ReflectivitySeries(
        samples=x_tilde,
        sample_rate_hz=trace.sample_rate_hz,
        kind=SeriesKind.WAVELET_ESTIMATE,
        id=trace.id,
    )
    return ForwardResult(wiener=wiener, estimate=estimate, log=log)


def forward_deconvolve(
    trace: RfTrace,
    pulse: Pulse,
    wcfg: WaveletConfig,
    wiener_cfg: WienerConfig,
) -> ReflectivitySeries:
    """Final reflectivity estimate x~"""
    return run_forward_deconvolve(trace, pulse, wcfg, wiener_cfg).estimate
