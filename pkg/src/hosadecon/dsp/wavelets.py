"""
Orthonormal periodic DWT, soft thresholding and wavelet-domain Wiener gains
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence, Tuple, Union

import numpy as np
import pywt

from ..core.config import WaveletFamily
from ..core.errors import EstimationError
from .synth import NoiseModel

logger = logging.getLogger(__name__)

MODE = "periodization"
MAD_SCALE = 0.6745


@dataclass(frozen=True)
class WaveletDecomposition:
    """Scaling coefficients c(k) at level J and details d(j, k), j = 1..J

    `details[0]` is the finest level (j = 1).
    """

    family: WaveletFamily
    levels: int
    approx: np.ndarray
    details: Tuple[np.ndarray, ...]
    original_len: int
    boundary: str = "periodic"

    def __post_init__(self):
        if len(self.details) != self.levels:
            raise ValueError(
                f"expected {self.levels} detail levels, got {len(self.details)}"
            )
        for j, d in enumerate(self.details, start=1):
            if d.size != self.original_len >> j:
                raise ValueError(
                    f"level {j} holds {d.size} coefficients, "
                    f"expected {self.original_len >> j}"
                )
        if self.approx.size != self.original_len >> self.levels:
            raise ValueError("approximation length does not match the level structure")

    def detail(self, level: int) -> np.ndarray:
        return self.details[level - 1]

    def with_coefficients(
        self, approx: np.ndarray, details: Sequence[np.ndarray]
    ) -> "WaveletDecomposition":
        return replace(self, approx=np.asarray(approx), details=tuple(details))

    def energy(self) -> float:
        return float(np.sum(self.approx**2) + sum(np.sum(d**2) for d in self.details))


@dataclass(frozen=True)
class ShrinkageGains:
    """Per-coefficient gains in [0, 1]"""

    lambda_approx: np.ndarray
    lambda_details: Tuple[np.ndarray, ...]


def filter_length(family: WaveletFamily) -> int:
    return pywt.Wavelet(family.value).dec_len


def required_length(family: WaveletFamily, levels: int) -> int:
    """Shortest power-of-two length a J-level transform accepts"""
    return 2**levels * filter_length(family)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def dwt(
    x: np.ndarray, family: Union[WaveletFamily, str], levels: int
) -> WaveletDecomposition:
    """Orthonormal analysis with periodic boundary"""
    family = WaveletFamily(family)
    x = np.array(x, dtype=np.float64)  # pywt refuses read-only buffers
    n = x.size
    if levels < 1:
        raise EstimationError("levels must be >= 1")
    if not _is_power_of_two(n):
        raise EstimationError(f"length {n} is not a power of two; pad first")
    if n < required_length(family, levels):
        raise EstimationError(
            f"J={levels} too deep for {n} samples with {family.value} "
            f"(needs >= {required_length(family, levels)})"
        )

    coeffs = pywt.wavedec(x, family.value, mode=MODE, level=levels)
    return WaveletDecomposition(
        family=family,
        levels=levels,
        approx=coeffs[0],
        details=tuple(reversed(coeffs[1:])),
        original_len=n,
    )


def idwt(dec: WaveletDecomposition) -> np.ndarray:
    """Exact inverse of dwt"""
    coeffs = [np.array(c) for c in [dec.approx, *reversed(dec.details)]]
    x = pywt.waverec(coeffs, dec.family.value, mode=MODE)
    if x.size != dec.original_len:
        raise ValueError("corrupted length structure")
    return x


def soft(values: np.ndarray, threshold: float) -> np.ndarray:
    """sign(d) * max(|d| - T, 0)"""
    return np.sign(values) * np.maximum(np.abs(values) - threshold, 0.0)


def soft_threshold(
    dec: WaveletDecomposition, thresholds: Union[float, Sequence[float]]
) -> WaveletDecomposition:
    """Soft-threshold detail levels (T_j per level); approximation untouched"""
    if np.isscalar(thresholds):
        thresholds = [float(thresholds)] * dec.levels  # type: ignore[list-item]
    thresholds = list(thresholds)  # type: ignore[arg-type]
    if len(thresholds) != dec.levels:
        raise ValueError(f"need {dec.levels} thresholds, got {len(thresholds)}")
    if any(t < 0 for t in thresholds):
        raise ValueError("thresholds must be >= 0")

    details = [soft(d, t) for d, t in zip(dec.details, thresholds)]
    return dec.with_coefficients(dec.approx.copy(), details)


def _gain(coeffs: np.ndarray, sigma2: float) -> np.ndarray:
    power = coeffs * coeffs
    denom = power + sigma2
    return np.divide(power, denom, out=np.zeros_like(power), where=denom > 0)


def wiener_gains(dec: WaveletDecomposition, noise: NoiseModel) -> ShrinkageGains:
    """|d|^2 / (|d|^2 + sigma_j^2) per coefficient; sigma_J for the approximation"""
    levels = range(1, dec.levels + 1)
    missing = [j for j in levels if j not in noise.sigma2_by_level]
    if missing:
        raise ValueError(f"noise model has no variance for levels {missing}")

    details = tuple(
        _gain(d, noise.sigma2_by_level[j]) for j, d in enumerate(dec.details, start=1)
    )
    approx = _gain(dec.approx, noise.sigma2_by_level[dec.levels])
    return ShrinkageGains(lambda_approx=approx, lambda_details=details)


def apply_gains(
    dec: WaveletDecomposition, gains: ShrinkageGains
) -> WaveletDecomposition:
    """Coefficient-wise product; idwt of the result is the shrunk estimate"""
    if gains.lambda_approx.shape != dec.approx.shape:
        raise ValueError("gain shapes do not match the decomposition")
    if len(gains.lambda_details) != len(dec.details):
        raise ValueError("gain shapes do not match the decomposition")
    for g, d in zip(gains.lambda_details, dec.details):
        if g.shape != d.shape:
            raise ValueError("gain shapes do not match the decomposition")

    return dec.with_coefficients(
        dec.approx * gains.lambda_approx,
        [d * g for d, g in zip(dec.details, gains.lambda_details)],
    )


def mad_sigma(coeffs: np.ndarray) -> float:
    """Robust noise scale median(|c|) / 0.6745"""
    if coeffs.size == 0:
        return 0.0
    return float(np.median(np.abs(coeffs)) / MAD_SCALE)


def level_noise(dec: WaveletDecomposition) -> NoiseModel:
    """MAD noise variance of every detail level; the global value is level 1's"""
    by_level = {j: mad_sigma(d) ** 2 for j, d in enumerate(dec.details, start=1)}
    return NoiseModel(sigma2=by_level[1], sigma2_by_level=by_level)


def universal_thresholds(
    dec: WaveletDecomposition, noise: NoiseModel
) -> Tuple[float, ...]:
    """T_j = sigma_j * sqrt(2 ln N_j)"""
    return tuple(
        math.sqrt(noise.sigma2_by_level[j]) * math.sqrt(2 * math.log(d.size))
        if d.size > 1
        else 0.0
        for j, d in enumerate(dec.details, start=1)
    )


def padded_length(n: int, family: WaveletFamily, levels: int) -> int:
    """Next power of two covering n and the transform's minimum length"""
    target = max(n, required_length(family, levels))
    return 1 << (target - 1).bit_length()


def reflect_pad(x: np.ndarray, length: int) -> np.ndarray:
    """Mirror-extend x at its end to `length` samples"""
    if length < x.size:
        raise ValueError("padded length shorter than the signal")
    return np.pad(x, (0, length - x.size), mode="symmetric")
