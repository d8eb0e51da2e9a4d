"""
Sampled series value objects: RF traces, pulses and reflectivity series
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from ..core.config import SeriesKind
from ..core.errors import DegenerateInputError, TraceFormatError

logger = logging.getLogger(__name__)

MIN_PROCESSING_LEN = 64
ZERO_MEAN_RTOL = 1e-9


def _frozen_samples(samples: np.ndarray, what: str) -> np.ndarray:
    """Validate and return a read-only float64 copy"""
    array = np.array(samples, dtype=np.float64).reshape(-1)
    if array.size == 0:
        raise TraceFormatError(f"{what} has no samples")
    bad = np.flatnonzero(~np.isfinite(array))
    if bad.size:
        raise TraceFormatError(
            f"{what} has a non-finite sample at index {int(bad[0])}", index=int(bad[0])
        )
    array.flags.writeable = False
    return array


def _check_rate(sample_rate_hz: float) -> float:
    rate = float(sample_rate_hz)
    if not np.isfinite(rate) or rate <= 0:
        raise TraceFormatError("sample_rate_hz must be a finite value > 0")
    return rate


@dataclass(frozen=True)
class RfTrace:
    """One sampled A-scan line y(n)"""

    samples: np.ndarray
    sample_rate_hz: float
    id: str = "trace"

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_samples(self.samples, "trace"))
        object.__setattr__(self, "sample_rate_hz", _check_rate(self.sample_rate_hz))

    def __len__(self) -> int:
        return int(self.samples.size)

    def with_samples(self, samples: np.ndarray) -> "RfTrace":
        return replace(self, samples=samples)

    def require_processable(self, minimum: int = MIN_PROCESSING_LEN) -> None:
        """Processing operations need at least `minimum` samples"""
        if len(self) < minimum:
            raise DegenerateInputError(
                f"trace '{self.id}' has {len(self)} samples, need >= {minimum}"
            )


@dataclass(frozen=True)
class Pulse:
    """System kernel h(n), optionally unit-energy and peak-aligned"""

    samples: np.ndarray
    sample_rate_hz: float
    alignment: int = 0
    energy_normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_samples(self.samples, "pulse"))
        object.__setattr__(self, "sample_rate_hz", _check_rate(self.sample_rate_hz))
        if not 0 <= self.alignment < self.samples.size:
            raise TraceFormatError("pulse alignment outside the sample range")

    def __len__(self) -> int:
        return int(self.samples.size)


@dataclass(frozen=True)
class ReflectivitySeries:
    """Medium response x(n): ground truth or an estimate of it"""

    samples: np.ndarray
    sample_rate_hz: float
    kind: SeriesKind = SeriesKind.GROUND_TRUTH
    id: str = field(default="reflectivity")

    def __post_init__(self):
        object.__setattr__(
            self, "samples", _frozen_samples(self.samples, "reflectivity")
        )
        object.__setattr__(self, "sample_rate_hz", _check_rate(self.sample_rate_hz))
        if not isinstance(self.kind, SeriesKind):
            object.__setattr__(self, "kind", SeriesKind(self.kind))

    def __len__(self) -> int:
        return int(self.samples.size)


Series = Union[RfTrace, Pulse, ReflectivitySeries]


def remove_mean(trace: RfTrace) -> RfTrace:
    """Subtract the sample mean; idempotent"""
    mean = float(trace.samples.mean())
    scale = float(np.max(np.abs(trace.samples)))
    if abs(mean) <= ZERO_MEAN_RTOL * scale:
        return trace
    samples = trace.samples - mean
    # a second pass removes the rounding residue of the first
    samples = samples - samples.mean()
    return trace.with_samples(samples)


def normalize_pulse(samples: np.ndarray, sample_rate_hz: float) -> Pulse:
    """Unit energy, positive global peak, alignment at that peak"""
    h = np.asarray(samples, dtype=np.float64)
    energy = float(np.dot(h, h))
    if energy == 0.0:
        raise DegenerateInputError("cannot normalize an all-zero pulse")
    h = h / np.sqrt(energy)
    peak = int(np.argmax(np.abs(h)))
    if h[peak] < 0:
        h = -h
    return Pulse(
        samples=h,
        sample_rate_hz=sample_rate_hz,
        alignment=peak,
        energy_normalized=True,
    )
