"""
Axial-resolution metrics and estimate-quality figures
"""

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.signal import correlate

from ..core.errors import DegenerateInputError, EstimationError
from ..models.schemas import ResolutionReport
from ..models.series import ReflectivitySeries, RfTrace

logger = logging.getLogger(__name__)

MIN_ACOV_LEN = 16

SeriesLike = Union[np.ndarray, RfTrace, ReflectivitySeries]
Window = Optional[Tuple[int, int]]


def _samples(x: SeriesLike, window: Window = None) -> np.ndarray:
    values = x.samples if isinstance(x, (RfTrace, ReflectivitySeries)) else x
    values = np.asarray(values, dtype=np.float64)
    if window is not None:
        start, stop = window
        values = values[start:stop]
    return values


def drop_level(drop_db: float = -6.0) -> float:
    """Amplitude level of a dB drop, 6 dB per halving (-6 dB -> 0.5)"""
    return 0.5 ** (-drop_db / 6.0)


def autocovariance(x: SeriesLike, window: Window = None) -> np.ndarray:
    """Biased autocovariance normalized to 1 at lag 0

    Returns lags -(n-1)..(n-1); the centre sample (index n-1) is lag 0.
    """
    values = _samples(x, window)
    if values.size < MIN_ACOV_LEN:
        raise EstimationError(
            f"autocovariance needs >= {MIN_ACOV_LEN} samples, got {values.size}"
        )
    centred = values - values.mean()
    acov = correlate(centred, centred, mode="full")
    acov = 0.5 * (acov + acov[::-1])
    zero_lag = acov[values.size - 1]
    if zero_lag <= 0:
        raise DegenerateInputError("autocovariance of a zero-energy sequence")
    return acov / zero_lag


def _first_crossing(side: np.ndarray, level: float) -> float:
    """Fractional offset where `side` (starting at lag 0) first drops to `level`"""
    below = np.flatnonzero(side <= level)
    if below.size == 0:
        raise EstimationError(f"autocovariance never drops to {level:.3g}")
    k = int(below[0])
    upper, lower = side[k - 1], side[k]
    return (k - 1) + (upper - level) / (upper - lower)


def main_lobe_width(acov: np.ndarray, drop_db: float = -6.0) -> float:
    """Width in samples between the first level crossings around lag 0"""
    acov = np.asarray(acov, dtype=np.float64)
    centre = acov.size // 2
    level = drop_level(drop_db)
    if acov[centre] <= level:
        raise EstimationError("autocovariance is not centred on its maximum")
    right = _first_crossing(acov[centre:], level)
    left = _first_crossing(acov[centre::-1], level)
    return float(left + right)


def lobe_width(x: SeriesLike, drop_db: float = -6.0, window: Window = None) -> float:
    return main_lobe_width(autocovariance(x, window), drop_db)


def resolution_gain(
    before: SeriesLike,
    after: SeriesLike,
    drop_db: float = -6.0,
    window: Window = None,
) -> float:
    """main_lobe_width(before) / main_lobe_width(after)"""
    return lobe_width(before, drop_db, window) / lobe_width(after, drop_db, window)


def batch_resolution_stats(
    pairs: Sequence[Tuple[SeriesLike, SeriesLike]],
    drop_db: float = -6.0,
    window: Window = None,
    trace_ids: Optional[Sequence[str]] = None,
) -> ResolutionReport:
    """Mean and sample standard deviation of per-trace gains"""
    if len(pairs) < 2:
        raise EstimationError(f"need at least 2 trace pairs, got {len(pairs)}")

    widths_before = np.array([lobe_width(b, drop_db, window) for b, _ in pairs])
    widths_after = np.array([lobe_width(a, drop_db, window) for _, a in pairs])
    gains = widths_before / widths_after
    before = float(widths_before.mean())
    after = float(widths_after.mean())
    logger.info(
        "Main lobe %.2f -> %.2f samples over %d traces", before, after, len(pairs)
    )
    return ResolutionReport(
        lobe_width_before=before,
        lobe_width_after=after,
        gain=before / after,
        trace_ids=list(trace_ids or []),
        per_trace_gains=gains.tolist(),
        gain_mean=float(np.mean(gains)),
        gain_std=float(np.std(gains, ddof=1)),
        drop_db=drop_db,
    )


def acov_curves(
    before: SeriesLike, after: SeriesLike, max_lag: int, window: Window = None
) -> np.ndarray:
    """Rows (lag, acov_before, acov_after) for lags -max_lag..max_lag"""
    lags = np.arange(-max_lag, max_lag + 1)
    columns = [lags.astype(np.float64)]
    for series in (before, after):
        acov = autocovariance(series, window)
        centre = acov.size // 2
        padded = np.zeros(lags.size)
        valid = np.abs(lags) <= centre
        padded[valid] = acov[centre + lags[valid]]
        columns.append(padded)
    return np.column_stack(columns)


def normalized_cross_correlation(a: SeriesLike, b: SeriesLike) -> float:
    """max_k sum a(n) b(n + k) / (|a| |b|)"""
    a, b = _samples(a), _samples(b)
    norm = np.linalg.norm(a) * np.linalg.norm(b)
    if norm == 0:
        raise DegenerateInputError("cross-correlation of a zero-energy sequence")
    return float(np.max(correlate(a, b, mode="full")) / norm)


def relative_l2_error(estimate: SeriesLike, truth: SeriesLike) -> float:
    """|estimate - truth| / |truth|"""
    estimate, truth = _samples(estimate), _samples(truth)
    if estimate.shape != truth.shape:
        raise ValueError(
            f"length mismatch: estimate {estimate.size}, truth {truth.size}"
        )
    scale = np.linalg.norm(truth)
    if scale == 0:
        raise DegenerateInputError("ground truth has zero energy")
    return float(np.linalg.norm(estimate - truth) / scale)
