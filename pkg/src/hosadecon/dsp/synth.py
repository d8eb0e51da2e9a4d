"""
Forward model y = h * x + noise and the synthetic reference dataset

All randomness flows from numpy's PCG64 generator seeded through
SeedSequence, so identical seeds give byte-identical datasets.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from ..core.config import SeriesKind, SynthConfig, TraceFormat
from ..core.errors import EstimationError
from ..io.trace_io import save_series, write_model
from ..models.schemas import DatasetManifest
from ..models.series import Pulse, ReflectivitySeries, RfTrace, normalize_pulse

logger = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"
ENVELOPE_EDGE_LIMIT = 1e-3
ATTENUATION_RANGE = (0.25, 1.0)

Seed = Union[int, np.random.SeedSequence, None]


@dataclass(frozen=True)
class NoiseModel:
    """Noise variance, global and per wavelet level"""

    sigma2: float = 0.0
    sigma2_by_level: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.sigma2 < 0 or any(v < 0 for v in self.sigma2_by_level.values()):
            raise ValueError("noise variances must be >= 0")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


def gabor_sigmas(cfg: SynthConfig) -> Tuple[float, float]:
    """Spectral and temporal envelope widths (Hz, s) of the Gabor pulse"""
    fwhm = cfg.fractional_bandwidth * cfg.center_freq_hz
    sigma_f = fwhm / (2 * math.sqrt(2 * math.log(2)))
    sigma_t = 1.0 / (2 * math.pi * sigma_f)
    return sigma_f, sigma_t


def generate_pulse(cfg: SynthConfig) -> Pulse:
    """Gaussian-enveloped cosine at the centre frequency, unit energy"""
    _, sigma_t = gabor_sigmas(cfg)
    n = cfg.pulse_len
    t = (np.arange(n) - n // 2) / cfg.sample_rate_hz
    envelope = np.exp(-(t**2) / (2 * sigma_t**2))

    edge = max(envelope[0], envelope[-1])
    if edge > ENVELOPE_EDGE_LIMIT:
        raise EstimationError(
            f"fractional bandwidth {cfg.fractional_bandwidth} needs a pulse longer "
            f"than {n} samples (envelope {edge:.2e} at the window edge)"
        )

    samples = envelope * np.cos(2 * np.pi * cfg.center_freq_hz * t)
    return normalize_pulse(samples, cfg.sample_rate_hz)


def generate_reflectivity(
    cfg: SynthConfig, seed: Seed = None, id: str = "reflectivity"
) -> ReflectivitySeries:
    """Sparse, positively skewed reflectivity

    Bernoulli positions; amplitudes are one-sided exponential (mean 1) times a
    uniform attenuation, so E[x^3] != 0.
    """
    rng = np.random.default_rng(cfg.rng_seed if seed is None else seed)
    n = cfg.n_samples
    present = rng.random(n) < cfg.reflector_density
    amplitudes = rng.exponential(1.0, n) * rng.uniform(*ATTENUATION_RANGE, n)
    samples = np.where(present, amplitudes, 0.0)
    return ReflectivitySeries(
        samples=samples,
        sample_rate_hz=cfg.sample_rate_hz,
        kind=SeriesKind.GROUND_TRUTH,
        id=id,
    )


def convolve_same(x: np.ndarray, pulse: Pulse) -> np.ndarray:
    """Linear convolution cut to len(x), pulse peak landing on each reflector"""
    full = np.convolve(x, pulse.samples)
    return full[pulse.alignment : pulse.alignment + x.size]


def generate_trace(
    pulse: Pulse,
    refl: ReflectivitySeries,
    snr_db: float = math.inf,
    seed: Seed = 0,
    id: str = "trace",
) -> RfTrace:
    """y = h * x + white Gaussian noise at the requested SNR

    SNR is referenced to the power of the noise-free convolution, so a zero
    reflectivity yields a zero trace at any SNR.
    """
    if pulse.sample_rate_hz != refl.sample_rate_hz:
        raise ValueError(
            f"sample rates differ: pulse {pulse.sample_rate_hz} Hz, "
            f"reflectivity {refl.sample_rate_hz} Hz"
        )

    clean = convolve_same(refl.samples, pulse)
    signal_power = float(np.mean(clean**2))

    if math.isinf(snr_db) or signal_power == 0.0:
        return RfTrace(samples=clean, sample_rate_hz=refl.sample_rate_hz, id=id)

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(clean.size)
    target = signal_power / 10 ** (snr_db / 10)
    noise *= math.sqrt(target / float(np.mean(noise**2)))
    return RfTrace(samples=clean + noise, sample_rate_hz=refl.sample_rate_hz, id=id)


def _line_id(index: int) -> str:
    return f"line_{index:03d}"


def _make_line(
    cfg: SynthConfig, pulse: Pulse, index: int, seeds: List[np.random.SeedSequence]
) -> Tuple[RfTrace, ReflectivitySeries]:
    refl_seed, noise_seed = seeds
    line_id = _line_id(index)
    refl = generate_reflectivity(cfg, seed=refl_seed, id=line_id)
    trace = generate_trace(pulse, refl, cfg.snr_db, seed=noise_seed, id=line_id)
    return trace, refl


def generate_dataset(
    cfg: SynthConfig,
    n_lines: int,
    out_dir: Union[str, Path],
    fmt: TraceFormat = TraceFormat.BINARY_F32LE,
    jobs: int = 1,
) -> DatasetManifest:
    """Write n_lines traces sharing one pulse, plus ground truth and a manifest"""
    from .. import __version__

    if n_lines < 1:
        raise ValueError("n_lines must be >= 1")

    out = Path(out_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    (out / "truth").mkdir(parents=True, exist_ok=True)

    pulse = generate_pulse(cfg)
    root = np.random.SeedSequence(cfg.rng_seed)
    line_seeds = [child.spawn(2) for child in root.spawn(n_lines)]

    logger.info("Generating %d synthetic lines (seed %d)", n_lines, cfg.rng_seed)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        lines = list(
            pool.map(
                lambda i: _make_line(cfg, pulse, i, line_seeds[i]), range(n_lines)
            )
        )

    suffix = ".csv" if fmt is TraceFormat.CSV else ".f32"
    trace_files: Dict[str, str] = {}
    truth_files: Dict[str, str] = {}
    for trace, refl in lines:
        trace_files[trace.id] = f"traces/{trace.id}{suffix}"
        truth_files[trace.id] = f"truth/{trace.id}{suffix}"
        save_series(trace, out / trace_files[trace.id], fmt)
        save_series(refl, out / truth_files[trace.id], fmt)
    save_series(pulse, out / f"pulse_true{suffix}", fmt)

    synth_record = {
        key: ("inf" if isinstance(value, float) and math.isinf(value) else value)
        for key, value in asdict(cfg).items()
    }
    manifest = DatasetManifest(
        trace_ids=list(trace_files),
        n_samples=cfg.n_samples,
        sample_rate_hz=cfg.sample_rate_hz,
        line_pitch_mm=cfg.line_pitch_mm,
        notes=(
            f"synthetic Gabor {cfg.center_freq_hz / 1e6:g} MHz, "
            f"{cfg.fractional_bandwidth:.0%} bandwidth, SNR {cfg.snr_db} dB"
        ),
        format=fmt.value,
        trace_files=trace_files,
        truth_files=truth_files,
        pulse_file=f"pulse_true{suffix}",
        rng_algorithm=RNG_ALGORITHM,
        rng_seed=cfg.rng_seed,
        synth=synth_record,
        generator_version=f"hosadecon {__version__}",
    )
    write_model(manifest, out / "manifest.json")
    logger.info("Dataset written to %s", out)
    return manifest
