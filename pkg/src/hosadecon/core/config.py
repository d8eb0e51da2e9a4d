"""
Configuration classes and enums for hosadecon
"""

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ConfigError

# Configure logging
logger = logging.getLogger(__name__)


class TraceFormat(Enum):
    """On-disk series formats"""

    BINARY_F32LE = "binary_f32le"
    CSV = "csv"


class SeriesKind(Enum):
    """Provenance of a reflectivity series"""

    GROUND_TRUTH = "ground_truth"
    WIENER_ESTIMATE = "wiener_estimate"
    WAVELET_ESTIMATE = "wavelet_estimate"
    NAIVE_ESTIMATE = "naive_estimate"


class WaveletFamily(Enum):
    """Daubechies families, named by taps/2"""

    DB10 = "db10"
    DB16 = "db16"


class ThresholdRule(Enum):
    """Threshold selection for the denoising pass"""

    UNIVERSAL = "universal"
    NONE = "none"


class MagnitudeSource(Enum):
    """Where the estimated pulse takes its spectral magnitude from"""

    POWER_SPECTRUM = "power_spectrum"
    BICEPSTRUM = "bicepstrum"


def _coerce_enum(value: Any, enum_type: type) -> Any:
    if isinstance(value, enum_type):
        return value
    try:
        return enum_type(value)
    except ValueError:
        choices = ", ".join(member.value for member in enum_type)  # type: ignore
        raise ConfigError(f"invalid {enum_type.__name__} '{value}' (choose: {choices})")


def _coerce_float(value: Any) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    return float(value)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass
class SynthConfig:
    """Parameters of the synthetic reference dataset"""

    center_freq_hz: float = 3.5e6
    fractional_bandwidth: float = 0.5
    sample_rate_hz: float = 50e6
    n_samples: int = 8192
    reflector_density: float = 0.02
    snr_db: float = 10.0
    rng_seed: int = 0
    pulse_len: int = 128
    line_pitch_mm: float = 0.25

    def __post_init__(self):
        """Validate configuration after initialization"""
        self.snr_db = _coerce_float(self.snr_db)

        if self.center_freq_hz <= 0:
            raise ConfigError("center_freq_hz must be > 0")
        if not 0 < self.fractional_bandwidth <= 1:
            raise ConfigError("fractional_bandwidth must be in (0, 1]")
        nyquist_floor = 2 * self.center_freq_hz * (1 + self.fractional_bandwidth)
        if self.sample_rate_hz <= nyquist_floor:
            raise ConfigError(
                f"sample_rate_hz must exceed {nyquist_floor:g} Hz for this pulse"
            )
        if self.n_samples < 64:
            raise ConfigError("n_samples must be >= 64")
        if not 0 <= self.reflector_density < 1:
            raise ConfigError("reflector_density must be in [0, 1)")
        if self.pulse_len < 2:
            raise ConfigError("pulse_len must be >= 2")
        if self.line_pitch_mm < 0:
            raise ConfigError("line_pitch_mm must be >= 0")


@dataclass
class HosaOptions:
    """Options of the bicepstrum pulse estimator"""

    max_lag: int = 64
    fft_size: int = 256
    pulse_len: int = 64
    ensemble: int = 16
    segment_len: int = 1024
    lag_window: bool = True
    floor_eps: float = 0.1
    energy_fraction: float = 0.99
    magnitude_source: MagnitudeSource = MagnitudeSource.POWER_SPECTRUM
    unwrap_tolerance: float = 0.05
    imag_tolerance: float = 1e-6

    def __post_init__(self):
        """Validate configuration after initialization"""
        self.magnitude_source = _coerce_enum(self.magnitude_source, MagnitudeSource)

        if self.max_lag < 1:
            raise ConfigError("max_lag must be >= 1")
        if self.fft_size % 2 or self.fft_size < 2 * self.max_lag + 1:
            raise ConfigError("fft_size must be even and >= 2*max_lag+1")
        if self.segment_len <= 2 * self.max_lag:
            raise ConfigError("segment_len must exceed 2*max_lag")
        if not 1 <= self.pulse_len <= self.fft_size:
            raise ConfigError("pulse_len must be in [1, fft_size]")
        if self.ensemble < 1:
            raise ConfigError("ensemble must be >= 1")
        if not 0 < self.floor_eps < 1:
            raise ConfigError("floor_eps must be in (0, 1)")
        if not 0 < self.energy_fraction <= 1:
            raise ConfigError("energy_fraction must be in (0, 1]")


@dataclass
class WienerConfig:
    """Options of the Fourier-domain iterative Wiener filter"""

    alpha: float = 0.01
    iterations: int = 10
    fft_size: Optional[int] = None
    smoothing_bins: int = 5
    q_mode: str = "alpha_sigma2_over_Px"

    def __post_init__(self):
        """Validate configuration after initialization"""
        if self.alpha <= 0:
            raise ConfigError("alpha must be > 0")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.fft_size is not None and not _is_power_of_two(self.fft_size):
            raise ConfigError("fft_size must be a power of two")
        if self.smoothing_bins < 1:
            raise ConfigError("smoothing_bins must be >= 1")
        if self.q_mode != "alpha_sigma2_over_Px":
            raise ConfigError("q_mode is fixed to 'alpha_sigma2_over_Px'")


@dataclass
class WaveletConfig:
    """Options of the wavelet-domain shrinkage stage"""

    threshold_family: WaveletFamily = WaveletFamily.DB16
    gain_family: WaveletFamily = WaveletFamily.DB10
    levels: int = 5
    threshold_rule: ThresholdRule = ThresholdRule.UNIVERSAL

    def __post_init__(self):
        """Validate configuration after initialization"""
        self.threshold_family = _coerce_enum(self.threshold_family, WaveletFamily)
        self.gain_family = _coerce_enum(self.gain_family, WaveletFamily)
        self.threshold_rule = _coerce_enum(self.threshold_rule, ThresholdRule)
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")


@dataclass
class MetricsOptions:
    """Options of the resolution metrics"""

    drop_db: float = -6.0
    max_lag: int = 60
    window: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        """Validate configuration after initialization"""
        if self.drop_db >= 0:
            raise ConfigError("drop_db must be negative")
        if self.max_lag < 1:
            raise ConfigError("max_lag must be >= 1")
        if self.window is not None:
            start, stop = (int(v) for v in self.window)
            if start < 0 or stop - start < 16:
                raise ConfigError("window must be (start, stop) spanning >= 16 samples")
            self.window = (start, stop)


_SECTIONS = {
    "synth": SynthConfig,
    "hosa": HosaOptions,
    "wiener": WienerConfig,
    "wavelet": WaveletConfig,
    "metrics": MetricsOptions,
}


@dataclass
class PipelineConfig:
    """Configuration of a full processing run"""

    output_dir: str
    manifest: Optional[str] = None
    synth: SynthConfig = field(default_factory=SynthConfig)
    hosa: HosaOptions = field(default_factory=HosaOptions)
    wiener: WienerConfig = field(default_factory=WienerConfig)
    wavelet: WaveletConfig = field(default_factory=WaveletConfig)
    metrics: MetricsOptions = field(default_factory=MetricsOptions)
    n_lines: int = 30
    seed: Optional[int] = None
    jobs: int = 1
    use_true_pulse: bool = False
    run_synth: bool = True
    trace_format: TraceFormat = TraceFormat.BINARY_F32LE

    def __post_init__(self):
        """Validate configuration after initialization"""
        if not self.output_dir:
            raise ConfigError("output_dir cannot be empty")
        if self.n_lines < 1:
            raise ConfigError("n_lines must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        self.trace_format = _coerce_enum(self.trace_format, TraceFormat)
        if self.seed is not None:
            self.synth.rng_seed = int(self.seed)

    @property
    def manifest_path(self) -> Path:
        """Manifest read by the processing stages"""
        if self.manifest:
            return Path(self.manifest)
        return Path(self.output_dir) / "dataset" / "manifest.json"

    def validate_paths(self) -> None:
        """Check that referenced inputs exist (called before processing stages)"""
        if not self.run_synth and not self.manifest_path.exists():
            raise ConfigError(f"manifest not found: {self.manifest_path}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PipelineConfig":
        """Build a config from a nested mapping, e.g. a parsed config file"""
        data = dict(data)
        kwargs: Dict[str, Any] = {}
        for name, section_type in _SECTIONS.items():
            section = data.pop(name, None) or {}
            if not isinstance(section, dict):
                raise ConfigError(f"section '{name}' must be a mapping")
            known = {f.name for f in fields(section_type)}
            unknown = set(section) - known
            if unknown:
                raise ConfigError(f"unknown keys in '{name}': {sorted(unknown)}")
            if name == "metrics" and section.get("window") is not None:
                section = {**section, "window": tuple(section["window"])}
            kwargs[name] = section_type(**section)

        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs.update(data)
        if "output_dir" not in kwargs:
            kwargs["output_dir"] = Settings().output_root
        logger.debug("Resolved config sections: %s", sorted(kwargs))
        return cls(**kwargs)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready mapping of the fully resolved config"""
        return _jsonable(asdict(self))


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


class Settings(BaseSettings):
    """Environment defaults (HOSADECON_ prefix)"""

    model_config = SettingsConfigDict(env_prefix="HOSADECON_")

    output_root: str = "hosadecon-out"
    log_level: str = "INFO"


def resolve_value(flag: Union[Any, None], configured: Any) -> Any:
    """CLI flag wins over the configured value when given"""
    return configured if flag is None else flag
