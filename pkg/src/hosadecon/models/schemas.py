"""
Pydantic schemas for sidecars, manifests and JSON reports
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class BaseSchema(BaseModel):
    """Base schema with common settings"""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")


class SeriesHeader(BaseSchema):
    """JSON sidecar written next to every series file"""

    series_type: str = Field(pattern="^(trace|pulse|reflectivity)$")
    id: str
    sample_rate_hz: float = Field(gt=0)
    length: int = Field(ge=1)
    alignment: Optional[int] = None
    energy_normalized: Optional[bool] = None
    kind: Optional[str] = None


class DatasetManifest(BaseSchema):
    """Corpus description: which traces exist and how they were sampled"""

    trace_ids: List[str] = Field(min_length=1)
    n_samples: int = Field(ge=1)
    sample_rate_hz: float = Field(gt=0)
    line_pitch_mm: float = Field(default=0.0, ge=0)
    notes: str = ""
    format: str = "binary_f32le"
    trace_files: Dict[str, str]
    truth_files: Dict[str, str] = Field(default_factory=dict)
    pulse_file: Optional[str] = None
    rng_algorithm: Optional[str] = None
    rng_seed: Optional[int] = None
    synth: Optional[Dict[str, object]] = None
    generator_version: str = ""

    @model_validator(mode="after")
    def _files_cover_ids(self) -> "DatasetManifest":
        missing = [tid for tid in self.trace_ids if tid not in self.trace_files]
        if missing:
            raise ValueError(f"trace_files missing ids: {missing}")
        return self


class PulseQualityReport(BaseSchema):
    """Diagnostics accompanying every blind pulse estimate"""

    ensemble_size: int
    max_lag: int
    fft_size: int
    segment_len: int
    n_segments: int
    lag_window: bool
    floor_eps: float
    magnitude_source: str
    unwrap_residue: float
    imaginary_residue: float
    floored_fraction: float
    linear_phase_removed: List[int]
    energy_fraction: float
    noise_sigma2: float
    flagged: bool
    ncc_vs_truth: Optional[float] = None


class WienerLog(BaseSchema):
    """Per-trace record of the iterative Wiener filter"""

    alpha: float
    sigma2: float
    iterations: int
    fft_size: int
    seed_mode: str = "regularized_inverse_periodogram"
    smoothing_bins: int
    reflectivity_power: float
    residual_energy: List[float]


class LevelLog(BaseSchema):
    """Shrinkage record of one detail level"""

    level: int
    n_coefficients: int
    sigma_threshold_pass: float
    threshold: float
    survivors: int
    sigma_gain_pass: float
    mean_gain: float


class ShrinkageLog(BaseSchema):
    """Per-trace record of the wavelet-domain stage"""

    threshold_family: str
    gain_family: str
    levels: List[LevelLog]
    sigma_approx: float
    padded_length: int


class ResolutionReport(BaseSchema):
    """Axial-resolution gain of a batch"""

    lobe_width_before: float = Field(gt=0)
    lobe_width_after: float = Field(gt=0)
    gain: float
    trace_ids: List[str] = Field(default_factory=list)
    per_trace_gains: List[float]
    gain_mean: float
    gain_std: float
    drop_db: float = -6.0


class LineLog(BaseSchema):
    """Everything the deconvolve stage records about one line"""

    trace_id: str
    pulse_source: str
    wiener: WienerLog
    shrinkage: ShrinkageLog
    relative_error: Optional[Dict[str, float]] = None


class LineFailure(BaseSchema):
    trace_id: str
    error: str
