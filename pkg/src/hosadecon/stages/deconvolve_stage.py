"""
Per-line deconvolution stage: x1 and x~ for every trace of the manifest
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from ..core.errors import ConfigError
from ..dsp.deconvolve import run_forward_deconvolve
from ..dsp.metrics import relative_l2_error
from ..dsp.wiener import naive_inverse
from ..io.trace_io import (
    load_manifest_trace,
    load_pulse,
    load_reflectivity,
    resolve_manifest_path,
    save_series,
)
from ..models.schemas import DatasetManifest, LineFailure, LineLog
from ..models.series import Pulse
from .base_stage import ESTIMATES_DIR, LINE_ERRORS, BaseStage

logger = logging.getLogger(__name__)

LineOutcome = Union[LineLog, LineFailure]


class DeconvolveStage(BaseStage):
    """Fourier-wavelet deconvolution of every line with one shared pulse"""

    name = ESTIMATES_DIR

    def _pulse(self, manifest_path: Path, manifest: DatasetManifest) -> Pulse:
        if self.config.use_true_pulse:
            if not manifest.pulse_file:
                raise ConfigError("--use-true-pulse needs a manifest with pulse_file")
            path = resolve_manifest_path(manifest_path, manifest.pulse_file)
            return load_pulse(path, manifest.format)
        if not self.pulse_path.exists():
            raise ConfigError(
                f"no estimated pulse at {self.pulse_path}; run estimate-pulse first"
            )
        return load_pulse(self.pulse_path)

    def run(self) -> Dict[str, Any]:
        manifest_path, manifest = self.load_manifest()
        pulse = self._pulse(manifest_path, manifest)
        self.prepare_output()
        source = "true" if self.config.use_true_pulse else "estimated"
        logger.info(
            "Deconvolving %d lines with the %s pulse", len(manifest.trace_ids), source
        )

        def process(trace_id: str) -> LineOutcome:
            try:
                return self._process_line(
                    manifest_path, manifest, trace_id, pulse, source
                )
            except LINE_ERRORS as exc:
                return self.failure(trace_id, exc)

        outcomes = self.map_lines(process, manifest.trace_ids)
        logs = [o for o in outcomes if isinstance(o, LineLog)]
        failures = [o for o in outcomes if isinstance(o, LineFailure)]

        summary: Dict[str, Any] = {
            "pulse_source": source,
            "processed": [log.trace_id for log in logs],
            "failures": [f.model_dump() for f in failures],
        }
        summary.update(_error_summary(logs))
        self.write_json("summary.json", summary)
        return summary

    def _process_line(
        self,
        manifest_path: Path,
        manifest: DatasetManifest,
        trace_id: str,
        pulse: Pulse,
        source: str,
    ) -> LineLog:
        trace = load_manifest_trace(manifest_path, manifest, trace_id)
        result = run_forward_deconvolve(
            trace, pulse, self.config.wavelet, self.config.wiener
        )
        save_series(result.x1, self.estimate_path(trace_id, "x1"))
        save_series(result.estimate, self.estimate_path(trace_id, "xt"))

        errors: Optional[Dict[str, float]] = None
        if trace_id in manifest.truth_files:
            truth = load_reflectivity(
                resolve_manifest_path(manifest_path, manifest.truth_files[trace_id]),
                manifest.format,
            )
            naive = naive_inverse(trace, pulse, self.config.wiener.fft_size)
            errors = {
                "naive": relative_l2_error(naive, truth),
                "x1": relative_l2_error(result.x1, truth),
                "x_tilde": relative_l2_error(result.estimate, truth),
            }

        log = LineLog(
            trace_id=trace_id,
            pulse_source=source,
            wiener=result.wiener.log,
            shrinkage=result.log,
            relative_error=errors,
        )
        self.write_model(f"logs/{trace_id}.json", log)
        return log


def _error_summary(logs: List[LineLog]) -> Dict[str, Any]:
    """Mean errors and the share of lines where each stage improves on the last"""
    scored = [log.relative_error for log in logs if log.relative_error]
    if not scored:
        return {}
    keys = ("naive", "x1", "x_tilde")
    ordered = [e["x_tilde"] < e["x1"] < e["naive"] for e in scored]
    return {
        "relative_error_mean": {
            key: float(np.mean([e[key] for e in scored])) for key in keys
        },
        "denoising_benefit_fraction": float(np.mean(ordered)),
    }
