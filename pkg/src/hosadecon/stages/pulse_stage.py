"""
Blind pulse estimation stage
"""

import logging
from typing import Any, Dict

from ..dsp.hosa import run_estimate_pulse
from ..io.trace_io import (
    load_manifest_trace,
    load_pulse,
    resolve_manifest_path,
    save_series,
)
from .base_stage import PULSE_DIR, PULSE_STEM, BaseStage

logger = logging.getLogger(__name__)


class PulseStage(BaseStage):
    """Estimates the pulse from the first `ensemble` traces of the manifest"""

    name = PULSE_DIR

    def should_run(self) -> bool:
        # the ablation run deconvolves with the stored pulse instead
        return not self.config.use_true_pulse

    def run(self) -> Dict[str, Any]:
        manifest_path, manifest = self.load_manifest()
        out = self.prepare_output()

        ids = manifest.trace_ids[: self.config.hosa.ensemble]
        traces = [load_manifest_trace(manifest_path, manifest, tid) for tid in ids]
        truth = None
        if manifest.pulse_file:
            truth = load_pulse(
                resolve_manifest_path(manifest_path, manifest.pulse_file),
                manifest.format,
            )

        estimate = run_estimate_pulse(traces, self.config.hosa, truth=truth)
        pulse_file = save_series(
            estimate.pulse, out / PULSE_STEM, self.config.trace_format
        )
        self.write_model("quality.json", estimate.quality)
        if estimate.quality.ncc_vs_truth is not None:
            logger.info("Pulse NCC vs truth: %.4f", estimate.quality.ncc_vs_truth)

        return {
            "pulse_file": str(pulse_file),
            "ensemble_size": estimate.quality.ensemble_size,
            "flagged": estimate.quality.flagged,
            "ncc_vs_truth": estimate.quality.ncc_vs_truth,
        }
