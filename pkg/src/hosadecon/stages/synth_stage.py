"""
Synthetic dataset stage
"""

import logging
from pathlib import Path
from typing import Any, Dict

from ..dsp.synth import generate_dataset
from .base_stage import BaseStage

logger = logging.getLogger(__name__)


class SynthStage(BaseStage):
    """Writes the synthetic dataset next to the configured manifest"""

    name = "synth"

    @property
    def output_dir(self) -> Path:
        return self.config.manifest_path.parent

    def should_run(self) -> bool:
        return self.config.run_synth

    def run(self) -> Dict[str, Any]:
        out = self.prepare_output()
        manifest = generate_dataset(
            self.config.synth,
            self.config.n_lines,
            out,
            fmt=self.config.trace_format,
            jobs=self.config.jobs,
        )
        return {
            "dataset_dir": str(out),
            "n_lines": len(manifest.trace_ids),
            "rng_seed": manifest.rng_seed,
        }
