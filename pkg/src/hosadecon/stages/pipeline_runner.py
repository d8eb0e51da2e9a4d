"""
Pipeline Runner
Orchestrates the four processing steps: synthesis, pulse estimation,
deconvolution and resolution metrics
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from ..core.config import PipelineConfig
from ..core.errors import ConfigError, HosaDeconError, StageError
from ..io.trace_io import write_json
from .base_stage import BaseStage

logger = logging.getLogger(__name__)

STAGE_ORDER = ("synth", "estimate-pulse", "deconvolve", "metrics")


class PipelineRunner:
    """Runs the configured stages in order and writes the run summary"""

    def __init__(
        self, config: PipelineConfig, stages: Optional[Sequence[str]] = None
    ):
        self.config = config
        unknown = set(stages or ()) - set(STAGE_ORDER)
        if unknown:
            raise ConfigError(f"unknown stages: {sorted(unknown)}")
        self.selected = [s for s in STAGE_ORDER if stages is None or s in stages]
        self._setup_stages()

    def _setup_stages(self):
        """Initialize the selected stages"""
        # Import stages here to avoid circular imports
        from .deconvolve_stage import DeconvolveStage
        from .metrics_stage import MetricsStage
        from .pulse_stage import PulseStage
        from .synth_stage import SynthStage

        available = {
            "synth": SynthStage,
            "estimate-pulse": PulseStage,
            "deconvolve": DeconvolveStage,
            "metrics": MetricsStage,
        }
        self.stages: Dict[str, BaseStage] = {
            name: available[name](self.config) for name in self.selected
        }

    def run(self) -> Dict[str, Any]:
        """Run every selected stage; the first stage-level failure stops the run"""
        results: Dict[str, Any] = {}
        for name, stage in self.stages.items():
            if not stage.should_run():
                logger.info("Skipping %s", name)
                continue
            if name != "synth":
                self.config.validate_paths()
            logger.info("Running %s stage...", name)
            try:
                results[name] = stage.run()
            except ConfigError as e:
                raise ConfigError(f"stage '{name}': {e}") from e
            except (HosaDeconError, OSError) as e:
                logger.error("Stage %s failed: %s", name, e)
                raise StageError(name, str(e)) from e

        summary = self.get_run_summary(results)
        if len(self.selected) > 1:
            root = Path(self.config.output_dir)
            root.mkdir(parents=True, exist_ok=True)
            write_json(summary, root / "summary.json")
        return summary

    def get_run_summary(self, results: Dict[str, Any]) -> Dict[str, Any]:
        """Summary of what ran, without timestamps so reruns compare equal"""
        from .. import __version__

        metrics = results.get("metrics", {})
        pulse = results.get("estimate-pulse", {})
        return {
            "version": __version__,
            "output_dir": self.config.output_dir,
            "seed": self.config.synth.rng_seed,
            "stages_run": list(results),
            "pulse_ncc_vs_truth": pulse.get("ncc_vs_truth"),
            "gain_mean": metrics.get("gain_mean"),
            "gain_std": metrics.get("gain_std"),
            "stages": results,
        }
