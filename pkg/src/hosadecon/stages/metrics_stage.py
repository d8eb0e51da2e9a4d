"""
Resolution metrics stage: batch gain report and per-line autocovariance curves
"""

import logging
from typing import Any, Dict, List, Tuple

import numpy as np

from ..core.errors import EstimationError
from ..dsp.metrics import acov_curves, batch_resolution_stats
from ..io.trace_io import load_manifest_trace, load_reflectivity
from ..models.series import ReflectivitySeries, RfTrace
from .base_stage import LINE_ERRORS, METRICS_DIR, BaseStage

logger = logging.getLogger(__name__)

ACOV_HEADER = "lag,acov_before,acov_after"


class MetricsStage(BaseStage):
    """Compares raw traces with their wavelet-domain estimates"""

    name = METRICS_DIR

    def run(self) -> Dict[str, Any]:
        manifest_path, manifest = self.load_manifest()
        self.prepare_output()
        opts = self.config.metrics

        pairs: List[Tuple[RfTrace, ReflectivitySeries]] = []
        failures = []
        for trace_id in manifest.trace_ids:
            try:
                trace = load_manifest_trace(manifest_path, manifest, trace_id)
                estimate = load_reflectivity(self.estimate_path(trace_id, "xt"))
                curves = acov_curves(trace, estimate, opts.max_lag, opts.window)
            except LINE_ERRORS as exc:
                failures.append(self.failure(trace_id, exc).model_dump())
                continue
            self._write_curves(trace_id, curves)
            pairs.append((trace, estimate))

        if len(pairs) < 2:
            raise EstimationError(
                f"resolution statistics need 2 deconvolved lines, found {len(pairs)}"
            )
        report = batch_resolution_stats(
            pairs,
            drop_db=opts.drop_db,
            window=opts.window,
            trace_ids=[trace.id for trace, _ in pairs],
        )
        self.write_model("resolution.json", report)
        logger.info(
            "Resolution gain %.2f +/- %.2f", report.gain_mean, report.gain_std
        )
        return {
            "lobe_width_before": report.lobe_width_before,
            "lobe_width_after": report.lobe_width_after,
            "gain_mean": report.gain_mean,
            "gain_std": report.gain_std,
            "n_lines": len(pairs),
            "failures": failures,
        }

    def _write_curves(self, trace_id: str, curves: np.ndarray) -> None:
        path = self.output_dir / "acov" / f"{trace_id}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        rows = [ACOV_HEADER]
        rows.extend(
            f"{int(lag)},{before!r},{after!r}"
            for lag, before, after in curves.tolist()
        )
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
