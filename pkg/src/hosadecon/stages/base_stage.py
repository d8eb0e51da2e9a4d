"""
Base Stage Class
Provides common functionality for all pipeline stages
"""

import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Tuple, TypeVar

from pydantic import BaseModel

from ..core.config import PipelineConfig
from ..core.errors import HosaDeconError
from ..io.trace_io import data_path, load_manifest, write_json, write_model
from ..models.schemas import DatasetManifest, LineFailure

logger = logging.getLogger(__name__)

PULSE_DIR = "pulse"
ESTIMATES_DIR = "estimates"
METRICS_DIR = "metrics"
PULSE_STEM = "pulse_est"
RESOLVED_CONFIG = "resolved_config.json"

# Per-line errors that are recorded instead of aborting a batch
LINE_ERRORS = (HosaDeconError, OSError, ValueError)

T = TypeVar("T")
R = TypeVar("R")


class BaseStage(ABC):
    """Base class for all pipeline stages"""

    name = "stage"

    def __init__(self, config: PipelineConfig):
        self.config = config

    @property
    def root(self) -> Path:
        return Path(self.config.output_dir)

    @property
    def output_dir(self) -> Path:
        """Directory this stage writes into"""
        return self.root / self.name

    @property
    def pulse_path(self) -> Path:
        """Estimated pulse written by the estimate-pulse stage"""
        return data_path(self.root / PULSE_DIR / PULSE_STEM, self.config.trace_format)

    def estimate_path(self, trace_id: str, suffix: str) -> Path:
        return data_path(
            self.root / ESTIMATES_DIR / f"{trace_id}_{suffix}", self.config.trace_format
        )

    def should_run(self) -> bool:
        """Determine if this stage should run based on configuration"""
        return True

    @abstractmethod
    def run(self) -> Dict[str, Any]:
        """Run the stage and return its summary"""

    def prepare_output(self) -> Path:
        """Create the output directory and echo the resolved config into it"""
        out = self.output_dir
        out.mkdir(parents=True, exist_ok=True)
        write_json(self.config.to_dict(), out / RESOLVED_CONFIG)
        return out

    def write_json(self, relative: str, data: Any) -> Path:
        """Write plain data below the output directory"""
        path = self.output_dir / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        return write_json(data, path)

    def write_model(self, relative: str, model: BaseModel) -> Path:
        """Write a pydantic model below the output directory"""
        path = self.output_dir / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        return write_model(model, path)

    def load_manifest(self) -> Tuple[Path, DatasetManifest]:
        path = self.config.manifest_path
        return path, load_manifest(path)

    def map_lines(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """Apply fn to every item on `jobs` threads; results keep input order"""
        items = list(items)
        if self.config.jobs == 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
            return list(pool.map(fn, items))

    def failure(self, trace_id: str, exc: BaseException) -> LineFailure:
        logger.error("%s: line %s failed: %s", self.name, trace_id, exc)
        return LineFailure(trace_id=trace_id, error=f"{type(exc).__name__}: {exc}")
