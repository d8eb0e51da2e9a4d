"""
Series file formats

Binary: little-endian float32 payload `<name>.f32`.
CSV: `<name>.csv` with header `index,amplitude`, one sample per row.
Both formats carry a JSON sidecar `<name>.json` (see SeriesHeader).
"""

import json
import logging
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from ..core.config import SeriesKind, TraceFormat
from ..core.errors import ConfigError, TraceFormatError
from ..models.schemas import DatasetManifest, SeriesHeader
from ..models.series import Pulse, ReflectivitySeries, RfTrace, Series

logger = logging.getLogger(__name__)

CSV_HEADER = "index,amplitude"
_SUFFIX = {TraceFormat.BINARY_F32LE: ".f32", TraceFormat.CSV: ".csv"}
PathLike = Union[str, Path]


def _resolve_format(path: Path, fmt: Optional[Union[TraceFormat, str]]) -> TraceFormat:
    if fmt is not None:
        return fmt if isinstance(fmt, TraceFormat) else TraceFormat(fmt)
    if path.suffix == ".csv":
        return TraceFormat.CSV
    return TraceFormat.BINARY_F32LE


def data_path(path: PathLike, fmt: Optional[Union[TraceFormat, str]] = None) -> Path:
    """Payload file for a series path given with or without extension"""
    path = Path(path)
    return path.with_suffix(_SUFFIX[_resolve_format(path, fmt)])


def sidecar_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".json")


def _header_for(series: Series) -> SeriesHeader:
    if isinstance(series, Pulse):
        return SeriesHeader(
            series_type="pulse",
            id="pulse",
            sample_rate_hz=series.sample_rate_hz,
            length=len(series),
            alignment=series.alignment,
            energy_normalized=series.energy_normalized,
        )
    if isinstance(series, ReflectivitySeries):
        return SeriesHeader(
            series_type="reflectivity",
            id=series.id,
            sample_rate_hz=series.sample_rate_hz,
            length=len(series),
            kind=series.kind.value,
        )
    return SeriesHeader(
        series_type="trace",
        id=series.id,
        sample_rate_hz=series.sample_rate_hz,
        length=len(series),
    )


def save_series(
    series: Series, path: PathLike, fmt: Optional[Union[TraceFormat, str]] = None
) -> Path:
    """Write a series payload and its sidecar; returns the payload path"""
    path = Path(path)
    fmt = _resolve_format(path, fmt)
    target = data_path(path, fmt)

    if fmt is TraceFormat.BINARY_F32LE:
        series.samples.astype("<f4").tofile(target)
    else:
        rows = [CSV_HEADER]
        rows.extend(
            f"{i},{value!r}" for i, value in enumerate(series.samples.tolist())
        )
        target.write_text("\n".join(rows) + "\n", encoding="utf-8")

    write_model(_header_for(series), sidecar_path(path))
    logger.debug(
        "Saved %s (%d samples) to %s", type(series).__name__, len(series), target
    )
    return target


def _read_header(path: Path) -> SeriesHeader:
    side = sidecar_path(path)
    try:
        return SeriesHeader.model_validate_json(side.read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise TraceFormatError(f"malformed sidecar {side}: {exc}") from exc


def _read_payload(path: Path, fmt: TraceFormat) -> np.ndarray:
    target = data_path(path, fmt)
    if fmt is TraceFormat.BINARY_F32LE:
        return np.fromfile(target, dtype="<f4").astype(np.float64)

    with open(target, "r", encoding="utf-8") as handle:
        header = handle.readline().strip()
        if header != CSV_HEADER:
            raise TraceFormatError(f"{target}: expected header '{CSV_HEADER}'")
        try:
            table = np.loadtxt(handle, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise TraceFormatError(f"{target}: {exc}") from exc
    if table.size == 0:
        return np.zeros(0)
    if table.shape[1] != 2:
        raise TraceFormatError(f"{target}: expected two columns")
    return table[:, 1]


def _load(path: PathLike, fmt: Optional[Union[TraceFormat, str]], expected: str):
    path = Path(path)
    fmt = _resolve_format(path, fmt)
    header = _read_header(path)
    if header.series_type != expected:
        raise TraceFormatError(
            f"{path}: sidecar describes a {header.series_type}, not a {expected}"
        )
    samples = _read_payload(path, fmt)
    if samples.size != header.length:
        raise TraceFormatError(
            f"{path}: sidecar length {header.length} != payload length {samples.size}"
        )
    bad = np.flatnonzero(~np.isfinite(samples))
    if bad.size:
        raise TraceFormatError(
            f"{path}: non-finite sample at index {int(bad[0])}", index=int(bad[0])
        )
    return header, samples


def load_trace(
    path: PathLike, fmt: Optional[Union[TraceFormat, str]] = None
) -> RfTrace:
    """Read an RF trace; sample rate and id come from the sidecar"""
    header, samples = _load(path, fmt, "trace")
    return RfTrace(samples=samples, sample_rate_hz=header.sample_rate_hz, id=header.id)


def load_pulse(path: PathLike, fmt: Optional[Union[TraceFormat, str]] = None) -> Pulse:
    header, samples = _load(path, fmt, "pulse")
    return Pulse(
        samples=samples,
        sample_rate_hz=header.sample_rate_hz,
        alignment=header.alignment or 0,
        energy_normalized=bool(header.energy_normalized),
    )


def load_reflectivity(
    path: PathLike, fmt: Optional[Union[TraceFormat, str]] = None
) -> ReflectivitySeries:
    header, samples = _load(path, fmt, "reflectivity")
    return ReflectivitySeries(
        samples=samples,
        sample_rate_hz=header.sample_rate_hz,
        kind=SeriesKind(header.kind or SeriesKind.GROUND_TRUTH.value),
        id=header.id,
    )


def write_model(model: BaseModel, path: PathLike) -> Path:
    """Write a pydantic model as indented JSON"""
    path = Path(path)
    path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def write_json(data: Any, path: PathLike) -> Path:
    """Write plain data as deterministic JSON"""
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_manifest(path: PathLike) -> DatasetManifest:
    """Read a dataset manifest; an empty trace list is a usage error"""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"manifest not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest is not valid JSON: {exc}") from exc
    if not raw.get("trace_ids"):
        raise ConfigError("no traces")
    try:
        return DatasetManifest.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid manifest {path}: {exc}") from exc


def resolve_manifest_path(manifest_path: PathLike, relative: str) -> Path:
    """Files in a manifest are relative to the manifest's directory"""
    return Path(manifest_path).parent / relative


def load_manifest_trace(
    manifest_path: PathLike, manifest: DatasetManifest, trace_id: str
) -> RfTrace:
    """Load one referenced trace and check it against the manifest"""
    path = resolve_manifest_path(manifest_path, manifest.trace_files[trace_id])
    trace = load_trace(path, manifest.format)
    if len(trace) != manifest.n_samples:
        raise TraceFormatError(
            f"trace '{trace_id}' has {len(trace)} samples, "
            f"manifest says {manifest.n_samples}"
        )
    return trace
