"""
Data ingestion for base-station coordinate files.

Accepted CSV layouts (extra columns are ignored):
- geographic: header ``id,lon,lat`` in degrees, projected about the data centroid
- planar: header ``id,x,y`` in any consistent length unit
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.models.pattern import PointPattern, Window, rescale_to_unit
from src.utils.errors import ConfigError, IngestError
from src.utils.geo_utils import equirectangular_project, projection_distortion

logger = logging.getLogger(__name__)

# --- constants ---------------------------------------------------------------
MODE_COLUMNS = {
    "geographic": ("lon", "lat"),
    "planar": ("x", "y"),
}
FIRST_DATA_LINE = 2  # line 1 is the header
DISTORTION_WARN = 0.01


@dataclass(frozen=True)
class IngestReport:
    """What ingestion saw, next to the pattern it produced."""

    path: str
    mode: str
    n_records: int
    n_duplicates: int
    raw_window: Window
    normalized: bool
    distortion: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "mode": self.mode,
            "n_records": self.n_records,
            "n_duplicates": self.n_duplicates,
            "raw_window": self.raw_window.to_dict(),
            "normalized": self.normalized,
            "projection_distortion": self.distortion,
        }


def _line_of(row_index) -> int:
    return int(row_index) + FIRST_DATA_LINE


def load_station_records(csv_path: Union[str, Path], mode: str) -> pd.DataFrame:
    """
    Read and validate station records.

    Returns a frame with columns ``id``, the two coordinate columns of ``mode`` and
    ``line`` (1-based line number in the file). Raises IngestError naming every
    offending line.
    """
    if mode not in MODE_COLUMNS:
        raise ConfigError(f"mode must be one of {sorted(MODE_COLUMNS)}, got '{mode}'")
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise IngestError(f"Input file not found: {csv_path}")

    try:
        df = pd.read_csv(csv_path, dtype=str, skip_blank_lines=False, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise IngestError(f"Input file {csv_path} is empty") from None
    except pd.errors.ParserError as exc:
        lines = [int(m) for m in re.findall(r"line (\d+)", str(exc))]
        raise IngestError(f"Failed to parse {csv_path}: {exc}", line_numbers=lines) from None

    df.columns = [str(c).strip().lower() for c in df.columns]
    cx, cy = MODE_COLUMNS[mode]
    missing = [c for c in ("id", cx, cy) if c not in df.columns]
    if missing:
        raise IngestError(f"{csv_path}: header lacks {missing} for {mode} mode (found {list(df.columns)})",
                          line_numbers=[1])

    df = df[["id", cx, cy]].fillna("").copy()
    df["line"] = [_line_of(i) for i in range(len(df))]
    blank = (df[["id", cx, cy]].apply(lambda s: s.str.strip()) == "").all(axis=1)
    df = df[~blank]
    if df.empty:
        raise IngestError(f"Input file {csv_path} has no station records")

    for col in (cx, cy):
        df[col] = pd.to_numeric(df[col].str.strip(), errors="coerce")
    bad = ~np.isfinite(df[[cx, cy]].to_numpy(dtype=float)).all(axis=1)
    if mode == "geographic":
        bad |= ~df[cx].between(-180.0, 180.0) | ~df[cy].between(-90.0, 90.0)
    if bad.any():
        lines = df.loc[bad, "line"].tolist()
        raise IngestError(f"{csv_path}: {len(lines)} malformed row(s) at line(s) {lines}", line_numbers=lines)

    logger.info("Loaded %d station records from %s", len(df), csv_path)
    return df.reset_index(drop=True)


def station_coordinates(records: pd.DataFrame, mode: str) -> np.ndarray:
    """Planar (n, 2) coordinates; geographic records are projected to km."""
    cx, cy = MODE_COLUMNS[mode]
    if mode == "geographic":
        x, y = equirectangular_project(records[cx].to_numpy(float), records[cy].to_numpy(float))
        return np.column_stack([x, y])
    return records[[cx, cy]].to_numpy(float)


def count_duplicates(coords: np.ndarray) -> int:
    """Rows whose coordinates repeat an earlier row."""
    if len(coords) == 0:
        return 0
    return int(len(coords) - len(np.unique(coords, axis=0)))


def bounding_window(coords: np.ndarray, source: Union[str, Path] = "<coords>") -> Window:
    """
    Bounding box of the stations. When every station shares one coordinate the flat
    axis is widened, centred on the stations, to the extent of the other axis.
    """
    x_lo, y_lo = coords.min(axis=0)
    x_hi, y_hi = coords.max(axis=0)
    width, height = float(x_hi - x_lo), float(y_hi - y_lo)
    if width == 0 and height > 0:
        logger.warning("%s: all stations share x = %g; window widened to %g", source, x_lo, height)
        x_lo, x_hi = x_lo - height / 2, x_hi + height / 2
    elif height == 0 and width > 0:
        logger.warning("%s: all stations share y = %g; window widened to %g", source, y_lo, width)
        y_lo, y_hi = y_lo - width / 2, y_hi + width / 2
    return Window(float(x_lo), float(x_hi), float(y_lo), float(y_hi))


def ingest_with_report(csv_path: Union[str, Path], mode: str, normalize: bool = False) -> Tuple[PointPattern, IngestReport]:
    records = load_station_records(csv_path, mode)
    coords = station_coordinates(records, mode)
    n_dup = count_duplicates(coords)
    if n_dup:
        logger.warning("%d duplicate station coordinate(s) kept in %s", n_dup, csv_path)

    distortion = None
    if mode == "geographic":
        lon, lat = records["lon"], records["lat"]
        # diagonal of the bounding box, projected vs great-circle
        distortion = projection_distortion(lat.min(), lon.min(), lat.max(), lon.max())
        if distortion > DISTORTION_WARN:
            logger.warning("Equirectangular projection distorts the extent of %s by %.1f%%", csv_path, 100 * distortion)

    window = bounding_window(coords, csv_path)
    pattern = PointPattern(coords, window)
    if normalize:
        pattern = rescale_to_unit(pattern)
    report = IngestReport(str(csv_path), mode, pattern.n, n_dup, window, normalize, distortion)
    return pattern, report


def ingest(csv_path: Union[str, Path], mode: str, normalize: bool = False) -> PointPattern:
    """
    Load a station file as a point pattern on its bounding-box window, optionally
    rescaled to the unit square.
    """
    return ingest_with_report(csv_path, mode, normalize)[0]

