"""
Artifact writers and parsers.

Curves and patterns go to CSV, structured reports to JSON. Output is byte-stable:
floats are written with 17 significant digits, JSON keys are sorted and every
file ends with a newline.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.analysis.summary import DensityMap, SummaryCurve
from src.models.pattern import PointPattern, Window
from src.validation.envelope import Envelope

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
MANIFEST_NAME = "manifest.json"

PathLike = Union[str, Path]


def _jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(data: Dict[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_jsonable(data), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    logger.debug("Wrote %s", path)
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_frame(df: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="")
    logger.debug("Wrote %s (%d rows)", path, len(df))
    return path


# --- typed writers / parsers -------------------------------------------------

def write_pattern_csv(pattern: PointPattern, path: PathLike, ids: Optional[Sequence[str]] = None) -> Path:
    """``id,x,y`` rows; readable by planar ingestion."""
    ids = list(ids) if ids is not None else [str(i) for i in range(pattern.n)]
    return write_frame(pd.DataFrame({"id": ids, "x": pattern.coords[:, 0], "y": pattern.coords[:, 1]}), path)


def read_pattern_csv(path: PathLike, window: Window) -> PointPattern:
    df = pd.read_csv(path)
    return PointPattern(df[["x", "y"]].to_numpy(float), window)


def write_curve_csv(curve: SummaryCurve, path: PathLike) -> Path:
    return write_frame(curve.to_frame(), path)


def read_curve_csv(path: PathLike, kind: str) -> SummaryCurve:
    df = pd.read_csv(path)
    ref = df["reference"].to_numpy(float) if "reference" in df.columns else None
    return SummaryCurve(df["grid"].to_numpy(float), df["value"].to_numpy(float), kind, reference=ref)


def write_envelope_csv(envelope: Envelope, path: PathLike, observed: Optional[SummaryCurve] = None) -> Path:
    return write_frame(envelope.to_frame(observed), path)


def read_envelope_csv(path: PathLike, nsim: int, nrank: int, kind: str) -> Envelope:
    df = pd.read_csv(path)
    return Envelope(df["grid"].to_numpy(float), df["lower"].to_numpy(float), df["upper"].to_numpy(float),
                    nsim, nrank, kind)


def write_density_csv(density: DensityMap, path: PathLike) -> Path:
    return write_frame(density.to_frame(), path)


# --- manifest ----------------------------------------------------------------

@dataclass
class RunManifest:
    """Completed stages and the files each produced; rewritten after every stage."""

    out_dir: Path
    seed: int
    config: Dict[str, Any] = field(default_factory=dict)
    stages: List[Dict[str, Any]] = field(default_factory=list)
    failed_stage: Optional[str] = None
    error: Optional[str] = None

    def record(self, stage: str, files: Sequence[Path]) -> None:
        rel = sorted(str(Path(f).relative_to(self.out_dir)) for f in files)
        self.stages.append({"stage": stage, "files": rel})
        self.write()

    def fail(self, stage: str, error: Exception) -> None:
        self.failed_stage = stage
        self.error = str(error)
        self.write()

    @property
    def completed(self) -> List[str]:
        return [s["stage"] for s in self.stages]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "config": self.config,
            "completed_stages": self.stages,
            "failed_stage": self.failed_stage,
            "error": self.error,
        }

    def write(self) -> Path:
        return write_json(self.to_dict(), self.out_dir / MANIFEST_NAME)
