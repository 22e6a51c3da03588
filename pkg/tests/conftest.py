"""Shared fixtures for the cellgeo test suite."""
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pytest

from src.models.pattern import PointPattern, Window
from src.simulation.samplers import sample_poisson


def brute_pair_distances(xy: np.ndarray) -> np.ndarray:
    """Upper-triangle pairwise distances by a plain double loop."""
    out = []
    for i in range(len(xy)):
        for j in range(i + 1, len(xy)):
            out.append(float(np.hypot(*(xy[i] - xy[j]))))
    return np.array(out)


def write_station_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def unit() -> Window:
    return Window.unit()


@pytest.fixture
def poisson_300(unit) -> PointPattern:
    return sample_poisson(300.0, unit, seed=12345)


@pytest.fixture
def planar_csv(tmp_path) -> Path:
    return write_station_csv(tmp_path / "stations.csv", ["id", "x", "y"],
                             [("a", 0.0, 0.0), ("b", 2.0, 1.0), ("c", 1.0, 3.0)])


@pytest.fixture
def fast_mcmc():
    from src.models.config import McmcConfig

    return McmcConfig(n_steps=3000)
