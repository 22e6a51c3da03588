"""
Geographic utility functions for base-station ingestion.
"""
import math
from typing import Tuple

import numpy as np

from src.utils.constants import EARTH_RADIUS_KM


def haversine_distance(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """
    Calculate the great circle distance between two points on Earth.
    Returns distance in kilometers.
    """
    lat1, lon1, lat2, lon2 = map(math.radians, [lat1, lon1, lat2, lon2])

    dlat = lat2 - lat1
    dlon = lon2 - lon1
    a = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    c = 2 * math.asin(math.sqrt(a))

    return EARTH_RADIUS_KM * c


def equirectangular_project(lon: np.ndarray, lat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Project degrees onto a local plane (km) about the data centroid.
    x = R * dlon * cos(lat0), y = R * dlat, angles in radians.
    """
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    lon0 = float(np.mean(lon))
    lat0 = float(np.mean(lat))

    x = EARTH_RADIUS_KM * np.radians(lon - lon0) * math.cos(math.radians(lat0))
    y = EARTH_RADIUS_KM * np.radians(lat - lat0)
    return x, y


def projection_distortion(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Relative error of the projected distance against the great-circle distance."""
    x, y = equirectangular_project(np.array([lon1, lon2]), np.array([lat1, lat2]))
    planar = float(np.hypot(x[1] - x[0], y[1] - y[0]))
    true = haversine_distance(lat1, lon1, lat2, lon2)
    if true == 0:
        return 0.0
    return abs(planar - true) / true
