"""Great-circle distance and nearest-city lookup.

Coordinates go through a KD-tree over points on the unit sphere; chord
distance is monotone in great-circle distance, so tree candidates are
correct, and an exact haversine re-rank settles ordering and ties.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .gazetteer import LocationEntity

EARTH_RADIUS_KM = 6371.0

# Candidates fetched from the tree before the exact re-rank; generous so
# equidistant entities are all visible to the id tie-break.
_CANDIDATE_PAD = 8


def haversine_km(lat1, lon1, lat2, lon2):
    """Great-circle distance in km; broadcasts over array inputs."""
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(x, dtype=np.float64)) for x in (lat1, lon1, lat2, lon2))
    sin_dlat = np.sin((lat2 - lat1) / 2.0)
    sin_dlon = np.sin((lon2 - lon1) / 2.0)
    h = sin_dlat**2 + np.cos(lat1) * np.cos(lat2) * sin_dlon**2
    # Round-off can push h a hair past 1 for antipodal points.
    h = np.clip(h, 0.0, 1.0)
    out = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(h))
    return float(out) if out.ndim == 0 else out


def _check_coords(latitude: float, longitude: float) -> None:
    if not -90.0 <= latitude <= 90.0:
        raise ValueError(f"latitude {latitude!r} outside [-90, 90]")
    if not -180.0 <= longitude <= 180.0:
        raise ValueError(f"longitude {longitude!r} outside [-180, 180]")


def _unit_vectors(lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    lat_r = np.radians(lats)
    lon_r = np.radians(lons)
    cos_lat = np.cos(lat_r)
    return np.column_stack(
        (cos_lat * np.cos(lon_r), cos_lat * np.sin(lon_r), np.sin(lat_r))
    )


class CityLocator:
    """Nearest-entity lookup over fixed coordinates.

    Distance ties resolve to the lower entity_id, deterministically.
    """

    def __init__(self, entities: Iterable[LocationEntity]):
        self.entities: Sequence[LocationEntity] = list(entities)
        if not self.entities:
            raise ValueError("CityLocator requires at least one entity")
        self._lats = np.array([e.latitude for e in self.entities], dtype=np.float64)
        self._lons = np.array([e.longitude for e in self.entities], dtype=np.float64)
        self._tree = cKDTree(_unit_vectors(self._lats, self._lons))

    def __len__(self) -> int:
        return len(self.entities)

    def nearest(
        self, latitude: float, longitude: float, k: int = 1
    ) -> list[tuple[LocationEntity, float]]:
        """k nearest entities as (entity, distance_km), closest first."""
        _check_coords(latitude, longitude)
        if k < 1:
            raise ValueError("k must be >= 1")
        k = min(k, len(self.entities))
        n_candidates = min(len(self.entities), k + _CANDIDATE_PAD)
        point = _unit_vectors(np.array([latitude]), np.array([longitude]))[0]
        _, idx = self._tree.query(point, k=n_candidates)
        idx = np.atleast_1d(idx)
        # One scalar call per candidate: vectorized trig can drift a last
        # ulp from the scalar path, which would break bitwise agreement
        # with any per-point recomputation of the same formula.
        dists = [
            haversine_km(latitude, longitude, float(self._lats[i]), float(self._lons[i]))
            for i in idx.tolist()
        ]
        ranked = sorted(
            zip(idx.tolist(), dists),
            key=lambda pair: (pair[1], self.entities[pair[0]].entity_id),
        )
        return [(self.entities[i], d) for i, d in ranked[:k]]

    def locate(self, latitude: float, longitude: float) -> tuple[LocationEntity, float]:
        """Single nearest entity and its distance in km."""
        return self.nearest(latitude, longitude, k=1)[0]
