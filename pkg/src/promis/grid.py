"""Regular raster of agent states centred on a geodetic origin."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from promis.errors import InvalidArgumentError
from promis.geo import GeoPoint, project_arrays, unproject_arrays


@dataclass(frozen=True)
class GridSpec:
    """``res_x`` by ``res_y`` points spanning ``width`` x ``height`` meters.

    Locations are indexed row-major, ``index = row * res_x + col``, with
    row 0 at the southern edge and the grid centred on ``origin``.
    """

    origin: GeoPoint
    width: float
    height: float
    res_x: int
    res_y: int

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise InvalidArgumentError("grid width and height must be positive")
        if int(self.res_x) != self.res_x or int(self.res_y) != self.res_y:
            raise InvalidArgumentError("grid resolution must be integral")
        if self.res_x < 2 or self.res_y < 2:
            raise InvalidArgumentError("grid resolution must be at least 2 per axis")
        object.__setattr__(self, "width", float(self.width))
        object.__setattr__(self, "height", float(self.height))
        object.__setattr__(self, "res_x", int(self.res_x))
        object.__setattr__(self, "res_y", int(self.res_y))

    @property
    def size(self) -> int:
        return self.res_x * self.res_y

    @property
    def shape(self) -> tuple[int, int]:
        return self.res_y, self.res_x

    def index(self, row: int, col: int) -> int:
        return row * self.res_x + col

    def local_points(self) -> tuple[np.ndarray, np.ndarray]:
        """(east, north) of every location relative to ``origin``, row-major."""
        cols = np.arange(self.res_x, dtype=np.float64)
        rows = np.arange(self.res_y, dtype=np.float64)
        east = (cols / (self.res_x - 1) - 0.5) * self.width
        north = (rows / (self.res_y - 1) - 0.5) * self.height
        ee, nn = np.meshgrid(east, north)
        return ee.ravel(), nn.ravel()

    def points_relative_to(self, other: GeoPoint) -> tuple[np.ndarray, np.ndarray]:
        """Location coordinates in the local frame of another origin."""
        east, north = self.local_points()
        if other == self.origin:
            return east, north
        lat, lon = unproject_arrays(self.origin, east, north)
        return project_arrays(other, lat, lon)

    def geo_points(self) -> tuple[np.ndarray, np.ndarray]:
        east, north = self.local_points()
        return unproject_arrays(self.origin, east, north)

    def with_resolution(self, res_x: int, res_y: int) -> "GridSpec":
        return GridSpec(self.origin, self.width, self.height, res_x, res_y)
