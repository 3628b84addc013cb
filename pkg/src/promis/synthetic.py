"""Deterministic synthetic maps for tests, benchmarks and demos."""

from __future__ import annotations

import numpy as np

from promis.geo import POINT, POLYGON, POLYLINE, Feature, FeatureMap, GeoPoint, project
from promis.grid import GridSpec

OPERATOR_TAGS = {"promis:role": "operator"}
OPERATOR_SELECTOR = "promis:role=operator"


def _box(cx: float, cy: float, w: float, h: float) -> np.ndarray:
    x0, x1, y0, y1 = cx - w / 2, cx + w / 2, cy - h / 2, cy + h / 2
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]])


def operator_feature(fmap: FeatureMap, grid: GridSpec) -> Feature:
    """Noise-free point at the grid centre, in the map's frame."""
    p = project(fmap.origin, grid.origin)
    return Feature("operator", POINT, [[p.east, p.north]], dict(OPERATOR_TAGS), fixed=True)


def with_operator(fmap: FeatureMap, grid: GridSpec) -> FeatureMap:
    return fmap.with_features(fmap.features + (operator_feature(fmap, grid),))


def urban_map(origin: GeoPoint, n_features: int = 200, extent_m: float = 1000.0, seed: int = 0) -> FeatureMap:
    """Blocks of buildings cut by primary and residential roads, plus a few parks.

    Roughly 10% of the features are roads, 5% parks, the rest buildings.
    """
    rng = np.random.default_rng(seed)
    half = extent_m / 2
    n_roads = max(2, n_features // 10)
    n_parks = max(1, n_features // 20)
    n_buildings = max(0, n_features - n_roads - n_parks)
    features = []
    for k in range(n_roads):
        vertical = k % 2 == 0
        offset = rng.uniform(-half, half)
        along = np.linspace(-half, half, 6)
        wobble = rng.normal(0.0, 5.0, size=6)
        pts = np.column_stack([offset + wobble, along]) if vertical else np.column_stack([along, offset + wobble])
        kind = "primary" if k % 3 == 0 else "residential"
        features.append(Feature(f"road/{k}", POLYLINE, pts, {"highway": kind}))
    for k in range(n_parks):
        cx, cy = rng.uniform(-half * 0.8, half * 0.8, size=2)
        w, h = rng.uniform(40, 150, size=2)
        features.append(Feature(f"park/{k}", POLYGON, _box(cx, cy, w, h), {"leisure": "park"}))
    for k in range(n_buildings):
        cx, cy = rng.uniform(-half, half, size=2)
        w, h = rng.uniform(8, 30, size=2)
        features.append(Feature(f"building/{k}", POLYGON, _box(cx, cy, w, h), {"building": "yes"}))
    return FeatureMap(origin, tuple(features))


def mission_map(origin: GeoPoint) -> FeatureMap:
    """A park around the origin, two primary roads and some buildings.

    Small enough to reason about by hand: the park covers the centre, one
    road runs north-south 150 m east of it, another east-west 400 m south.
    """
    features = [
        Feature("park/central", POLYGON, _box(0.0, 0.0, 300.0, 300.0), {"leisure": "park"}),
        Feature("road/ns", POLYLINE, [[150.0, -800.0], [150.0, 0.0], [160.0, 800.0]], {"highway": "primary"}),
        Feature("road/ew", POLYLINE, [[-800.0, -400.0], [800.0, -390.0]], {"highway": "primary"}),
    ]
    for k, (cx, cy) in enumerate([(-300, 250), (350, 300), (-400, -200), (300, -250), (-250, -450)]):
        features.append(Feature(f"building/{k}", POLYGON, _box(cx, cy, 40.0, 30.0), {"building": "yes"}))
    return FeatureMap(origin, tuple(features))
