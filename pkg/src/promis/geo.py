"""Geodetic points, tagged map features and their ingestion from GeoJSON or Overpass."""

from __future__ import annotations

import json
import logging
import math
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator

import numpy as np

from promis.errors import (
    GeoParseError,
    GeometryError,
    InvalidCoordinateError,
    ResolutionError,
    UnsupportedGeometryError,
)

log = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0
_M_PER_DEG = math.pi / 180.0 * EARTH_RADIUS_M

DEFAULT_OVERPASS_ENDPOINT = "https://overpass-api.de/api/interpreter"

POINT, POLYLINE, POLYGON = "point", "polyline", "polygon"


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float

    def __post_init__(self):
        lat, lon = float(self.latitude), float(self.longitude)
        if not (math.isfinite(lat) and -90.0 <= lat <= 90.0):
            raise InvalidCoordinateError(f"latitude {self.latitude} outside [-90, 90]")
        if not (math.isfinite(lon) and -180.0 <= lon <= 180.0):
            raise InvalidCoordinateError(f"longitude {self.longitude} outside [-180, 180]")
        object.__setattr__(self, "latitude", lat)
        object.__setattr__(self, "longitude", lon)


@dataclass(frozen=True)
class LocalPoint:
    """Meters east and north of a projection origin."""

    east: float
    north: float

    def __post_init__(self):
        if not (math.isfinite(self.east) and math.isfinite(self.north)):
            raise InvalidCoordinateError(f"non-finite local point ({self.east}, {self.north})")


def project(origin: GeoPoint, p: GeoPoint) -> LocalPoint:
    """Equirectangular local-tangent projection of ``p`` around ``origin``."""
    east, north = project_arrays(origin, p.latitude, p.longitude)
    return LocalPoint(float(east), float(north))


def unproject(origin: GeoPoint, p: LocalPoint) -> GeoPoint:
    lat, lon = unproject_arrays(origin, p.east, p.north)
    return GeoPoint(float(lat), float(lon))


def project_arrays(origin: GeoPoint, lat, lon):
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    north = (lat - origin.latitude) * _M_PER_DEG
    east = (lon - origin.longitude) * (_M_PER_DEG * math.cos(math.radians(origin.latitude)))
    return east, north


def unproject_arrays(origin: GeoPoint, east, north):
    east = np.asarray(east, dtype=np.float64)
    north = np.asarray(north, dtype=np.float64)
    lat = origin.latitude + north / _M_PER_DEG
    lon = origin.longitude + east / (_M_PER_DEG * math.cos(math.radians(origin.latitude)))
    return lat, lon


def _check_lon_lat(lon: float, lat: float, feature_id: str) -> None:
    if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
        raise InvalidCoordinateError(f"feature {feature_id}: coordinate ({lon}, {lat}) out of range")


@dataclass(frozen=True, eq=False)
class Feature:
    """One connected map feature in local coordinates.

    ``vertices`` is an ``(n, 2)`` array of (east, north). Polygons store a
    closed ring (first vertex repeated at the end). ``fixed`` features are
    never perturbed, e.g. a surveyed operator position.
    """

    id: str
    kind: str
    vertices: np.ndarray
    tags: dict[str, str] = field(default_factory=dict)
    fixed: bool = False

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64, copy=True).reshape(-1, 2)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "tags", {str(k): str(val) for k, val in dict(self.tags).items()})
        if self.kind not in (POINT, POLYLINE, POLYGON):
            raise GeometryError(f"feature {self.id}: unknown kind {self.kind!r}")
        if not np.all(np.isfinite(v)):
            raise GeometryError(f"feature {self.id}: non-finite vertex")
        n = len(v)
        if self.kind == POINT and n != 1:
            raise GeometryError(f"feature {self.id}: a point has exactly one vertex")
        if self.kind == POLYLINE and n < 2:
            raise GeometryError(f"feature {self.id}: a polyline needs at least 2 vertices")
        if self.kind == POLYGON:
            if n < 4:
                raise GeometryError(f"feature {self.id}: a polygon ring needs at least 4 vertices")
            if not np.array_equal(v[0], v[-1]):
                raise GeometryError(f"feature {self.id}: polygon ring is not closed")
        if any(not k for k in self.tags):
            raise GeometryError(f"feature {self.id}: empty tag key")

    def matches(self, feature_type: str) -> bool:
        """Whether this feature is of ``feature_type``.

        A plain type matches any tag key or any tag value; ``key=value``
        matches that exact pair only.
        """
        if "=" in feature_type:
            key, _, value = feature_type.partition("=")
            return self.tags.get(key) == value
        return feature_type in self.tags or feature_type in self.tags.values()

    def centroid(self) -> np.ndarray:
        v = self.vertices[:-1] if self.kind == POLYGON else self.vertices
        return v.mean(axis=0)

    def with_vertices(self, vertices: np.ndarray) -> "Feature":
        return Feature(self.id, self.kind, vertices, self.tags, self.fixed)

    def __eq__(self, other):
        if not isinstance(other, Feature):
            return NotImplemented
        return (
            self.id == other.id
            and self.kind == other.kind
            and self.fixed == other.fixed
            and self.tags == other.tags
            and np.array_equal(self.vertices, other.vertices)
        )

    def __repr__(self):
        return f"Feature({self.id!r}, {self.kind}, {len(self.vertices)} vertices, tags={self.tags})"


@dataclass(frozen=True)
class FeatureMap:
    origin: GeoPoint
    features: tuple[Feature, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "warnings", tuple(self.warnings))

    def __len__(self):
        return len(self.features)

    def __iter__(self) -> Iterator[Feature]:
        return iter(self.features)

    def select(self, feature_type: str) -> list[int]:
        """Indices of features matching ``feature_type``, in map order."""
        return [i for i, f in enumerate(self.features) if f.matches(feature_type)]

    def with_features(self, features: Iterable[Feature]) -> "FeatureMap":
        return FeatureMap(self.origin, tuple(features), self.warnings)

    def to_json(self) -> str:
        doc = {
            "origin": {"lat": self.origin.latitude, "lon": self.origin.longitude},
            "features": [
                {
                    "id": f.id,
                    "kind": f.kind,
                    "coordinates": f.vertices.tolist(),
                    "tags": f.tags,
                    "fixed": f.fixed,
                }
                for f in self.features
            ],
            "warnings": list(self.warnings),
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str | bytes) -> "FeatureMap":
        doc = _load_json(text)
        try:
            origin = GeoPoint(doc["origin"]["lat"], doc["origin"]["lon"])
            features = [
                Feature(f["id"], f["kind"], f["coordinates"], f.get("tags", {}), f.get("fixed", False))
                for f in doc["features"]
            ]
        except (KeyError, TypeError) as exc:
            raise GeoParseError(f"not a feature map file: missing {exc}") from exc
        return cls(origin, tuple(features), tuple(doc.get("warnings", ())))


def _load_json(text: str | bytes) -> Any:
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise GeoParseError("invalid UTF-8", offset=exc.start) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise GeoParseError(f"malformed JSON: {exc.msg}", offset=offset) from exc


def _flat_tags(properties: Any) -> dict[str, str]:
    tags = {}
    if not isinstance(properties, dict):
        return tags
    for key, value in properties.items():
        if value is None or isinstance(value, (dict, list)):
            continue
        if isinstance(value, bool):
            value = "yes" if value else "no"
        tags[str(key)] = str(value)
    return tags


def _project_coords(origin: GeoPoint, coords: Any, feature_id: str) -> np.ndarray:
    try:
        arr = np.asarray(coords, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise GeoParseError(f"feature {feature_id}: malformed coordinates") from exc
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] < 2 or len(arr) == 0:
        raise GeoParseError(f"feature {feature_id}: malformed coordinates")
    for lon, lat in arr[:, :2]:
        _check_lon_lat(lon, lat, feature_id)
    east, north = project_arrays(origin, arr[:, 1], arr[:, 0])
    return np.column_stack([east, north])


def parse_geojson(text: str | bytes, origin: GeoPoint) -> FeatureMap:
    """Read a GeoJSON FeatureCollection into a :class:`FeatureMap`.

    Points, LineStrings and Polygons are supported. Polygon holes are
    dropped with a warning since features carry a single ring.
    """
    doc = _load_json(text)
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise GeoParseError("expected a GeoJSON FeatureCollection")
    raw = doc.get("features")
    if not isinstance(raw, list):
        raise GeoParseError("FeatureCollection without a 'features' array")

    features, warnings = [], []
    for index, item in enumerate(raw):
        if not isinstance(item, dict):
            raise GeoParseError(f"feature #{index} is not an object")
        props = item.get("properties") or {}
        fid = item.get("id", props.get("@id") if isinstance(props, dict) else None)
        fid = str(fid) if fid is not None else f"feature/{index}"
        geometry = item.get("geometry")
        if not isinstance(geometry, dict):
            raise GeoParseError(f"feature {fid}: missing geometry")
        gtype = geometry.get("type")
        coords = geometry.get("coordinates")
        tags = _flat_tags(props)
        try:
            if gtype == "Point":
                features.append(Feature(fid, POINT, _project_coords(origin, coords, fid), tags))
            elif gtype == "LineString":
                features.append(Feature(fid, POLYLINE, _project_coords(origin, coords, fid), tags))
            elif gtype == "Polygon":
                if not isinstance(coords, list) or not coords:
                    raise GeoParseError(f"feature {fid}: polygon without rings")
                if len(coords) > 1:
                    warnings.append(f"feature {fid}: {len(coords) - 1} interior ring(s) dropped")
                features.append(Feature(fid, POLYGON, _project_coords(origin, coords[0], fid), tags))
            else:
                raise UnsupportedGeometryError(fid, str(gtype))
        except GeometryError as exc:
            raise GeoParseError(str(exc)) from exc
    return FeatureMap(origin, tuple(features), tuple(warnings))


# Keys whose closed ways describe areas rather than loops of lines.
AREA_KEYS = frozenset(
    {
        "building", "building:part", "landuse", "leisure", "natural", "amenity",
        "area", "water", "place", "shop", "tourism", "man_made", "aeroway",
        "parking", "historic", "military", "boundary", "office", "sport",
    }
)
_LINEAR_NATURAL = frozenset({"coastline", "tree_row", "cliff", "ridge", "arete"})


def is_area(tags: dict[str, str]) -> bool:
    if tags.get("area") == "no":
        return False
    if tags.get("area") == "yes":
        return True
    if tags.get("natural") in _LINEAR_NATURAL:
        return any(k in AREA_KEYS for k in tags if k not in ("natural", "area"))
    return any(k in AREA_KEYS for k in tags)


def parse_overpass(text: str | bytes, origin: GeoPoint) -> FeatureMap:
    """Read Overpass API JSON (``out body; >; out skel qt;`` style) into a map.

    Tagged nodes become points, ways become polylines or, when closed and
    area-like, polygons. Relations are flattened into their member ways
    carrying the relation tags; non-way members are skipped with a warning.
    """
    doc = _load_json(text)
    if not isinstance(doc, dict) or not isinstance(doc.get("elements"), list):
        raise GeoParseError("Overpass JSON without an 'elements' array")

    nodes: dict[int, tuple[float, float]] = {}
    ways: dict[int, dict] = {}
    order: list[tuple[str, dict]] = []
    for element in doc["elements"]:
        if not isinstance(element, dict):
            raise GeoParseError("element is not an object")
        etype = element.get("type")
        if etype == "node":
            try:
                nodes[int(element["id"])] = (float(element["lat"]), float(element["lon"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise GeoParseError(f"node without id/lat/lon: {element!r:.80}") from exc
            if element.get("tags"):
                order.append(("node", element))
        elif etype == "way":
            if "id" not in element:
                raise GeoParseError("way without id")
            ways[int(element["id"])] = element
            order.append(("way", element))
        elif etype == "relation":
            order.append(("relation", element))

    def way_vertices(way: dict) -> np.ndarray:
        wid = way["id"]
        refs = way.get("nodes")
        if not isinstance(refs, list):
            raise GeoParseError(f"way {wid} has no node list")
        latlon = []
        for ref in refs:
            if ref not in nodes:
                raise ResolutionError(f"way {wid} references unknown node {ref}")
            latlon.append(nodes[ref])
        lat = np.array([p[0] for p in latlon])
        lon = np.array([p[1] for p in latlon])
        for la, lo in latlon:
            _check_lon_lat(lo, la, f"way/{wid}")
        east, north = project_arrays(origin, lat, lon)
        return np.column_stack([east, north])

    def way_feature(fid: str, way: dict, tags: dict[str, str]) -> Feature:
        v = way_vertices(way)
        refs = way["nodes"]
        if len(refs) >= 4 and refs[0] == refs[-1] and is_area(tags):
            return Feature(fid, POLYGON, v, tags)
        if len(v) < 2:
            raise GeoParseError(f"{fid}: fewer than two nodes")
        return Feature(fid, POLYLINE, v, tags)

    features: list[Feature] = []
    warnings: list[str] = []
    for etype, element in order:
        tags = _flat_tags(element.get("tags"))
        if etype == "node":
            lat, lon = nodes[int(element["id"])]
            _check_lon_lat(lon, lat, f"node/{element['id']}")
            east, north = project_arrays(origin, lat, lon)
            features.append(Feature(f"node/{element['id']}", POINT, [[float(east), float(north)]], tags))
        elif etype == "way":
            if not tags:
                continue  # geometry only, e.g. a relation member
            features.append(way_feature(f"way/{element['id']}", element, tags))
        else:
            rid = element.get("id")
            for member in element.get("members", []) or []:
                mtype, ref, role = member.get("type"), member.get("ref"), member.get("role", "")
                if mtype != "way":
                    warnings.append(f"relation {rid}: skipped {mtype} member {ref}")
                    continue
                if role == "inner":
                    warnings.append(f"relation {rid}: skipped inner way {ref}")
                    continue
                if ref not in ways:
                    warnings.append(f"relation {rid}: member way {ref} not in data")
                    continue
                merged = {**_flat_tags(ways[ref].get("tags")), **tags}
                features.append(way_feature(f"relation/{rid}/way/{ref}", ways[ref], merged))
    for w in warnings:
        log.warning(w)
    return FeatureMap(origin, tuple(features), tuple(warnings))


def fetch_overpass(query: str, endpoint: str = DEFAULT_OVERPASS_ENDPOINT, timeout: float = 60.0) -> bytes:
    """POST an Overpass QL query and return the raw JSON response."""
    data = urllib.parse.urlencode({"data": query}).encode()
    request = urllib.request.Request(endpoint, data=data, headers={"User-Agent": "promis/0.1"})
    with urllib.request.urlopen(request, timeout=timeout) as response:
        return response.read()
