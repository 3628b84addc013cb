"""Spatial relations between grid locations and map features.

Relation parameters are estimated by the method of moments over randomised
map variants: the sample mean and the ``N - 1`` sample variance of the
distance to the nearest feature give a Normal, the fraction of variants in
which a location lies over a feature gives a Bernoulli. Unary relations are
read from external probability rasters.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from promis.distributions import Bernoulli, Normal
from promis.errors import (
    ConfigurationError,
    InvalidArgumentError,
    PromisError,
    RasterFormatError,
    RelationUndefinedError,
)
from promis.geo import FeatureMap, GeoPoint, LocalPoint
from promis.grid import GridSpec
from promis.kernels import Geometry, distance_field
from promis.perturb import PerturbationModel, draw_affine, perturb_vertices
from promis.pgm import read_pgm

DISTANCE = "distance"
OVER = "over"
NORMAL = "normal"
BERNOULLI = "bernoulli"

_NAME = re.compile(r"[a-z][A-Za-z0-9_]*\Z")
CSV_HEADER = ["location_index", "relation", "type", "kind", "param1", "param2"]


@dataclass(frozen=True)
class RelationSpec:
    """A declared relation.

    ``type`` is the constant used in logic programs (``distance(X, primary)``);
    ``match`` optionally overrides the tag selector used on the map, e.g.
    ``highway=primary``. ``buffer_m`` widens ``over`` to everything within
    that distance of a matching feature.
    """

    relation: str
    type: str | None = None
    match: str | None = None
    buffer_m: float = 0.0

    def __post_init__(self):
        if self.relation in (DISTANCE, OVER):
            if not self.type:
                raise InvalidArgumentError(f"{self.relation} relation needs a feature type")
        else:
            if not _NAME.match(self.relation or ""):
                raise InvalidArgumentError(f"invalid unary relation name {self.relation!r}")
            if self.type:
                raise InvalidArgumentError(f"unary relation {self.relation} takes no feature type")
            object.__setattr__(self, "type", None)
        if not (self.buffer_m >= 0 and math.isfinite(self.buffer_m)):
            raise InvalidArgumentError("buffer_m must be a finite value >= 0")
        if self.buffer_m and self.relation != OVER:
            raise InvalidArgumentError("buffer_m only applies to over relations")

    @property
    def kind(self) -> str:
        return NORMAL if self.relation == DISTANCE else BERNOULLI

    @property
    def selector(self) -> str:
        return self.match or self.type

    @property
    def label(self) -> str:
        return f"{self.relation}({self.type})" if self.type else self.relation

    @property
    def key(self) -> tuple[str, str]:
        return self.relation, self.type or ""


@dataclass(frozen=True)
class RelationEntry:
    location_index: int
    relation: RelationSpec
    params: Bernoulli | Normal


class RelationTable:
    """Dense parameter storage: one slot per (relation, location).

    ``params[r, i]`` holds ``(p, 0)`` for Bernoulli relations and
    ``(mean, std)`` for Normal ones.
    """

    def __init__(self, grid: GridSpec | None, relations: Sequence[RelationSpec], params: np.ndarray, size: int | None = None):
        self.grid = grid
        self.relations = tuple(relations)
        params = np.asarray(params, dtype=np.float64)
        if size is None:
            size = grid.size if grid is not None else params.shape[1]
        if params.shape != (len(self.relations), size, 2):
            raise InvalidArgumentError(f"parameter array shape {params.shape} does not fit the table")
        keys = [r.key for r in self.relations]
        if len(set(keys)) != len(keys):
            raise InvalidArgumentError("duplicate relation declaration")
        self.params = params
        self.size = size

    def __len__(self):
        return self.size

    def __eq__(self, other):
        if not isinstance(other, RelationTable):
            return NotImplemented
        return (
            self.grid == other.grid
            and [r.key for r in self.relations] == [r.key for r in other.relations]
            and np.array_equal(self.params, other.params)
        )

    def column(self, relation: str, type_: str | None = None) -> np.ndarray:
        for r, spec in enumerate(self.relations):
            if spec.key == (relation, type_ or ""):
                return self.params[r]
        raise KeyError((relation, type_))

    def entry(self, location_index: int, relation: RelationSpec) -> RelationEntry:
        r = self.relations.index(relation)
        a, b = self.params[r, location_index]
        params = Normal(a, b) if relation.kind == NORMAL else Bernoulli(a)
        return RelationEntry(location_index, relation, params)

    def entries(self, locations: Sequence[int] | None = None) -> Iterator[RelationEntry]:
        """Entries ordered by location, then by declaration order."""
        locations = range(self.size) if locations is None else locations
        for i in locations:
            for spec in self.relations:
                yield self.entry(i, spec)

    def merge(self, other: "RelationTable") -> "RelationTable":
        if other.size != self.size or (self.grid and other.grid and self.grid != other.grid):
            raise InvalidArgumentError("cannot merge relation tables over different grids")
        return RelationTable(
            self.grid or other.grid,
            self.relations + other.relations,
            np.concatenate([self.params, other.params]),
            self.size,
        )

    def with_grid(self, grid: GridSpec) -> "RelationTable":
        if grid.size != self.size:
            raise ConfigurationError(
                f"relation table has {self.size} locations but the grid has {grid.size}"
            )
        return RelationTable(grid, self.relations, self.params, self.size)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for i in range(self.size):
            for r, spec in enumerate(self.relations):
                a, b = self.params[r, i]
                second = "" if spec.kind == BERNOULLI else f"{b:.9g}"
                writer.writerow([i, spec.relation, spec.type or "", spec.kind, f"{a:.9g}", second])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str, grid: GridSpec | None = None) -> "RelationTable":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header != CSV_HEADER:
            raise PromisError(f"relation table header must be {','.join(CSV_HEADER)}")
        specs: dict[tuple[str, str], RelationSpec] = {}
        values: dict[tuple[tuple[str, str], int], tuple[float, float]] = {}
        max_index = -1
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                index, relation, type_, kind, p1, p2 = row
                index = int(index)
                a = float(p1)
                b = float(p2) if kind == NORMAL else 0.0
                spec = RelationSpec(relation, type_ or None)
                params = Normal(a, b) if kind == NORMAL else Bernoulli(a)
            except (ValueError, PromisError) as exc:
                raise PromisError(f"relation table line {lineno}: {exc}") from exc
            if spec.kind != kind:
                raise PromisError(f"relation table line {lineno}: {relation} must be {spec.kind}")
            if index < 0:
                raise PromisError(f"relation table line {lineno}: negative location index")
            specs.setdefault(spec.key, spec)
            values[(spec.key, index)] = (a, b) if kind == NORMAL else (params.p, 0.0)
            max_index = max(max_index, index)
        size = grid.size if grid is not None else max_index + 1
        if max_index >= size:
            raise ConfigurationError(f"relation table has location {max_index} but the grid has {size}")
        params = np.zeros((len(specs), size, 2))
        for r, key in enumerate(specs):
            for i in range(size):
                if (key, i) not in values:
                    raise PromisError(f"relation table lacks {specs[key].label} for location {i}")
                params[r, i] = values[(key, i)]
        return cls(grid, list(specs.values()), params, size)


def _geometry_for(fmap: FeatureMap, indices: Sequence[int], vertices: dict[int, np.ndarray] | None = None) -> Geometry:
    kinds = [fmap.features[i].kind for i in indices]
    verts = [vertices[i] if vertices else fmap.features[i].vertices for i in indices]
    return Geometry.pack(kinds, verts)


def distance_to_nearest(fmap: FeatureMap, x: LocalPoint, feature_type: str) -> float:
    """Euclidean distance from ``x`` to the closest feature of ``feature_type``.

    Polygons count as solid: points inside are at distance 0.
    """
    indices = fmap.select(feature_type)
    if not indices:
        raise RelationUndefinedError(feature_type)
    dist, inside = distance_field(np.array([x.east]), np.array([x.north]), _geometry_for(fmap, indices))
    return 0.0 if inside[0] else float(dist[0])


def is_over(fmap: FeatureMap, x: LocalPoint, feature_type: str, buffer_m: float = 0.0) -> bool:
    indices = fmap.select(feature_type)
    if not indices:
        return False
    dist, inside = distance_field(np.array([x.east]), np.array([x.north]), _geometry_for(fmap, indices))
    return bool(inside[0] or (buffer_m > 0 and dist[0] <= buffer_m))


def estimate_relations(
    fmap: FeatureMap,
    model: PerturbationModel,
    grid: GridSpec,
    declarations: Sequence[RelationSpec],
    samples: int,
    seed: int,
) -> RelationTable:
    """Estimate relation parameters at every grid location.

    Args:
        fmap: The unperturbed map.
        model: Per-feature affine error model used to draw map variants.
        grid: Locations to evaluate.
        declarations: ``distance`` and ``over`` relations to estimate.
        samples: Number of map variants ``N``; shared by all locations.
        seed: Root seed of the variant generator.

    Returns:
        A table with ``Normal(mean, std)`` for distances (``N - 1`` variance
        denominator) and ``Bernoulli(hits / N)`` for ``over``.
    """
    declarations = list(declarations)
    for d in declarations:
        if d.relation not in (DISTANCE, OVER):
            raise InvalidArgumentError(f"{d.label} is not estimated from maps; ingest it from a raster")
    if any(d.relation == DISTANCE for d in declarations) and samples < 2:
        raise InvalidArgumentError("N must be ≥ 2 for distance relations")
    if samples < 1:
        raise InvalidArgumentError("N must be ≥ 1")

    px, py = grid.points_relative_to(fmap.origin)
    selections: dict[str, list[int]] = {}
    for d in declarations:
        indices = selections.setdefault(d.selector, fmap.select(d.selector))
        if d.relation == DISTANCE and not indices:
            raise RelationUndefinedError(d.type)
    needed = sorted({i for indices in selections.values() for i in indices})
    centroids = {i: fmap.features[i].centroid() for i in needed}

    size = grid.size
    mean = {d.key: np.zeros(size) for d in declarations if d.relation == DISTANCE}
    m2 = {key: np.zeros(size) for key in mean}
    hits = {d.key: np.zeros(size, dtype=np.int64) for d in declarations if d.relation == OVER}

    # With zero noise every variant equals the source map.
    rounds = 1 if model.is_zero else samples
    for n in range(rounds):
        vertices = {}
        for i in needed:
            feature = fmap.features[i]
            if feature.fixed or model.is_zero:
                vertices[i] = feature.vertices
            else:
                delta, t = draw_affine(model, seed, n, i)
                vertices[i] = perturb_vertices(feature.vertices, centroids[i], delta, t)
        for selector, indices in selections.items():
            if indices:
                dist, inside = distance_field(px, py, _geometry_for(fmap, indices, vertices))
            else:
                dist, inside = np.full(size, np.inf), np.zeros(size, dtype=bool)
            for d in declarations:
                if d.selector != selector:
                    continue
                if d.relation == DISTANCE:
                    value = np.where(inside, 0.0, dist)
                    delta = value - mean[d.key]
                    mean[d.key] += delta / (n + 1)
                    m2[d.key] += delta * (value - mean[d.key])
                else:
                    hit = inside | (dist <= d.buffer_m) if d.buffer_m > 0 else inside
                    hits[d.key] += hit

    params = np.zeros((len(declarations), size, 2))
    for r, d in enumerate(declarations):
        if d.relation == DISTANCE:
            params[r, :, 0] = mean[d.key]
            params[r, :, 1] = 0.0 if model.is_zero else np.sqrt(m2[d.key] / (samples - 1))
        else:
            params[r, :, 0] = hits[d.key] / rounds
    return RelationTable(grid, declarations, params)


@dataclass(frozen=True)
class Georef:
    """Placement of a north-up raster: ``origin`` is the north-west corner of pixel (0, 0)."""

    origin: GeoPoint
    pixel_size_m: float
    max_value: int | None = None

    @classmethod
    def from_json(cls, text: str | bytes) -> "Georef":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"georef is not valid JSON: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise ConfigurationError("georef must be a JSON object")
        for key in ("origin_lat", "origin_lon", "pixel_size_m"):
            if key not in doc:
                raise ConfigurationError(f"georef lacks field {key!r}")
        size = float(doc["pixel_size_m"])
        if not size > 0:
            raise ConfigurationError("georef pixel_size_m must be positive")
        max_value = doc.get("max_value")
        return cls(GeoPoint(doc["origin_lat"], doc["origin_lon"]), size, None if max_value is None else int(max_value))


def ingest_probability_raster(raster_bytes: bytes, georef: Georef, grid: GridSpec, name: str) -> RelationTable:
    """Turn a probability raster into a unary relation by nearest-pixel lookup.

    Pixel values are divided by ``georef.max_value`` (the PGM maxval when
    unset). Locations outside the raster get probability 0.
    """
    pixels, maxval = read_pgm(raster_bytes)
    scale = georef.max_value or maxval
    if pixels.max(initial=0) > scale:
        raise RasterFormatError(f"pixel value above max_value {scale}")
    east, north = grid.points_relative_to(georef.origin)
    col = np.floor(east / georef.pixel_size_m).astype(np.int64)
    row = np.floor(-north / georef.pixel_size_m).astype(np.int64)
    height, width = pixels.shape
    valid = (row >= 0) & (row < height) & (col >= 0) & (col < width)
    p = np.zeros(grid.size)
    p[valid] = pixels[row[valid], col[valid]] / scale
    params = np.zeros((1, grid.size, 2))
    params[0, :, 0] = p
    return RelationTable(grid, [RelationSpec(name)], params)
