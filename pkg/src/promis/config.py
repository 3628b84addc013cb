"""JSON run configuration.

Example::

    {
      "origin": {"lat": 49.8728, "lon": 8.6512},
      "width_m": 1000, "height_m": 1000, "res_x": 100, "res_y": 100,
      "map": {"feature_map": "city.json"},
      "map_samples": 50, "seed": 7,
      "perturbation": {"translation_std_east": 5, "translation_std_north": 5},
      "operator": true,
      "relations": [
        {"relation": "distance", "type": "primary"},
        {"relation": "over", "type": "park"},
        {"relation": "distance", "type": "operator"}
      ],
      "rasters": [{"pgm": "change.pgm", "georef": "change.json", "name": "change"}],
      "program": "mission.pl",
      "tiling": 1, "workers": 4,
      "inference": {"mode": "auto", "samples": 10000},
      "outputs": {"table": "table.csv", "csv": "pml.csv", "pgm": "pml.pgm"}
    }

Relative paths are resolved against the directory of the config file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from promis.errors import ConfigurationError, PromisError
from promis.geo import GeoPoint
from promis.grid import GridSpec
from promis.inference.engine import DEFAULT_SAMPLES, InferenceMode
from promis.perturb import PerturbationModel
from promis.relations import DISTANCE, RelationSpec
from promis.synthetic import OPERATOR_SELECTOR

_TOP_KEYS = {
    "origin", "width_m", "height_m", "res_x", "res_y", "map", "map_samples", "seed",
    "perturbation", "relations", "operator", "rasters", "program", "tiling", "workers",
    "inference", "outputs",
}
_MAP_KEYS = ("feature_map", "geojson", "overpass")
_OUTPUT_KEYS = ("table", "csv", "geojson", "pgm", "timings")


@dataclass(frozen=True)
class RasterIngest:
    pgm: Path
    georef: Path
    name: str


@dataclass(frozen=True)
class Outputs:
    table: Path | None = None
    csv: Path | None = None
    geojson: Path | None = None
    pgm: Path | None = None
    timings: Path | None = None
    threshold: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    origin: GeoPoint
    width_m: float
    height_m: float
    res_x: int
    res_y: int
    map_kind: str | None = None
    map_path: Path | None = None
    map_samples: int = 50
    seed: int = 0
    perturbation: PerturbationModel = field(default_factory=PerturbationModel)
    relations: tuple[RelationSpec, ...] = ()
    operator: bool = False
    rasters: tuple[RasterIngest, ...] = ()
    program: Path | None = None
    tiling: int = 0
    workers: int = 1
    inference: InferenceMode = field(default_factory=InferenceMode)
    outputs: Outputs = field(default_factory=Outputs)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.origin, self.width_m, self.height_m, self.res_x, self.res_y)

    def with_overrides(self, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes) if changes else self

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError as exc:
            raise ConfigurationError(f"config file not found: {path}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
        return cls.from_dict(doc, path.parent)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str | Path = ".") -> "RunConfig":
        try:
            return _from_dict(doc, Path(base_dir))
        except ConfigurationError:
            raise
        except PromisError as exc:
            raise ConfigurationError(str(exc)) from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"invalid config: {exc}") from exc


def _path(base: Path, value) -> Path | None:
    if value is None:
        return None
    if not isinstance(value, str):
        raise ConfigurationError(f"expected a path string, got {value!r}")
    return base / value


def _integer(doc: dict, key: str, default=None) -> int:
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigurationError(f"{key} must be an integer")
    return int(value)


def _from_dict(doc: dict, base: Path) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigurationError("config must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in ("origin", "width_m", "height_m", "res_x", "res_y"):
        if key not in doc:
            raise ConfigurationError(f"config lacks {key!r}")

    origin = doc["origin"]
    if isinstance(origin, dict):
        origin = GeoPoint(origin["lat"], origin["lon"])
    else:
        lat, lon = origin
        origin = GeoPoint(lat, lon)

    map_kind = map_path = None
    if doc.get("map") is not None:
        given = {k: v for k, v in doc["map"].items() if k in _MAP_KEYS}
        if len(given) != 1 or len(doc["map"]) != 1:
            raise ConfigurationError(f"map needs exactly one of {', '.join(_MAP_KEYS)}")
        map_kind, value = next(iter(given.items()))
        map_path = _path(base, value)

    operator = bool(doc.get("operator", False))
    relations = []
    for item in doc.get("relations", []):
        spec = RelationSpec(
            item["relation"], item.get("type"), item.get("match"), float(item.get("buffer_m", 0.0))
        )
        if operator and spec.relation == DISTANCE and spec.type == "operator" and spec.match is None:
            spec = replace(spec, match=OPERATOR_SELECTOR)
        relations.append(spec)

    rasters = tuple(
        RasterIngest(_path(base, r["pgm"]), _path(base, r["georef"]), str(r["name"])) for r in doc.get("rasters", [])
    )
    for r in rasters:
        RelationSpec(r.name)  # validates the name

    inf = doc.get("inference", {})
    mode = InferenceMode(inf.get("mode", "auto"), _integer(inf, "samples", DEFAULT_SAMPLES), _integer(inf, "seed", doc.get("seed", 0)))

    out = doc.get("outputs", {})
    unknown = set(out) - set(_OUTPUT_KEYS) - {"threshold"}
    if unknown:
        raise ConfigurationError(f"unknown output keys: {', '.join(sorted(unknown))}")
    outputs = Outputs(**{k: _path(base, out.get(k)) for k in _OUTPUT_KEYS}, threshold=float(out.get("threshold", 0.0)))

    return RunConfig(
        origin=origin,
        width_m=float(doc["width_m"]),
        height_m=float(doc["height_m"]),
        res_x=_integer(doc, "res_x"),
        res_y=_integer(doc, "res_y"),
        map_kind=map_kind,
        map_path=map_path,
        map_samples=_integer(doc, "map_samples", 50),
        seed=_integer(doc, "seed", 0),
        perturbation=PerturbationModel(**doc.get("perturbation", {})),
        relations=tuple(relations),
        operator=operator,
        rasters=rasters,
        program=_path(base, doc.get("program")),
        tiling=_integer(doc, "tiling", 0),
        workers=_integer(doc, "workers", 1),
        inference=mode,
        outputs=outputs,
    )
