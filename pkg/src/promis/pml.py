"""Probabilistic mission landscapes: per-location inference over a grid.

The rules are grounded once, for location ``x0`` together with that
location's relation facts. Every other location grounds to the same shape
with different numbers, so the compiled truth table is reused and only the
parameters change per location. Locations are split into tiles that can be
evaluated by a process pool; results do not depend on the tiling or on the
worker count.
"""

from __future__ import annotations

import csv
import io
import json
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from promis.errors import ConfigurationError, InvalidArgumentError, LocationError, PromisError
from promis.grid import GridSpec
from promis.hplp.ast import Atom, Const, Program
from promis.hplp.codegen import generate_relation_clauses, location_constant, relation_clauses
from promis.inference.engine import DEFAULT_LIMIT, CompiledProgram, InferenceMode, compile_program, query
from promis.inference.grounding import ground
from promis.pgm import write_pgm
from promis.relations import RelationTable

_LOCATION_CONSTANT = re.compile(r"x\d+\Z")
CSV_HEADER = ["row", "col", "lat", "lon", "probability"]


@dataclass(frozen=True)
class Tile:
    """Half-open index window ``[row_start, row_stop) x [col_start, col_stop)``."""

    row_start: int
    row_stop: int
    col_start: int
    col_stop: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.row_stop - self.row_start, self.col_stop - self.col_start

    def indices(self, res_x: int) -> np.ndarray:
        rows = np.arange(self.row_start, self.row_stop)
        cols = np.arange(self.col_start, self.col_stop)
        return (rows[:, None] * res_x + cols[None, :]).ravel()


@dataclass(frozen=True)
class TilePlan:
    s: int
    tiles: tuple[Tile, ...]


def _halves(start: int, stop: int, depth: int) -> list[tuple[int, int]]:
    if depth == 0:
        return [(start, stop)]
    mid = start + (stop - start) // 2
    return _halves(start, mid, depth - 1) + _halves(mid, stop, depth - 1)


def tile(grid: GridSpec, s: int) -> TilePlan:
    """Split the grid ``s`` times into four parts, ``4**s`` tiles in total.

    Each split halves both axes; an odd remainder goes to the later half.
    """
    if int(s) != s or s < 0:
        raise InvalidArgumentError("split count s must be an integer >= 0")
    s = int(s)
    if 2**s > min(grid.res_x, grid.res_y):
        raise InvalidArgumentError(
            f"cannot split a {grid.res_x}x{grid.res_y} grid {s} times (2^{s} > {min(grid.res_x, grid.res_y)})"
        )
    rows = _halves(0, grid.res_y, s)
    cols = _halves(0, grid.res_x, s)
    return TilePlan(s, tuple(Tile(r0, r1, c0, c1) for r0, r1 in rows for c0, c1 in cols))


@dataclass
class PMLRaster:
    """Row-major probabilities with the geodetic position of every point."""

    res_x: int
    res_y: int
    values: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    grid: GridSpec | None = None

    def __post_init__(self):
        n = self.res_x * self.res_y
        for name in ("values", "lat", "lon"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).reshape(-1)
            if arr.shape != (n,):
                raise InvalidArgumentError(f"{name} has {arr.size} entries, expected {n}")
            setattr(self, name, arr)
        if np.any((self.values < 0) | (self.values > 1)) or np.isnan(self.values).any():
            raise InvalidArgumentError("raster values must lie in [0, 1]")

    @classmethod
    def from_grid(cls, grid: GridSpec, values) -> "PMLRaster":
        lat, lon = grid.geo_points()
        return cls(grid.res_x, grid.res_y, values, lat, lon, grid)

    @property
    def shape(self) -> tuple[int, int]:
        return self.res_y, self.res_x

    def image(self) -> np.ndarray:
        """Values as (rows, cols) with row 0 in the south."""
        return self.values.reshape(self.shape)


@dataclass
class TimingReport:
    estimate: float = 0.0
    codegen: float = 0.0
    solve: float = 0.0
    infer: float = 0.0
    total: float = 0.0
    locations: int = 0
    workers: int = 1

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def stage_timings(report: TimingReport) -> dict:
    return asdict(report)


# -- landscape computation


@dataclass
class _Batch:
    """Parameters of a set of locations for one compiled program."""

    probs: list
    means: np.ndarray
    stds: np.ndarray
    keys: np.ndarray

    def take(self, rows: np.ndarray) -> "_Batch":
        return _Batch([p[rows] for p in self.probs], self.means[rows], self.stds[rows], self.keys[rows])


def _template_batch(compiled: CompiledProgram, table: RelationTable, origins: dict[int, int]) -> _Batch:
    g = compiled.ground
    n = len(table)
    probs = []
    for choice in g.choices:
        r = origins.get(choice.origin)
        if r is None:
            probs.append(np.broadcast_to(np.array(choice.category_probs()), (n, choice.categories)))
        else:
            p = table.params[r, :, 0]
            probs.append(np.stack([p, np.maximum(0.0, 1.0 - p)], axis=1))
    means = np.empty((n, len(g.variables)))
    stds = np.empty((n, len(g.variables)))
    for v, var in enumerate(g.variables):
        r = origins.get(var.origin)
        if r is None:
            means[:, v], stds[:, v] = var.mean, var.std
        else:
            means[:, v], stds[:, v] = table.params[r, :, 0], table.params[r, :, 1]
    return _Batch(probs, means, stds, np.arange(n, dtype=np.int64))


def _evaluate_template(compiled: CompiledProgram, batch: _Batch, mode: InferenceMode) -> np.ndarray:
    return compiled.evaluate(batch.probs, batch.means, batch.stds, batch.keys, mode)[0]


def _evaluate_locations(rules: Program, table: RelationTable, indices: np.ndarray, mode: InferenceMode, limit: int):
    out = np.empty(len(indices))
    for n, i in enumerate(indices):
        i = int(i)
        program = rules + generate_relation_clauses(table, [i])
        try:
            result = query(program, Atom("landscape", (location_constant(i),)), mode=mode, limit=limit)
        except PromisError as exc:
            raise LocationError(i, exc) from exc
        out[n] = result.probability
    return out


def _uses_location_constants(rules: Program) -> bool:
    return any(_LOCATION_CONSTANT.match(c) for c in rules.constants())


def compute_pml(
    rules: Program,
    table: RelationTable,
    grid: GridSpec,
    plan: TilePlan | None = None,
    mode: InferenceMode | None = None,
    workers: int = 1,
    timings: TimingReport | None = None,
    limit: int = DEFAULT_LIMIT,
) -> PMLRaster:
    """Probability of ``landscape(x<i>)`` at every grid location.

    Args:
        rules: Mission rules defining ``landscape/1``.
        table: Relation parameters for every location of ``grid``.
        grid: Raster to evaluate.
        plan: Tiling; defaults to a single tile.
        mode: Inference mode shared by all locations.
        workers: Process pool size; 1 evaluates in this process.
        timings: Filled with codegen, solve and infer durations.
    """
    mode = mode or InferenceMode()
    plan = plan or tile(grid, 0)
    if table.grid is not None and table.grid != grid:
        raise ConfigurationError("relation table was estimated on a different grid")
    if len(table) != grid.size:
        raise ConfigurationError(f"relation table has {len(table)} locations but the grid has {grid.size}")
    if not rules.defines("landscape", 1):
        raise ConfigurationError("rules do not define landscape/1")
    if int(workers) != workers or workers < 1:
        raise InvalidArgumentError("workers must be a positive integer")
    covered = np.concatenate([t.indices(grid.res_x) for t in plan.tiles])
    if len(covered) != grid.size or not np.array_equal(np.sort(covered), np.arange(grid.size)):
        raise InvalidArgumentError("tile plan does not partition the grid")
    timings = timings if timings is not None else TimingReport()
    timings.locations = grid.size
    timings.workers = int(workers)

    values = np.empty(grid.size)
    tiles = [t.indices(grid.res_x) for t in plan.tiles]
    if _uses_location_constants(rules):
        # Rules name specific locations, so locations differ in shape.
        start = time.perf_counter()
        parts = _map(workers, _evaluate_locations, [(rules, table, idx, mode, limit) for idx in tiles])
        timings.infer += time.perf_counter() - start
    else:
        start = time.perf_counter()
        fragment = list(relation_clauses(table, [0]))
        program = rules + Program(tuple(c for c, _, _ in fragment))
        origins = {len(rules.clauses) + k: r for k, (_, r, _) in enumerate(fragment)}
        timings.codegen += time.perf_counter() - start
        start = time.perf_counter()
        try:
            compiled = compile_program(ground(program, Atom("landscape", (Const("x0"),))), limit)
        except PromisError as exc:
            raise LocationError(0, exc) from exc
        batch = _template_batch(compiled, table, origins)
        timings.solve += time.perf_counter() - start
        start = time.perf_counter()
        try:
            parts = _map(workers, _evaluate_template, [(compiled, batch.take(idx), mode) for idx in tiles])
        except PromisError as exc:
            raise LocationError(0, exc) from exc
        timings.infer += time.perf_counter() - start
    for idx, part in zip(tiles, parts):
        values[idx] = part
    return PMLRaster.from_grid(grid, values)


def _call(args):
    fn, rest = args
    return fn(*rest)


def _map(workers: int, fn, jobs: list) -> list:
    if workers == 1 or len(jobs) == 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_call, [(fn, job) for job in jobs]))


# -- interpolation and comparison


def _bilinear_axis(source: int, target: int):
    u = np.arange(target, dtype=np.float64) * (source - 1) / (target - 1)
    i0 = np.minimum(np.floor(u).astype(np.int64), source - 2)
    return i0, u - i0


def _bilinear(image: np.ndarray, res_x: int, res_y: int) -> np.ndarray:
    c0, fx = _bilinear_axis(image.shape[1], res_x)
    r0, fy = _bilinear_axis(image.shape[0], res_y)
    fx = fx[None, :]
    fy = fy[:, None]
    a = image[r0][:, c0]
    b = image[r0][:, c0 + 1]
    c = image[r0 + 1][:, c0]
    d = image[r0 + 1][:, c0 + 1]
    top = a * (1.0 - fx) + b * fx
    bottom = c * (1.0 - fx) + d * fx
    return top * (1.0 - fy) + bottom * fy


def interpolate(raster: PMLRaster, target_res_x: int, target_res_y: int) -> PMLRaster:
    """Bilinear upscaling with the corner points kept in place."""
    if target_res_x < raster.res_x or target_res_y < raster.res_y:
        raise InvalidArgumentError(
            f"cannot downscale {raster.res_x}x{raster.res_y} to {target_res_x}x{target_res_y}"
        )
    values = np.clip(_bilinear(raster.image(), target_res_x, target_res_y), 0.0, 1.0)
    lat = _bilinear(raster.lat.reshape(raster.shape), target_res_x, target_res_y)
    lon = _bilinear(raster.lon.reshape(raster.shape), target_res_x, target_res_y)
    grid = raster.grid.with_resolution(target_res_x, target_res_y) if raster.grid else None
    return PMLRaster(target_res_x, target_res_y, values, lat, lon, grid)


def mse(a: PMLRaster, b: PMLRaster) -> float:
    if a.shape != b.shape:
        raise InvalidArgumentError(f"raster shapes differ: {a.res_x}x{a.res_y} vs {b.res_x}x{b.res_y}")
    diff = a.values - b.values
    return float(np.mean(diff * diff))


# -- file formats


def to_csv(raster: PMLRaster) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for i in range(raster.values.size):
        row, col = divmod(i, raster.res_x)
        writer.writerow([row, col, f"{raster.lat[i]:.9f}", f"{raster.lon[i]:.9f}", f"{raster.values[i]:.6f}"])
    return out.getvalue()


def from_csv(text: str) -> PMLRaster:
    reader = csv.reader(io.StringIO(text))
    if next(reader, None) != CSV_HEADER:
        raise PromisError(f"landscape CSV header must be {','.join(CSV_HEADER)}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        try:
            r, c, lat, lon, p = rec
            rows.append((int(r), int(c), float(lat), float(lon), float(p)))
        except ValueError as exc:
            raise PromisError(f"landscape CSV line {lineno}: {exc}") from exc
    if not rows:
        raise PromisError("landscape CSV has no data rows")
    res_y = max(r for r, *_ in rows) + 1
    res_x = max(c for _, c, *_ in rows) + 1
    if len(rows) != res_x * res_y:
        raise PromisError(f"landscape CSV has {len(rows)} rows, expected {res_x * res_y}")
    values = np.full(res_x * res_y, np.nan)
    lat = np.empty(res_x * res_y)
    lon = np.empty(res_x * res_y)
    for r, c, la, lo, p in rows:
        if r < 0 or c < 0:
            raise PromisError("negative row or column in landscape CSV")
        i = r * res_x + c
        values[i], lat[i], lon[i] = p, la, lo
    if np.isnan(values).any():
        raise PromisError("landscape CSV has duplicate or missing cells")
    if np.any((values < 0) | (values > 1)):
        raise PromisError("landscape CSV has probabilities outside [0, 1]")
    return PMLRaster(res_x, res_y, values, lat, lon)


def to_geojson(raster: PMLRaster) -> str:
    features = []
    for i in range(raster.values.size):
        row, col = divmod(i, raster.res_x)
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [float(raster.lon[i]), float(raster.lat[i])]},
                "properties": {"row": row, "col": col, "probability": float(raster.values[i])},
            }
        )
    return json.dumps({"type": "FeatureCollection", "features": features}) + "\n"


def to_pgm(raster: PMLRaster, threshold: float = 0.0) -> bytes:
    """8-bit P2 image, north up; values below ``threshold`` are blanked."""
    values = np.where(raster.values < threshold, 0.0, raster.values)
    pixels = np.rint(values * 255).astype(np.int64).reshape(raster.shape)[::-1]
    return write_pgm(pixels, 255)
