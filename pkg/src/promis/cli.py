"""Command line front end: ``promis <command> ...``.

Exit codes are 0 on success, 1 for bad input data and 2 for usage or
configuration errors. Errors are printed to stderr as ``error: <message>``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from promis.config import RunConfig
from promis.errors import ConfigurationError, InvalidArgumentError, PromisError
from promis.geo import FeatureMap, GeoPoint, fetch_overpass, parse_geojson, parse_overpass
from promis.hplp import generate_relation_clauses, parse, pretty_print
from promis.inference.engine import InferenceMode
from promis.pml import (
    PMLRaster,
    TimingReport,
    compute_pml,
    from_csv,
    interpolate,
    mse,
    tile,
    to_csv,
    to_geojson,
    to_pgm,
)
from promis.relations import DISTANCE, OVER, Georef, RelationTable, estimate_relations, ingest_probability_raster
from promis.synthetic import with_operator

CONFIG_ENV = "PROMIS_CONFIG"
log = logging.getLogger("promis")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"error: {message}\n")


# -- pipeline steps


def _read_bytes(path: Path) -> bytes:
    return Path(path).read_bytes()


def _write(path: Path, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        path.write_text(data, encoding="utf-8")
    else:
        path.write_bytes(data)


def load_map(cfg: RunConfig) -> FeatureMap:
    if cfg.map_path is None:
        raise ConfigurationError("config has no map; add \"map\": {\"feature_map\": ...}")
    data = _read_bytes(cfg.map_path)
    if cfg.map_kind == "feature_map":
        fmap = FeatureMap.from_json(data)
    elif cfg.map_kind == "geojson":
        fmap = parse_geojson(data, cfg.origin)
    else:
        fmap = parse_overpass(data, cfg.origin)
    if cfg.operator:
        fmap = with_operator(fmap, cfg.grid)
    return fmap


def estimate_table(cfg: RunConfig) -> RelationTable:
    grid = cfg.grid
    declared = [r for r in cfg.relations if r.relation in (DISTANCE, OVER)]
    table = None
    if declared:
        table = estimate_relations(load_map(cfg), cfg.perturbation, grid, declared, cfg.map_samples, cfg.seed)
    for raster in cfg.rasters:
        georef = Georef.from_json(_read_bytes(raster.georef))
        unary = ingest_probability_raster(_read_bytes(raster.pgm), georef, grid, raster.name)
        table = unary if table is None else table.merge(unary)
    if table is None:
        raise ConfigurationError("config declares no relations and no rasters")
    return table


def load_program(cfg: RunConfig):
    if cfg.program is None:
        raise ConfigurationError("config has no program")
    return parse(Path(cfg.program).read_text(encoding="utf-8"))


def infer_landscape(cfg: RunConfig, table: RelationTable, timings: TimingReport) -> PMLRaster:
    grid = cfg.grid
    plan = tile(grid, cfg.tiling)
    rules = load_program(cfg)
    table = table.with_grid(grid)
    return compute_pml(rules, table, grid, plan, cfg.inference, cfg.workers, timings)


def write_landscape(cfg: RunConfig, raster: PMLRaster, timings: TimingReport) -> None:
    out = cfg.outputs
    if out.csv:
        _write(out.csv, to_csv(raster))
    if out.geojson:
        _write(out.geojson, to_geojson(raster))
    if out.pgm:
        _write(out.pgm, to_pgm(raster, out.threshold))
    if out.timings:
        _write(out.timings, timings.to_json())
    if not (out.csv or out.geojson or out.pgm):
        sys.stdout.write(to_csv(raster))


# -- commands


def _config(args) -> RunConfig:
    path = args.config or args.config_flag or os.environ.get(CONFIG_ENV)
    if not path:
        raise ConfigurationError(f"no config given (positional, --config or ${CONFIG_ENV})")
    cfg = RunConfig.load(path)
    overrides = {}
    for name in ("map_samples", "seed", "tiling", "workers"):
        if getattr(args, name, None) is not None:
            overrides[name] = getattr(args, name)
    if getattr(args, "program", None):
        overrides["program"] = Path(args.program)
    if getattr(args, "mode", None) or getattr(args, "samples", None):
        mode = cfg.inference
        overrides["inference"] = InferenceMode(
            args.mode or mode.kind, args.samples if args.samples is not None else mode.samples, mode.seed
        )
    outputs = {}
    for name in ("csv", "geojson", "pgm", "timings"):
        if getattr(args, name, None):
            outputs[name] = Path(getattr(args, name))
    if getattr(args, "threshold", None) is not None:
        outputs["threshold"] = args.threshold
    if getattr(args, "table", None):
        outputs["table"] = Path(args.table)
    if outputs:
        overrides["outputs"] = replace(cfg.outputs, **outputs)
    return cfg.with_overrides(**overrides)


def _origin(text: str) -> GeoPoint:
    try:
        lat, lon = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise InvalidArgumentError(f"--origin must be LAT,LON, got {text!r}") from exc
    return GeoPoint(lat, lon)


def cmd_ingest(args) -> int:
    origin = _origin(args.origin)
    if args.overpass:
        fmap = parse_overpass(_read_bytes(args.overpass), origin)
    else:
        fmap = parse_geojson(_read_bytes(args.geojson), origin)
    for w in fmap.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _write(args.out, fmap.to_json())
    return 0


def cmd_fetch(args) -> int:
    query = Path(args.query).read_text(encoding="utf-8")
    _write(args.out, fetch_overpass(query, args.endpoint, args.timeout))
    return 0


def cmd_estimate(args) -> int:
    cfg = _config(args)
    table = estimate_table(cfg)
    text = table.to_csv()
    target = Path(args.out) if args.out else cfg.outputs.table
    if target:
        _write(target, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_codegen(args) -> int:
    table = RelationTable.from_csv(Path(args.table).read_text(encoding="utf-8"))
    text = pretty_print(generate_relation_clauses(table))
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _table_path(cfg: RunConfig) -> Path:
    if cfg.outputs.table is None:
        raise ConfigurationError("no relation table given (--table or outputs.table)")
    return cfg.outputs.table


def cmd_infer(args) -> int:
    start = time.perf_counter()
    cfg = _config(args)
    table = RelationTable.from_csv(_table_path(cfg).read_text(encoding="utf-8"), cfg.grid)
    timings = TimingReport()
    raster = infer_landscape(cfg, table, timings)
    timings.total = time.perf_counter() - start
    write_landscape(cfg, raster, timings)
    return 0


def cmd_run(args) -> int:
    start = time.perf_counter()
    cfg = _config(args)
    timings = TimingReport()
    t0 = time.perf_counter()
    table = estimate_table(cfg)
    timings.estimate = time.perf_counter() - t0
    # Round trip through the CSV form so that `run` equals `estimate` + `infer`.
    text = table.to_csv()
    if cfg.outputs.table:
        _write(cfg.outputs.table, text)
    table = RelationTable.from_csv(text, cfg.grid)
    raster = infer_landscape(cfg, table, timings)
    timings.total = time.perf_counter() - start
    write_landscape(cfg, raster, timings)
    return 0


def _resolution(text: str) -> tuple[int, int]:
    try:
        rows, cols = (int(v) for v in text.lower().split("x"))
    except ValueError as exc:
        raise InvalidArgumentError(f"--res must be ROWSxCOLS, got {text!r}") from exc
    return rows, cols


def cmd_interpolate(args) -> int:
    rows, cols = _resolution(args.res)
    raster = from_csv(Path(args.input).read_text(encoding="utf-8"))
    _write(args.out, to_csv(interpolate(raster, cols, rows)))
    return 0


def cmd_compare(args) -> int:
    a = from_csv(Path(args.a).read_text(encoding="utf-8"))
    b = from_csv(Path(args.b).read_text(encoding="utf-8"))
    print(f"{mse(a, b):.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="promis", description="Probabilistic mission landscapes from maps and logic rules.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert Overpass or GeoJSON exports to a feature map")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--overpass", type=Path)
    src.add_argument("--geojson", type=Path)
    p.add_argument("--origin", required=True, help="LAT,LON of the local frame")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fetch", help="run an Overpass QL query and save the JSON answer")
    p.add_argument("--query", required=True, type=Path, help="file with the Overpass QL query")
    p.add_argument("--endpoint", default="https://overpass-api.de/api/interpreter")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_fetch)

    def with_config(p):
        p.add_argument("config", nargs="?", help=f"run config JSON (default ${CONFIG_ENV})")
        p.add_argument("--config", dest="config_flag", metavar="FILE")

    def with_estimate_flags(p):
        p.add_argument("--map-samples", type=int, dest="map_samples")
        p.add_argument("--seed", type=int)

    def with_infer_flags(p):
        p.add_argument("--program")
        p.add_argument("--tiling", type=int, help="split count s (4^s tiles)")
        p.add_argument("--workers", type=int)
        p.add_argument("--mode", choices=["auto", "exact", "monte-carlo"])
        p.add_argument("--samples", type=int, help="Monte Carlo samples per location")
        p.add_argument("--csv")
        p.add_argument("--geojson")
        p.add_argument("--pgm")
        p.add_argument("--timings")
        p.add_argument("--threshold", type=float, help="blank PGM values below this")

    p = sub.add_parser("estimate", help="estimate the relation table")
    with_config(p)
    with_estimate_flags(p)
    p.add_argument("--out", help="relation table CSV (default outputs.table, else stdout)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("codegen", help="print a relation table as program clauses")
    p.add_argument("--table", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_codegen)

    p = sub.add_parser("infer", help="compute the landscape from a relation table")
    with_config(p)
    with_infer_flags(p)
    p.add_argument("--table", help="relation table CSV (default outputs.table)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("run", help="estimate and infer in one go")
    with_config(p)
    with_estimate_flags(p)
    with_infer_flags(p)
    p.add_argument("--table", help="also write the relation table here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("interpolate", help="bilinear upscaling of a landscape CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--res", required=True, help="target ROWSxCOLS")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("compare", help="mean squared error between two landscape CSVs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except PromisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except BrokenPipeError:
        sys.stderr.close()
        return 0
    except OSError as exc:
        name = f": {exc.filename}" if exc.filename else ""
        print(f"error: {exc.strerror or exc}{name}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
