"""Compare the numba and numpy distance kernels.

Usage::

    python3 benchmarks/bench_kernels.py              # kernel timings
    python3 benchmarks/bench_kernels.py --pipeline   # also a full estimate, both backends

The pipeline run starts a fresh interpreter per backend so that
``PROMIS_DISABLE_NUMBA`` takes effect at import time.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from promis import _accel
from promis.geo import GeoPoint
from promis.kernels import Geometry, distance_field_numba, distance_field_numpy
from promis.synthetic import urban_map

ORIGIN = GeoPoint(49.8728, 8.6512)

PIPELINE = """
import time
from promis.geo import GeoPoint
from promis.grid import GridSpec
from promis.perturb import PerturbationModel
from promis.relations import RelationSpec, estimate_relations
from promis.synthetic import urban_map
o = GeoPoint(49.8728, 8.6512)
fmap = urban_map(o, {features}, 1000.0, 0)
grid = GridSpec(o, 1000.0, 1000.0, {res}, {res})
decls = [RelationSpec("distance", "primary"), RelationSpec("over", "building")]
start = time.perf_counter()
estimate_relations(fmap, PerturbationModel(5, 5, 0.02, 0.02), grid, decls, {maps}, 1)
print(time.perf_counter() - start)
"""


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def kernel_rows(features: int, sizes, repeat: int):
    fmap = urban_map(ORIGIN, features, 1000.0, 0)
    geometry = Geometry.pack([f.kind for f in fmap], [f.vertices for f in fmap])
    rng = np.random.default_rng(0)
    for n in sizes:
        px, py = rng.uniform(-500, 500, (2, n))
        distance_field_numba(px[:10], py[:10], geometry)  # compile outside the timing
        t_numba = best_of(lambda: distance_field_numba(px, py, geometry), repeat)
        t_numpy = best_of(lambda: distance_field_numpy(px, py, geometry), repeat)
        yield n, t_numba, t_numpy


def pipeline_time(disable: bool, features: int, res: int, maps: int) -> float:
    env = dict(os.environ)
    if disable:
        env["PROMIS_DISABLE_NUMBA"] = "1"
    else:
        env.pop("PROMIS_DISABLE_NUMBA", None)
    code = PIPELINE.format(features=features, res=res, maps=maps)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--features", type=int, default=200)
    parser.add_argument("--sizes", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--pipeline", action="store_true", help="time estimate_relations with each backend")
    parser.add_argument("--res", type=int, default=100)
    parser.add_argument("--maps", type=int, default=20)
    args = parser.parse_args(argv)

    if not _accel.NUMBA_AVAILABLE:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1

    print(f"distance kernel, {args.features} features")
    print(f"{'points':>10} {'numba s':>10} {'numpy s':>10} {'speedup':>8}")
    for n, t_numba, t_numpy in kernel_rows(args.features, args.sizes, args.repeat):
        print(f"{n:>10d} {t_numba:>10.4f} {t_numpy:>10.4f} {t_numpy / t_numba:>7.1f}x")

    if args.pipeline:
        print(f"\nestimate_relations, {args.res}x{args.res} grid, {args.maps} maps")
        fast = pipeline_time(False, args.features, args.res, args.maps)
        slow = pipeline_time(True, args.features, args.res, args.maps)
        print(f"numba {fast:.2f} s, numpy {slow:.2f} s, speedup {slow / fast:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
