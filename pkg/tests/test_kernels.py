import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promis import _accel
from promis.geo import POINT, POLYGON, POLYLINE
from promis.kernels import Geometry, distance_field_numba, distance_field_numpy

SQUARE = np.array([[0, 0], [10, 0], [10, 10], [0, 10], [0, 0]], dtype=float)


def geometry():
    return Geometry.pack(
        [POLYLINE, POLYGON, POINT],
        [np.array([[-20.0, -5.0], [-5.0, 30.0], [25.0, 31.0]]), SQUARE, np.array([[40.0, -7.0]])],
    )


def test_polyline_examples():
    g = Geometry.pack([POLYLINE], [np.array([[0.0, 0.0], [10.0, 0.0]])])
    d, inside = distance_field_numpy(np.array([0.0, -3.0]), np.array([5.0, 4.0]), g)
    assert np.allclose(d, [5.0, 5.0]) and not inside.any()


def test_polygon_inside_and_boundary():
    g = Geometry.pack([POLYGON], [SQUARE])
    d, inside = distance_field_numpy(np.array([1.0, 10.0, 100.0]), np.array([1.0, 5.0, 100.0]), g)
    assert inside.tolist() == [True, True, False]


@pytest.mark.skipif(not _accel.NUMBA_AVAILABLE, reason="numba not installed")
@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(-60, 60), st.floats(-60, 60)), min_size=1, max_size=50))
def test_numba_matches_numpy(points):
    px, py = np.array(points).T.copy()
    d1, in1 = distance_field_numba(px, py, geometry())
    d2, in2 = distance_field_numpy(px, py, geometry())
    assert np.allclose(d1, d2, rtol=0, atol=1e-9)
    assert np.array_equal(in1, in2)


def test_numpy_path_on_a_grid():
    xs, ys = np.meshgrid(np.linspace(-50, 50, 41), np.linspace(-50, 50, 41))
    d, inside = distance_field_numpy(xs.ravel(), ys.ravel(), geometry())
    assert np.all(d >= 0) and inside.sum() > 0


def test_env_var_selects_numpy_fallback():
    import os
    import subprocess
    import sys

    code = "from promis import _accel; print(_accel.USE_NUMBA)"
    env = dict(os.environ, PROMIS_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"


def test_benchmark_script_runs(capsys):
    import importlib.util
    from pathlib import Path

    path = Path(__file__).parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    assert bench.main(["--features", "20", "--sizes", "200", "--repeat", "1"]) == 0
    assert "speedup" in capsys.readouterr().out
