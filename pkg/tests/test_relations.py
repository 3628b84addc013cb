import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promis.errors import ConfigurationError, InvalidArgumentError, RasterFormatError, RelationUndefinedError
from promis.geo import POINT, POLYGON, POLYLINE, Feature, FeatureMap, GeoPoint, LocalPoint, unproject
from promis.grid import GridSpec
from promis.perturb import PerturbationModel
from promis.pgm import write_pgm
from promis.relations import (
    Georef,
    RelationSpec,
    RelationTable,
    distance_to_nearest,
    estimate_relations,
    ingest_probability_raster,
    is_over,
)

ORIGIN = GeoPoint(49.87, 8.65)
SQUARE = [[0, 0], [10, 0], [10, 10], [0, 10], [0, 0]]


def segment_map():
    return FeatureMap(ORIGIN, (Feature("s", POLYLINE, [[0, 0], [10, 0]], {"highway": "primary"}),))


def building_map():
    return FeatureMap(ORIGIN, (Feature("b", POLYGON, SQUARE, {"building": "yes"}),))


def test_distance_examples():
    assert distance_to_nearest(segment_map(), LocalPoint(0, 5), "primary") == pytest.approx(5.0)
    assert distance_to_nearest(segment_map(), LocalPoint(-3, 4), "primary") == pytest.approx(5.0)
    assert distance_to_nearest(building_map(), LocalPoint(3, 3), "building") == 0.0


def test_distance_to_points_and_polygon_boundary():
    fmap = FeatureMap(ORIGIN, (Feature("p", POINT, [[3, 4]], {"tree": "oak"}),) + building_map().features)
    assert distance_to_nearest(fmap, LocalPoint(0, 0), "oak") == pytest.approx(5.0)
    assert distance_to_nearest(fmap, LocalPoint(13, 5), "building") == pytest.approx(3.0)


def test_distance_undefined():
    with pytest.raises(RelationUndefinedError, match="park"):
        distance_to_nearest(segment_map(), LocalPoint(0, 0), "park")


def test_over_examples():
    fmap = building_map()
    assert is_over(fmap, LocalPoint(1, 1), "building")
    assert not is_over(fmap, LocalPoint(100, 100), "building")
    assert is_over(fmap, LocalPoint(10, 5), "building")
    assert not is_over(segment_map(), LocalPoint(5, 0), "primary")
    assert is_over(segment_map(), LocalPoint(5, 2), "primary", buffer_m=3)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-1, 1), st.floats(-1, 1))
def test_distance_is_1_lipschitz(x, y, dx, dy):
    fmap = FeatureMap(ORIGIN, segment_map().features + building_map().features)
    for t in ("primary", "building"):
        a = distance_to_nearest(fmap, LocalPoint(x, y), t)
        b = distance_to_nearest(fmap, LocalPoint(x + dx, y + dy), t)
        assert abs(a - b) <= np.hypot(dx, dy) + 1e-9


def test_spec_validation():
    with pytest.raises(InvalidArgumentError):
        RelationSpec("distance")
    with pytest.raises(InvalidArgumentError):
        RelationSpec("Change")
    with pytest.raises(InvalidArgumentError):
        RelationSpec("distance", "primary", buffer_m=5)
    assert RelationSpec("change").kind == "bernoulli"


def small_grid(res=5):
    return GridSpec(ORIGIN, 40.0, 40.0, res, res)


def test_zero_noise_is_degenerate():
    fmap = FeatureMap(ORIGIN, segment_map().features + building_map().features)
    decls = [RelationSpec("distance", "primary"), RelationSpec("over", "building")]
    grid = small_grid()
    table = estimate_relations(fmap, PerturbationModel(), grid, decls, 7, 0)
    east, north = grid.local_points()
    dist = table.column("distance", "primary")
    assert np.all(dist[:, 1] == 0)
    expected = [distance_to_nearest(fmap, LocalPoint(e, n), "primary") for e, n in zip(east, north)]
    assert np.allclose(dist[:, 0], expected)
    assert set(np.unique(table.column("over", "building")[:, 0])) <= {0.0, 1.0}


def test_sample_count_validation():
    decls = [RelationSpec("distance", "primary")]
    with pytest.raises(InvalidArgumentError, match="2"):
        estimate_relations(segment_map(), PerturbationModel(1, 1), small_grid(), decls, 1, 0)
    with pytest.raises(InvalidArgumentError):
        estimate_relations(segment_map(), PerturbationModel(1, 1), small_grid(), [RelationSpec("over", "primary")], 0, 0)
    with pytest.raises(RelationUndefinedError):
        estimate_relations(segment_map(), PerturbationModel(1, 1), small_grid(), [RelationSpec("distance", "park")], 5, 0)


def test_unbiased_variance_denominator():
    # a single point feature at the origin moving only east: distance from a
    # far-north location is almost linear, so check against the N-1 formula
    fmap = FeatureMap(ORIGIN, (Feature("p", POINT, [[0, 0]], {"tree": "oak"}),))
    grid = small_grid(3)
    model = PerturbationModel(2, 0)
    table = estimate_relations(fmap, model, grid, [RelationSpec("distance", "oak")], 5, 3)
    from promis.perturb import sample_maps

    samples = sample_maps(fmap, model, 3, 5)
    east, north = grid.local_points()
    d = [distance_to_nearest(s.variant, LocalPoint(east[0], north[0]), "oak") for s in samples]
    assert table.params[0, 0, 0] == pytest.approx(np.mean(d), abs=1e-9)
    assert table.params[0, 0, 1] == pytest.approx(np.std(d, ddof=1), abs=1e-9)


def test_estimate_deterministic_and_csv_roundtrip():
    fmap = FeatureMap(ORIGIN, segment_map().features + building_map().features)
    decls = [RelationSpec("distance", "primary"), RelationSpec("over", "building")]
    model = PerturbationModel(3, 3, 0.05, 0.02)
    a = estimate_relations(fmap, model, small_grid(), decls, 20, 4)
    b = estimate_relations(fmap, model, small_grid(), decls, 20, 4)
    assert a == b
    text = a.to_csv()
    assert text.splitlines()[0] == "location_index,relation,type,kind,param1,param2"
    assert text.splitlines()[2].endswith(",")  # bernoulli param2 is empty
    again = RelationTable.from_csv(text, small_grid())
    assert again.to_csv() == text
    assert np.allclose(again.params, a.params, rtol=1e-8)


def test_with_grid_size_mismatch():
    table = estimate_relations(segment_map(), PerturbationModel(), small_grid(), [RelationSpec("distance", "primary")], 2, 0)
    with pytest.raises(ConfigurationError):
        table.with_grid(small_grid(4))


def raster_setup(pixels):
    georef = Georef(ORIGIN, 10.0)
    # grid centred inside the 20 x 20 m raster that hangs south-east of ORIGIN
    centre = unproject(ORIGIN, LocalPoint(10.0, -10.0))
    grid = GridSpec(centre, 10.0, 10.0, 2, 2)
    return ingest_probability_raster(write_pgm(np.array(pixels), 255), georef, grid, "change"), grid


def test_raster_all_zero_and_all_max():
    t, _ = raster_setup([[0, 0], [0, 0]])
    assert np.all(t.column("change")[:, 0] == 0)
    t, _ = raster_setup([[255, 255], [255, 255]])
    assert np.all(t.column("change")[:, 0] == 1)


def test_raster_nearest_pixel():
    # grid points at (5,-15) (15,-15) (5,-5) (15,-5) relative to the NW corner
    t, _ = raster_setup([[255, 0], [0, 0]])
    assert t.column("change")[:, 0].tolist() == [0.0, 0.0, 1.0, 0.0]


def test_raster_outside_is_zero():
    georef = Georef(ORIGIN, 10.0)
    far = unproject(ORIGIN, LocalPoint(500, 500))
    t = ingest_probability_raster(write_pgm(np.full((2, 2), 255), 255), georef, GridSpec(far, 10, 10, 2, 2), "change")
    assert np.all(t.column("change")[:, 0] == 0)


def test_raster_errors():
    with pytest.raises(RasterFormatError):
        ingest_probability_raster(b"P7 nonsense", Georef(ORIGIN, 1.0), small_grid(), "change")
    with pytest.raises(ConfigurationError):
        Georef.from_json(json.dumps({"origin_lat": 1, "origin_lon": 2}))
    g = Georef.from_json(json.dumps({"origin_lat": 1, "origin_lon": 2, "pixel_size_m": 3, "max_value": 100}))
    assert g.max_value == 100 and g.pixel_size_m == 3.0
