import json

import numpy as np
import pytest

from forcefield.errors import EmptyInput, NonPositiveResolution
from forcefield.fieldmap import (
    LAYER_NAMES,
    FieldGrid,
    ForceFieldModel,
    build_grid,
    build_grid_from_points,
    export_csv,
    export_geojson,
    fit_force_field,
    query,
    read_map_csv,
    render,
)
from forcefield.fusion import FusedSample
from forcefield.gp import CenteredGp, Dataset, KernelSpec, fit
from forcefield.simulate import VortexField
from forcefield.telemetry import LocalPoint, Vec2

from scenarios import ORIGIN

K = KernelSpec("matern32", amplitude=1.0, lengthscale=15.0, noise=0.01)


def model_from(X, wind, current, depth, k=K):
    """Force-field model with fixed hyperparameters (no optimisation)."""
    X = np.asarray(X, dtype=float)
    W, C, D = (np.asarray(a, dtype=float) for a in (wind, current, depth))
    off = float(np.mean(D))
    return ForceFieldModel(CenteredGp(fit(Dataset(X, D - off), k), off),
                           (fit(Dataset(X, W[:, 0]), k), fit(Dataset(X, W[:, 1]), k)),
                           (fit(Dataset(X, C[:, 0]), k), fit(Dataset(X, C[:, 1]), k)))


def grid_points(lo=0.0, hi=100.0, n=11):
    g = np.linspace(lo, hi, n)
    return np.array([(x, y) for y in g for x in g])


@pytest.fixture(scope="module")
def constant_model():
    X = grid_points()
    n = len(X)
    return model_from(X, np.tile([2.0, 0.0], (n, 1)), np.tile([0.0, -1.0], (n, 1)), np.full(n, 4.0))


@pytest.fixture(scope="module")
def vortex_model():
    X = grid_points(n=15)
    v = VortexField(LocalPoint(50.0, 50.0), 1.5, 25.0)
    C = [(c.e, c.n) for c in (v.at(LocalPoint(*p)) for p in X)]
    n = len(X)
    rng = np.random.default_rng(4)
    return model_from(X, np.tile([1.0, 1.0], (n, 1)), C, 3.0 + 0.1 * rng.standard_normal(n))


class TestGrid:
    def test_single_point(self):
        g = build_grid_from_points(ORIGIN, [(0.0, 0.0)], 1.0)
        assert (g.nx, g.ny) == (1, 1)

    def test_hundred_metres(self):
        g = build_grid_from_points(ORIGIN, [(0.0, 0.0), (100.0, 100.0)], 5.0)
        assert (g.nx, g.ny) == (21, 21)

    def test_margin(self):
        g = build_grid_from_points(ORIGIN, [(0.0, 0.0), (100.0, 100.0)], 5.0, margin=10.0)
        assert (g.nx, g.ny) == (25, 25)
        assert (g.x_min, g.y_max) == (-10.0, 110.0)

    def test_from_fused_samples(self):
        s = [FusedSample(0.0, LocalPoint(x, y), Vec2(0, 0), Vec2(0, 0), 1.0, 0.0, 0.0)
             for x, y in [(0.0, 0.0), (10.0, 4.0)]]
        g = build_grid(s, 2.0, origin=ORIGIN)
        assert (g.nx, g.ny) == (6, 3)

    def test_errors(self):
        with pytest.raises(EmptyInput):
            build_grid_from_points(ORIGIN, [], 1.0)
        with pytest.raises(NonPositiveResolution):
            build_grid_from_points(ORIGIN, [(0.0, 0.0)], 0.0)
        with pytest.raises(NonPositiveResolution):
            FieldGrid(ORIGIN, 0, 1, 0, 1, -2.0)

    def test_node_order(self):
        g = FieldGrid(ORIGIN, 0.0, 2.0, 0.0, 1.0, 1.0)
        assert g.nodes().tolist() == [[0, 0], [1, 0], [2, 0], [0, 1], [1, 1], [2, 1]]


class TestRender:
    def test_layer_shapes_and_constant_values(self, constant_model):
        g = FieldGrid(ORIGIN, 10.0, 90.0, 20.0, 80.0, 10.0)
        layers = render(constant_model, g)
        assert tuple(layers) == LAYER_NAMES
        for layer in layers.values():
            assert layer.mean.shape == layer.variance.shape == (g.nx, g.ny)
            assert np.all(layer.variance >= 0.0)
        # fitted values shrink slightly toward the zero prior, hence the tolerance
        assert np.allclose(layers["wind_e"].mean, 2.0, atol=0.02)
        assert np.allclose(layers["wind_dir"].mean, 90.0, atol=1.0)
        assert np.allclose(layers["current_dir"].mean, 180.0, atol=1.0)
        assert np.allclose(layers["depth"].mean, 4.0, atol=1e-9)

    def test_pure(self, vortex_model):
        g = FieldGrid(ORIGIN, 0.0, 100.0, 0.0, 100.0, 5.0)
        a, b = render(vortex_model, g), render(vortex_model, g)
        for name in LAYER_NAMES:
            assert np.array_equal(a[name].mean, b[name].mean)
            assert np.array_equal(a[name].variance, b[name].variance)

    def test_ranges(self, vortex_model):
        layers = render(vortex_model, FieldGrid(ORIGIN, -50.0, 150.0, -50.0, 150.0, 5.0))
        for name in ("wind_dir", "current_dir"):
            assert np.all((layers[name].mean >= 0.0) & (layers[name].mean < 360.0))
        for name in ("wind_speed", "current_speed"):
            assert np.all(layers[name].mean >= 0.0)

    def test_vortex_circulation(self, vortex_model):
        g = FieldGrid(ORIGIN, 0.0, 100.0, 0.0, 100.0, 10.0)
        layers = render(vortex_model, g)
        # eight cells on a ring of radius 20-30 m around the core at (50, 50)
        cells = [(7, 5), (7, 7), (5, 7), (3, 7), (3, 5), (3, 3), (5, 3), (7, 3)]
        for ix, iy in cells:
            dx, dy = g.xs[ix] - 50.0, g.ys[iy] - 50.0
            ccw_bearing = np.degrees(np.arctan2(-dy, dx)) % 360.0  # bearing of (-dy, dx)
            diff = (layers["current_dir"].mean[ix, iy] - ccw_bearing + 180.0) % 360.0 - 180.0
            assert abs(diff) < 20.0


class TestQuery:
    def test_matches_grid_node(self, vortex_model):
        g = FieldGrid(ORIGIN, 0.0, 100.0, 0.0, 100.0, 10.0)
        layers = render(vortex_model, g)
        for ix, iy in [(0, 0), (3, 8), (10, 10)]:
            q = query(vortex_model, LocalPoint(float(g.xs[ix]), float(g.ys[iy])))
            assert abs(q.current.e - layers["current_e"].mean[ix, iy]) <= 1e-12
            assert abs(q.current.n - layers["current_n"].mean[ix, iy]) <= 1e-12
            assert abs(q.depth - layers["depth"].mean[ix, iy]) <= 1e-12
            assert abs(q.wind_var[0] - layers["wind_e"].variance[ix, iy]) <= 1e-12

    def test_prior_reversion(self, vortex_model):
        q = query(vortex_model, LocalPoint(1e5, -1e5))
        assert q.wind.norm() == pytest.approx(0.0, abs=1e-12)
        assert q.current.norm() == pytest.approx(0.0, abs=1e-12)
        assert q.depth == pytest.approx(vortex_model.depth.offset, abs=1e-12)
        assert q.depth_var == pytest.approx(K.amplitude)
        assert q.wind_var == pytest.approx((K.amplitude, K.amplitude))

    def test_near_data(self, vortex_model):
        v = VortexField(LocalPoint(50.0, 50.0), 1.5, 25.0)
        p = LocalPoint(50.0 + 100 / 14 * 3, 50.0)
        q = query(vortex_model, p)
        assert (q.current - v.at(p)).norm() < 0.1


class TestExport:
    def _layers(self, model, g):
        return render(model, g)

    def test_csv_line_counts(self, tmp_path, constant_model):
        for g, lines in [(FieldGrid(ORIGIN, 0, 0, 0, 0, 1.0), 2),
                         (FieldGrid(ORIGIN, 0, 100, 0, 100, 5.0), 442)]:
            export_csv(g, render(constant_model, g), tmp_path / "m.csv")
            data = (tmp_path / "m.csv").read_bytes()
            assert data.count(b"\n") == lines and b"\r" not in data

    def test_csv_header_and_round_trip(self, tmp_path, vortex_model):
        g = FieldGrid(ORIGIN, 0.0, 40.0, 0.0, 30.0, 10.0)
        layers = render(vortex_model, g)
        export_csv(g, layers, tmp_path / "m.csv")
        header = (tmp_path / "m.csv").read_text().splitlines()[0].split(",")
        assert header[:4 + len(LAYER_NAMES)] == ["x", "y", "lat", "lon"] + list(LAYER_NAMES)
        rows = read_map_csv(tmp_path / "m.csv")
        assert [(r["x"], r["y"]) for r in rows] == [tuple(p) for p in g.nodes().tolist()]
        for r in rows:
            ix, iy = int(round(r["x"] / 10)), int(round(r["y"] / 10))
            for name in LAYER_NAMES:
                assert abs(r[name] - layers[name].mean[ix, iy]) <= 1e-6
                assert abs(r[name + "_var"] - layers[name].variance[ix, iy]) <= 1e-6

    def test_geojson(self, tmp_path, vortex_model):
        g = FieldGrid(ORIGIN, 0.0, 40.0, 0.0, 30.0, 10.0)
        layers = render(vortex_model, g)
        export_geojson(g, layers, tmp_path / "m.geojson")
        doc = json.loads((tmp_path / "m.geojson").read_text())
        assert doc["type"] == "FeatureCollection"
        feats = doc["features"]
        assert len(feats) == g.nx * g.ny
        keys = {frozenset(f["properties"]) for f in feats}
        assert len(keys) == 1
        assert set(LAYER_NAMES) | {n + "_var" for n in LAYER_NAMES} <= next(iter(keys))
        lon, lat = feats[0]["geometry"]["coordinates"]
        assert (lat, lon) == pytest.approx((ORIGIN.lat, ORIGIN.lon))

    def test_single_cell_geojson(self, tmp_path, constant_model):
        g = FieldGrid(ORIGIN, 5, 5, 5, 5, 1.0)
        export_geojson(g, render(constant_model, g), tmp_path / "one.geojson")
        assert len(json.loads((tmp_path / "one.geojson").read_text())["features"]) == 1

    def test_csv_geojson_agree(self, tmp_path, vortex_model):
        g = FieldGrid(ORIGIN, 0.0, 100.0, 0.0, 100.0, 10.0)
        layers = render(vortex_model, g)
        export_csv(g, layers, tmp_path / "m.csv")
        export_geojson(g, layers, tmp_path / "m.geojson")
        rows = read_map_csv(tmp_path / "m.csv")
        feats = json.loads((tmp_path / "m.geojson").read_text())["features"]
        assert len(rows) == len(feats)
        for r, f in zip(rows, feats):
            lon, lat = f["geometry"]["coordinates"]
            assert abs(r["lat"] - lat) <= 1e-6 and abs(r["lon"] - lon) <= 1e-6
            for k, v in f["properties"].items():
                assert abs(r[k] - v) <= 1e-6

    def test_met_convention(self, tmp_path, constant_model):
        g = FieldGrid(ORIGIN, 50, 50, 50, 50, 1.0)
        layers = render(constant_model, g)
        export_csv(g, layers, tmp_path / "flow.csv")
        export_csv(g, layers, tmp_path / "met.csv", met_convention=True)
        (flow,), (met,) = read_map_csv(tmp_path / "flow.csv"), read_map_csv(tmp_path / "met.csv")
        assert met["wind_dir"] == pytest.approx((flow["wind_dir"] + 180.0) % 360.0)
        assert met["current_dir"] == pytest.approx((flow["current_dir"] + 180.0) % 360.0)
        assert 0.0 <= met["current_dir"] < 360.0
        assert met["wind_speed"] == flow["wind_speed"]


def test_fit_force_field_smoke():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 50, (40, 2))
    samples = [FusedSample(float(i), LocalPoint(*p), Vec2(2.0, 0.0), Vec2(0.0, 1.0), 3.0 + 0.01 * p[0],
                           1.0, 0.0) for i, p in enumerate(X)]
    m = fit_force_field(samples, "matern32", budget=40)
    q = query(m, LocalPoint(25.0, 25.0))
    assert q.wind.e == pytest.approx(2.0, abs=0.05)
    assert q.depth == pytest.approx(3.25, abs=0.05)
    with pytest.raises(EmptyInput):
        fit_force_field([], "matern32")
