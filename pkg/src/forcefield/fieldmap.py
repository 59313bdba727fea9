"""Gridded force-field maps: GP prediction into named layers, point queries, export."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInput, NonPositiveResolution
from .fusion import FusedSample
from .gp import CenteredGp, GpModel, as_points, fit_scalar_field, fit_vector_field, predict_many
from .telemetry import GeoPoint, LocalPoint, Vec2, to_geo

LAYER_NAMES = ("depth", "wind_e", "wind_n", "wind_speed", "wind_dir",
               "current_e", "current_n", "current_speed", "current_dir")
DIRECTION_LAYERS = ("wind_dir", "current_dir")
# variance of a bearing spread uniformly over the circle, deg^2
MAX_DIR_VARIANCE = 360.0 ** 2 / 12.0


@dataclass(frozen=True)
class FieldGrid:
    origin: GeoPoint
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    resolution: float

    def __post_init__(self):
        if not self.resolution > 0.0:
            raise NonPositiveResolution(f"resolution must be positive, got {self.resolution}")
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise ValueError("empty bounding box")

    @property
    def nx(self) -> int:
        return int(math.floor((self.x_max - self.x_min) / self.resolution + 1e-9)) + 1

    @property
    def ny(self) -> int:
        return int(math.floor((self.y_max - self.y_min) / self.resolution + 1e-9)) + 1

    @property
    def xs(self) -> np.ndarray:
        return self.x_min + self.resolution * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y_min + self.resolution * np.arange(self.ny)

    def nodes(self) -> np.ndarray:
        """(nx * ny, 2) node coordinates, y outer and x inner."""
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass(frozen=True)
class FieldLayer:
    """Mean and variance on the grid, indexed ``[ix, iy]``."""

    name: str
    mean: np.ndarray
    variance: np.ndarray


@dataclass(frozen=True)
class ForceFieldModel:
    depth: CenteredGp
    wind: tuple[GpModel, GpModel]
    current: tuple[GpModel, GpModel]


@dataclass(frozen=True)
class ForceSample:
    wind: Vec2
    wind_var: tuple[float, float]
    current: Vec2
    current_var: tuple[float, float]
    depth: float
    depth_var: float


def build_grid_from_points(origin: GeoPoint, points, resolution: float,
                           margin: float = 0.0) -> FieldGrid:
    P = as_points(points)
    if P.shape[0] == 0:
        raise EmptyInput("cannot build a grid without samples")
    if not resolution > 0.0:
        raise NonPositiveResolution(f"resolution must be positive, got {resolution}")
    lo, hi = P.min(axis=0) - margin, P.max(axis=0) + margin
    return FieldGrid(origin, float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]), resolution)


def build_grid(samples: Sequence[FusedSample], resolution: float, margin: float = 0.0,
               origin: GeoPoint = GeoPoint(0.0, 0.0)) -> FieldGrid:
    return build_grid_from_points(origin, [s.pos for s in samples], resolution, margin)


def fit_force_field(samples: Sequence[FusedSample], kind: str = "matern32", budget: int = 200,
                    seed: int = 0) -> ForceFieldModel:
    """Optimise and fit the depth, wind and current GPs from fused samples."""
    if not samples:
        raise EmptyInput("no fused samples to fit")
    X = as_points([s.pos for s in samples])
    depth = fit_scalar_field(X, [s.depth for s in samples], kind, budget, seed, center=True)
    wind = fit_vector_field(X, [s.wind_world for s in samples], kind, budget, seed + 10)
    current = fit_vector_field(X, [s.current_world for s in samples], kind, budget, seed + 20)
    return ForceFieldModel(depth, wind, current)


def _vector_layers(prefix: str, e, ve, n, vn) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    speed = np.hypot(e, n)
    safe = np.where(speed > 0.0, speed, 1.0)
    # delta-method propagation of the component variances
    speed_var = np.where(speed > 0.0, (e ** 2 * ve + n ** 2 * vn) / safe ** 2, ve + vn)
    dir_var = np.where(speed > 0.0,
                       np.degrees(1.0) ** 2 * (n ** 2 * ve + e ** 2 * vn) / safe ** 4,
                       MAX_DIR_VARIANCE)
    bearing = np.mod(np.degrees(np.arctan2(e, n)), 360.0)
    bearing = np.where(bearing >= 360.0, 0.0, bearing)
    return {
        f"{prefix}_e": (e, ve),
        f"{prefix}_n": (n, vn),
        f"{prefix}_speed": (speed, speed_var),
        f"{prefix}_dir": (bearing, np.minimum(dir_var, MAX_DIR_VARIANCE)),
    }


def predict_layers(model: ForceFieldModel, points) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Flat (mean, variance) arrays for every layer at arbitrary points."""
    P = as_points(points)
    out = {"depth": model.depth.predict_many(P)}
    for prefix, (ge, gn) in (("wind", model.wind), ("current", model.current)):
        e, ve = predict_many(ge, P)
        n, vn = predict_many(gn, P)
        out.update(_vector_layers(prefix, e, ve, n, vn))
    return out


def render(model: ForceFieldModel, grid: FieldGrid) -> dict[str, FieldLayer]:
    flat = predict_layers(model, grid.nodes())
    shape = (grid.ny, grid.nx)
    return {name: FieldLayer(name, mean.reshape(shape).T.copy(), var.reshape(shape).T.copy())
            for name, (mean, var) in ((k, flat[k]) for k in LAYER_NAMES)}


def query(model: ForceFieldModel, p: LocalPoint) -> ForceSample:
    flat = predict_layers(model, p)
    v = {k: (float(m[0]), float(s[0])) for k, (m, s) in flat.items()}
    return ForceSample(
        wind=Vec2(v["wind_e"][0], v["wind_n"][0]),
        wind_var=(v["wind_e"][1], v["wind_n"][1]),
        current=Vec2(v["current_e"][0], v["current_n"][0]),
        current_var=(v["current_e"][1], v["current_n"][1]),
        depth=v["depth"][0],
        depth_var=v["depth"][1],
    )


def _export_value(name: str, value: float, met_convention: bool) -> float:
    if met_convention and name in DIRECTION_LAYERS:
        value = math.fmod(value + 180.0, 360.0)
    return float(value)


def _rows(grid: FieldGrid, layers: dict[str, FieldLayer], met_convention: bool):
    names = [n for n in LAYER_NAMES if n in layers] + [n for n in layers if n not in LAYER_NAMES]
    for iy, y in enumerate(grid.ys):
        for ix, x in enumerate(grid.xs):
            geo = to_geo(grid.origin, LocalPoint(float(x), float(y)))
            values = {}
            for n in names:
                values[n] = _export_value(n, layers[n].mean[ix, iy], met_convention)
                values[f"{n}_var"] = float(layers[n].variance[ix, iy])
            yield float(x), float(y), geo, names, values


def export_csv(grid: FieldGrid, layers: dict[str, FieldLayer], path: str | os.PathLike,
               met_convention: bool = False) -> None:
    """One row per node, y outer then x inner; means then ``_var`` columns."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header_done = False
        for x, y, geo, names, values in _rows(grid, layers, met_convention):
            cols = list(names) + [f"{n}_var" for n in names]
            if not header_done:
                w.writerow(["x", "y", "lat", "lon"] + cols)
                header_done = True
            w.writerow([repr(v) for v in (x, y, geo.lat, geo.lon)] + [repr(values[c]) for c in cols])


def read_map_csv(path: str | os.PathLike) -> list[dict[str, float]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def export_geojson(grid: FieldGrid, layers: dict[str, FieldLayer], path: str | os.PathLike,
                   met_convention: bool = False) -> None:
    features = []
    for x, y, geo, names, values in _rows(grid, layers, met_convention):
        props = {"x": x, "y": y}
        props.update(values)
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [geo.lon, geo.lat]},
            "properties": props,
        })
    doc = {"type": "FeatureCollection", "features": features}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
