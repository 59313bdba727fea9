"""End-to-end batch processing: log -> aligned tuples -> fused samples -> maps."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import PipelineConfig
from .fieldmap import (ForceFieldModel, build_grid_from_points, export_csv, export_geojson,
                       fit_force_field, render)
from .fusion import FusedSample, fuse, write_fused_csv
from .gp import (Dataset, as_points, default_init, fit, load_model, log_marginal_likelihood,
                 optimize_hyperparams, predict_many, save_model)
from .logio import MissionLog, export_kml, parse_log, write_log
from .simulate import simulate_run
from .sync import align
from .telemetry import GeoPoint

log = logging.getLogger(__name__)

SCALAR_PHENOMENA = ("depth", "wind_e", "wind_n", "current_e", "current_n")
MODEL_FILES = {name: f"{name}.json" for name in SCALAR_PHENOMENA}
MODELS_META = "models.json"


class StageError(Exception):
    """Failure inside a named pipeline stage; ``code`` is the CLI exit code."""

    def __init__(self, stage: str, message: str, code: int):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.code = code


def phenomenon_values(samples: Sequence[FusedSample], name: str) -> np.ndarray:
    getters = {
        "depth": lambda s: s.depth,
        "wind_e": lambda s: s.wind_world.e,
        "wind_n": lambda s: s.wind_world.n,
        "current_e": lambda s: s.current_world.e,
        "current_n": lambda s: s.current_world.n,
    }
    return np.array([getters[name](s) for s in samples], dtype=float)


def max_gaps(ml: MissionLog) -> dict[str, float]:
    """Largest inter-sample interval per non-empty stream."""
    out = {}
    for name, samples in ml.streams().items():
        if len(samples) >= 2:
            t = np.array([s.t for s in samples])
            out[name] = float(np.max(np.diff(t)))
        elif samples:
            out[name] = 0.0
    return out


# ------------------------------------------------------------ models I/O


def save_models(model: ForceFieldModel, origin: GeoPoint, out_dir: str | os.PathLike) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    parts = {"depth": model.depth, "wind_e": model.wind[0], "wind_n": model.wind[1],
             "current_e": model.current[0], "current_n": model.current[1]}
    for name, m in parts.items():
        save_model(m, out / MODEL_FILES[name])
    meta = {"format": "forcefield-models", "version": 1,
            "origin": [origin.lat, origin.lon], "files": MODEL_FILES}
    (out / MODELS_META).write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")


def load_models(model_dir: str | os.PathLike) -> tuple[ForceFieldModel, GeoPoint]:
    d = Path(model_dir)
    meta = json.loads((d / MODELS_META).read_text(encoding="utf-8"))
    if meta.get("format") != "forcefield-models":
        raise ValueError(f"{d} is not a forcefield model directory")
    m = {name: load_model(d / fname) for name, fname in meta["files"].items()}
    model = ForceFieldModel(m["depth"], (m["wind_e"].model, m["wind_n"].model),
                            (m["current_e"].model, m["current_n"].model))
    return model, GeoPoint(*meta["origin"])


def training_points(model: ForceFieldModel) -> np.ndarray:
    return np.vstack([model.depth.model.data.X, model.wind[0].data.X, model.current[0].data.X])


# ---------------------------------------------------------- kernel table


@dataclass(frozen=True)
class KernelScore:
    kernel: str
    phenomenon: str
    rmse: float
    lml: float
    amplitude: float
    lengthscale: float
    noise: float


def split_indices(n: int, seed: int, test_fraction: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic shuffled train/test split."""
    perm = np.random.default_rng(seed).permutation(n)
    n_test = max(1, int(round(test_fraction * n))) if n > 1 else 0
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def compare_kernels(samples: Sequence[FusedSample], kernels: Sequence[str], budget: int,
                    seed: int, phenomena: Sequence[str] = SCALAR_PHENOMENA) -> list[KernelScore]:
    """Held-out RMSE and training LML for every kernel on every phenomenon."""
    X = as_points([s.pos for s in samples])
    train, test = split_indices(len(samples), seed)
    rows = []
    for kind in kernels:
        for j, name in enumerate(phenomena):
            y = phenomenon_values(samples, name)
            offset = float(np.mean(y[train])) if name == "depth" else 0.0
            data = Dataset(X[train], y[train] - offset)
            spec = optimize_hyperparams(data, kind, default_init(data, kind), budget, seed + j)
            m = fit(data, spec)
            mean, _ = predict_many(m, X[test])
            rmse = float(np.sqrt(np.mean((mean + offset - y[test]) ** 2))) if len(test) else math.nan
            rows.append(KernelScore(spec.kind, name, rmse, log_marginal_likelihood(m),
                                    spec.amplitude, spec.lengthscale, spec.noise))
    return rows


def write_kernel_table(rows: Sequence[KernelScore], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kernel", "phenomenon", "rmse", "lml", "amplitude", "lengthscale", "noise"])
        for r in rows:
            w.writerow([r.kernel, r.phenomenon] +
                       [repr(float(v)) for v in (r.rmse, r.lml, r.amplitude, r.lengthscale, r.noise)])


def read_kernel_table(path: str | os.PathLike) -> list[KernelScore]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [KernelScore(r["kernel"], r["phenomenon"],
                            *(float(r[k]) for k in ("rmse", "lml", "amplitude", "lengthscale", "noise")))
                for r in csv.DictReader(fh)]


# -------------------------------------------------------------- pipeline


@dataclass(frozen=True)
class PipelineResult:
    out_dir: Path
    n_tuples: int
    artifacts: dict[str, Path]


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StageError("setup", str(exc), 3) from None
    art: dict[str, Path] = {}

    if cfg.scenario is not None:
        ml = simulate_run(cfg.scenario)
        art["log"] = out / "mission.log"
        write_log(ml, art["log"])
    else:
        try:
            ml = parse_log(cfg.log)
        except OSError as exc:
            raise StageError("ingest", str(exc), 3) from None
        except ValueError as exc:
            raise StageError("ingest", str(exc), 2) from None
    art["kml"] = out / "track.kml"
    export_kml(ml, art["kml"])

    tuples = align(ml, cfg.slop)
    samples = fuse(tuples, ml.origin)
    log.info("aligned %d tuples from %d poses", len(tuples), len(ml.pose))
    if not samples:
        raise StageError("sync", "no complete sensor tuples; try a larger slop", 4)
    art["fused"] = out / "fused.csv"
    write_fused_csv(samples, ml.origin, art["fused"])

    try:
        model = fit_force_field(samples, cfg.kernel, cfg.budget, cfg.seed)
    except ArithmeticError as exc:
        raise StageError("fit", str(exc), 4) from None
    art["models"] = out / "models"
    save_models(model, ml.origin, art["models"])

    grid = build_grid_from_points(ml.origin, [s.pos for s in samples], cfg.resolution, cfg.margin)
    layers = render(model, grid)
    art["map_csv"] = out / "map.csv"
    art["map_geojson"] = out / "map.geojson"
    export_csv(grid, layers, art["map_csv"], cfg.met_convention)
    export_geojson(grid, layers, art["map_geojson"], cfg.met_convention)

    if cfg.compare_kernels:
        try:
            rows = compare_kernels(samples, cfg.compare_kernels, cfg.budget, cfg.seed)
        except ArithmeticError as exc:
            raise StageError("kernels", str(exc), 4) from None
        art["kernels"] = out / "kernels.csv"
        write_kernel_table(rows, art["kernels"])
    return PipelineResult(out, len(tuples), art)
