"""Zero-mean Gaussian Process regression over 2-D local coordinates.

Exact inference through a Cholesky factor of the observation covariance
``K(X, X) + noise * I``. Kernels are isotropic and parameterised by an
output variance (``amplitude``), a ``lengthscale`` in meters and an
observation ``noise`` variance:

=====================  ==============================================
``matern32``           a * (1 + sqrt(3) r / l) * exp(-sqrt(3) r / l)
``sqexp``              a * exp(-r^2 / (2 l^2))   (aka ExpQuad / RBF)
``exponential``        a * exp(-r / l)           (Matern 1/2)
``linear``             a * <x, x'>               (lengthscale unused)
=====================  ==============================================

Hyperparameters are fitted by maximising the log marginal likelihood
with a budgeted multi-start Nelder-Mead search in log-parameter space.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from .errors import DimensionMismatch, NotPositiveDefinite

KINDS = ("linear", "sqexp", "exponential", "matern32")
ALIASES = {
    "linear": "linear",
    "sqexp": "sqexp",
    "squaredexponential": "sqexp",
    "squared_exponential": "sqexp",
    "expquad": "sqexp",
    "rbf": "sqexp",
    "exponential": "exponential",
    "exp": "exponential",
    "matern12": "exponential",
    "matern32": "matern32",
    "matern": "matern32",
}
STATIONARY = ("sqexp", "exponential", "matern32")

JITTER_LADDER = (1e-9, 1e-6, 1e-3)
SQRT3 = math.sqrt(3.0)
LOG_2PI = math.log(2.0 * math.pi)

# log-space box for the optimiser
_LOG_MIN = math.log(1e-8)
_LOG_MAX = math.log(1e8)

MODEL_FORMAT = "forcefield-gp"
MODEL_VERSION = 1


def kernel_kind(name: str) -> str:
    try:
        return ALIASES[name.strip().lower().replace("-", "").replace(" ", "")]
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; choose from {', '.join(KINDS)}") from None


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    amplitude: float = 1.0
    lengthscale: float = 10.0
    noise: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", kernel_kind(self.kind))
        for name in ("amplitude", "lengthscale", "noise"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.amplitude <= 0.0 or self.lengthscale <= 0.0 or self.noise < 0.0:
            raise ValueError(f"invalid kernel parameters {self}")

    @property
    def stationary(self) -> bool:
        return self.kind in STATIONARY


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = as_points(self.X)
        Y = np.asarray(self.Y, dtype=float).reshape(-1)
        if X.shape[0] != Y.shape[0]:
            raise DimensionMismatch(f"{X.shape[0]} inputs but {Y.shape[0]} targets")
        if X.shape[0] < 1:
            raise DimensionMismatch("a dataset needs at least one point")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    def __len__(self) -> int:
        return self.Y.shape[0]


@dataclass(frozen=True)
class GpModel:
    data: Dataset
    kernel: KernelSpec
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0


@dataclass(frozen=True)
class Prediction:
    mean: float
    variance: float


def as_points(p) -> np.ndarray:
    """Accept LocalPoint objects, (x, y) pairs or an (n, 2) array."""
    if isinstance(p, np.ndarray):
        arr = p.astype(float, copy=False)
    elif isinstance(p, (tuple, list)) and len(p) == 2 and all(np.isscalar(v) for v in p):
        arr = np.array([p], dtype=float)
    else:
        seq = list(p) if not hasattr(p, "x") else [p]
        arr = np.array([(q.x, q.y) if hasattr(q, "x") else tuple(q) for q in seq], dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 2)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DimensionMismatch(f"expected (n, 2) points, got shape {arr.shape}")
    return arr


def _from_geometry(k: KernelSpec, r: np.ndarray | None, dot: np.ndarray | None) -> np.ndarray:
    if k.kind == "linear":
        return k.amplitude * dot
    if k.kind == "matern32":
        s = r * (SQRT3 / k.lengthscale)
        out = np.exp(-s)
        s += 1.0
        s *= k.amplitude
        out *= s
        return out
    if k.kind == "sqexp":
        out = np.square(r * (1.0 / k.lengthscale))
        out *= -0.5
    else:
        out = r * (-1.0 / k.lengthscale)
    np.exp(out, out=out)
    out *= k.amplitude
    return out


def kernel_matrix(k: KernelSpec, A, B) -> np.ndarray:
    A, B = as_points(A), as_points(B)
    if k.kind == "linear":
        return _from_geometry(k, None, A @ B.T)
    return _from_geometry(k, cdist(A, B), None)


def kernel_diag(k: KernelSpec, A) -> np.ndarray:
    A = as_points(A)
    if k.kind == "linear":
        return k.amplitude * np.einsum("ij,ij->i", A, A)
    return np.full(A.shape[0], k.amplitude)


def kernel_eval(k: KernelSpec, a, b) -> float:
    return float(kernel_matrix(k, a, b)[0, 0])


def _cholesky(C: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky with a jitter ladder relative to the mean diagonal."""
    scale = max(float(np.mean(np.diag(C))), 1e-300)
    n = C.shape[0]
    for jitter in (0.0,) + JITTER_LADDER:
        try:
            L = cholesky(C + (jitter * scale) * np.eye(n) if jitter else C,
                         lower=True, check_finite=False)
        except LinAlgError:
            continue
        if np.all(np.diag(L) > 0.0) and np.all(np.isfinite(L)):
            return L, jitter * scale
    raise NotPositiveDefinite(f"covariance of {n} points is not positive definite "
                              f"after jitter {JITTER_LADDER[-1]:g}")


def _assemble(data: Dataset, k: KernelSpec, K: np.ndarray) -> GpModel:
    K.flat[:: len(data) + 1] += k.noise  # K is always a fresh array here
    L, jitter = _cholesky(K)
    alpha = cho_solve((L, True), data.Y, check_finite=False)
    return GpModel(data, k, L, alpha, jitter)


def fit(data: Dataset, k: KernelSpec) -> GpModel:
    return _assemble(data, k, kernel_matrix(k, data.X, data.X))


def predict_many(m: GpModel, W) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and latent variance at every row of ``W``."""
    W = as_points(W)
    Ks = kernel_matrix(m.kernel, W, m.data.X)
    mean = Ks @ m.alpha
    v = solve_triangular(m.chol, Ks.T, lower=True)
    var = kernel_diag(m.kernel, W) - np.einsum("ij,ij->j", v, v)
    return mean, np.maximum(var, 0.0)


def predict(m: GpModel, w) -> Prediction:
    mean, var = predict_many(m, w)
    return Prediction(float(mean[0]), float(var[0]))


def log_marginal_likelihood(m: GpModel) -> float:
    n = len(m.data)
    return float(-0.5 * m.data.Y @ m.alpha - np.sum(np.log(np.diag(m.chol))) - 0.5 * n * LOG_2PI)


# ---------------------------------------------------------- optimisation


def _pack(k: KernelSpec) -> np.ndarray:
    noise = max(k.noise, 1e-8)
    if k.kind == "linear":
        return np.log([k.amplitude, noise])
    return np.log([k.amplitude, k.lengthscale, noise])


def _unpack(kind: str, theta: np.ndarray, template: KernelSpec) -> KernelSpec:
    p = np.exp(np.clip(theta, _LOG_MIN, _LOG_MAX))
    if kind == "linear":
        return KernelSpec(kind, float(p[0]), template.lengthscale, float(p[1]))
    return KernelSpec(kind, float(p[0]), float(p[1]), float(p[2]))


class _BudgetExhausted(Exception):
    pass


class _Objective:
    """Negative LML with an evaluation budget and best-so-far tracking."""

    def __init__(self, data: Dataset, kind: str, template: KernelSpec, budget: int):
        self.data = data
        self.kind = kind
        self.template = template
        self.budget = budget
        self.calls = 0
        self.best_spec: KernelSpec | None = None
        self.best_lml = -math.inf
        if kind == "linear":
            self.geom = (None, data.X @ data.X.T)
        else:
            self.geom = (cdist(data.X, data.X), None)

    def lml(self, spec: KernelSpec) -> float:
        if self.calls >= self.budget:
            raise _BudgetExhausted
        self.calls += 1
        try:
            m = _assemble(self.data, spec, _from_geometry(spec, *self.geom))
            value = log_marginal_likelihood(m)
        except NotPositiveDefinite:
            value = -math.inf
        if not math.isfinite(value):
            value = -math.inf
        if value > self.best_lml:
            self.best_lml, self.best_spec = value, spec
        return value

    def __call__(self, theta: np.ndarray) -> float:
        value = self.lml(_unpack(self.kind, theta, self.template))
        return 1e300 if value == -math.inf else -value


def optimize_hyperparams(data: Dataset, kind: str, init: KernelSpec, budget: int = 200,
                         seed: int = 0, starts: int | None = None) -> KernelSpec:
    """Maximise the log marginal likelihood starting from ``init``.

    ``budget`` counts LML evaluations, the evaluation of ``init`` included.
    The first start is ``init`` itself; further starts are seeded
    perturbations of it in log space. The result never scores below
    ``init``.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    kind = kernel_kind(kind)
    init = replace(init, kind=kind)
    obj = _Objective(data, kind, init, budget)
    obj.lml(init)
    remaining = budget - 1
    if starts is None:
        starts = max(1, min(3, remaining // 80))
    rng = np.random.default_rng(seed)
    x0 = _pack(init)
    per_start = remaining // starts if starts else 0
    for s in range(starts):
        if per_start < len(x0) + 2:
            break
        start = x0 if s == 0 else x0 + rng.normal(0.0, 1.0, size=x0.shape)
        simplex = np.vstack([start] + [start + 0.7 * e for e in np.eye(len(x0))])
        try:
            minimize(obj, start, method="Nelder-Mead",
                     options={"initial_simplex": simplex, "maxfev": per_start,
                              "xatol": 1e-4, "fatol": 1e-6})
        except _BudgetExhausted:
            pass
    return obj.best_spec


def default_init(data: Dataset, kind: str) -> KernelSpec:
    """Data-driven starting point for the optimiser."""
    kind = kernel_kind(kind)
    power = max(float(np.mean(data.Y ** 2)), 1e-6)
    extent = float(np.max(np.ptp(data.X, axis=0))) if len(data) > 1 else 1.0
    lengthscale = max(0.25 * extent, 1.0)
    if kind == "linear":
        spread = max(float(np.mean(np.sum(data.X ** 2, axis=1))), 1.0)
        return KernelSpec(kind, power / spread, lengthscale, 0.1 * power)
    return KernelSpec(kind, power, lengthscale, 0.1 * power)


def fit_optimized(data: Dataset, kind: str, budget: int = 200, seed: int = 0,
                  init: KernelSpec | None = None) -> GpModel:
    if init is None:
        init = default_init(data, kind)
    return fit(data, optimize_hyperparams(data, kind, init, budget, seed))


@dataclass(frozen=True)
class CenteredGp:
    """GP on values minus a constant offset; predictions add it back."""

    model: GpModel
    offset: float = 0.0

    def predict_many(self, W) -> tuple[np.ndarray, np.ndarray]:
        mean, var = predict_many(self.model, W)
        return mean + self.offset, var

    def predict(self, w) -> Prediction:
        p = predict(self.model, w)
        return Prediction(p.mean + self.offset, p.variance)


def fit_scalar_field(points, values: Sequence[float], kind: str, budget: int = 200,
                     seed: int = 0, center: bool = False) -> CenteredGp:
    values = np.asarray(values, dtype=float)
    offset = float(np.mean(values)) if center else 0.0
    data = Dataset(as_points(points), values - offset)
    return CenteredGp(fit_optimized(data, kind, budget, seed), offset)


def fit_vector_field(points, vectors, kind: str, budget: int = 200,
                     seed: int = 0) -> tuple[GpModel, GpModel]:
    """Independent east and north component GPs sharing one kernel family."""
    X = as_points(points)
    V = np.array([(v.e, v.n) if hasattr(v, "e") else tuple(v) for v in vectors], dtype=float)
    east = fit_optimized(Dataset(X, V[:, 0]), kind, budget, seed)
    north = fit_optimized(Dataset(X, V[:, 1]), kind, budget, seed + 1)
    return east, north


# ------------------------------------------------------------ persistence


def dumps_model(m: GpModel | CenteredGp) -> str:
    offset = m.offset if isinstance(m, CenteredGp) else 0.0
    gm = m.model if isinstance(m, CenteredGp) else m
    k = gm.kernel
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kernel": {"kind": k.kind, "amplitude": k.amplitude,
                   "lengthscale": k.lengthscale, "noise": k.noise},
        "offset": offset,
        "X": gm.data.X.tolist(),
        "Y": gm.data.Y.tolist(),
    }
    return json.dumps(doc, indent=1) + "\n"


def loads_model(text: str) -> CenteredGp:
    """Rebuild a model from its saved inputs; the factorisation is recomputed."""
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise ValueError("not a forcefield-gp v1 model file")
    k = KernelSpec(**doc["kernel"])
    data = Dataset(np.array(doc["X"], dtype=float), np.array(doc["Y"], dtype=float))
    return CenteredGp(fit(data, k), float(doc.get("offset", 0.0)))


def save_model(m: GpModel | CenteredGp, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(m))


def load_model(path: str | os.PathLike) -> CenteredGp:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
