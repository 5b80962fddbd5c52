"""Fitting weights and efficiencies on the exact (oracle) network.

The loss is the summed squared error ``sum_i ||y_i - f(x_i)||^2`` of the
noise-free network. Training is plain projected gradient descent: a full
gradient step on all parameters followed by clipping every efficiency back
into ``[0, 1]``. Per-datum contributions are reduced with ``math.fsum`` so
the result does not depend on evaluation order.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DimensionMismatch, DivergenceDetected, ValidationError, ZeroNormPiece
from .measurement import ProtocolConfig
from .model import WEIGHT_NORM_FLOOR, NetworkSpec, activation, oracle_network, predict


class LossMetric(str, enum.Enum):
    SQUARED_ERROR = "squared_error"


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        Y = np.array(self.Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0] or X.shape[0] == 0:
            raise DimensionMismatch(f"inconsistent dataset shapes {X.shape} and {Y.shape}")
        X.flags.writeable = False
        Y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @classmethod
    def from_pairs(cls, pairs) -> "Dataset":
        xs, ys = zip(*pairs)
        return cls(np.array(xs, dtype=float), np.array([np.atleast_1d(y) for y in ys], dtype=float))

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def N(self) -> int:
        return self.X.shape[1]

    @property
    def Q(self) -> int:
        return self.Y.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(self.N)] + [f"y{j}" for j in range(self.Q)])
        for x, y in zip(self.X, self.Y):
            w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in y])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Dataset":
        """Parse rows of features then targets; the header names them ``x0..`` and ``y0..``."""
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ConfigError("dataset is empty")
        header = [h.strip() for h in rows[0]]
        N = sum(1 for h in header if h.startswith("x"))
        Q = len(header) - N
        if header != [f"x{i}" for i in range(N)] + [f"y{j}" for j in range(Q)] or N == 0 or Q == 0:
            raise ConfigError("line 1: header must be x0,...,x{N-1},y0,...,y{Q-1}")
        data = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != N + Q:
                raise ConfigError(f"line {lineno}: expected {N + Q} fields, got {len(row)}")
            try:
                data.append([float(v) for v in row])
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {exc}") from None
        if not data:
            raise ConfigError("dataset has no rows")
        arr = np.array(data)
        return cls(arr[:, :N], arr[:, N:])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-2
    max_epochs: int = 5000
    loss_metric: LossMetric = LossMetric.SQUARED_ERROR
    seed: int = 0
    tolerance: float = 1e-12

    def __post_init__(self):
        if not self.learning_rate >= 0.0:
            raise ValidationError("learning_rate must be non-negative")
        if int(self.max_epochs) != self.max_epochs or self.max_epochs < 1:
            raise ValidationError("max_epochs must be a positive integer")
        object.__setattr__(self, "loss_metric", LossMetric(self.loss_metric))


@dataclass(frozen=True, eq=False)
class Gradient:
    weights: np.ndarray
    efficiencies: np.ndarray


@dataclass(frozen=True, eq=False)
class TrainResult:
    spec: NetworkSpec
    trace: list = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.trace[-1]

    def trace_csv(self) -> str:
        return "epoch,loss\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(self.trace))


def _check(spec: NetworkSpec, data: Dataset) -> None:
    if data.N != spec.N:
        raise DimensionMismatch(f"dataset has {data.N} features, network expects {spec.N}")
    if data.Q != spec.Q:
        raise DimensionMismatch(f"dataset has {data.Q} targets, network has {spec.Q} outputs")


def _fsum0(a: np.ndarray) -> np.ndarray:
    """Compensated sum over the leading axis."""
    flat = a.reshape(a.shape[0], -1)
    return np.array([math.fsum(col) for col in flat.T]).reshape(a.shape[1:])


def _pieces(spec: NetworkSpec, data: Dataset) -> np.ndarray:
    return np.stack([spec.input_pieces(x) for x in data.X])  # (n, m, d)


def _forward(spec: NetworkSpec, data: Dataset, pieces: Optional[np.ndarray] = None):
    if pieces is None:
        pieces = _pieces(spec, data)
    w = spec.weights
    w_norm = np.linalg.norm(w, axis=2)
    x_norm = np.linalg.norm(pieces, axis=2)
    cos = np.einsum("rld,nld->nrl", w, pieces) / (w_norm[None] * x_norm[:, None, :])
    hidden = activation(cos)
    out = np.einsum("rlq,nrl->nq", spec.efficiencies, hidden) / spec.R
    return pieces, w_norm, x_norm, cos, hidden, out


def loss(spec: NetworkSpec, data: Dataset, _pieces_cache: Optional[np.ndarray] = None) -> float:
    _check(spec, data)
    out = _forward(spec, data, _pieces_cache)[-1]
    return math.fsum(np.sum((data.Y - out) ** 2, axis=1))


def gradient(spec: NetworkSpec, data: Dataset, _pieces_cache: Optional[np.ndarray] = None) -> Gradient:
    """Exact partial derivatives of :func:`loss` with respect to weights and efficiencies."""
    _check(spec, data)
    if np.min(np.linalg.norm(spec.weights, axis=2)) < WEIGHT_NORM_FLOOR:
        raise ZeroNormPiece(None, "weight norm fell below the floor")
    pieces, w_norm, x_norm, cos, hidden, out = _forward(spec, data, _pieces_cache)
    resid = data.Y - out  # (n, Q)
    R = spec.R
    g_eff = (-2.0 / R) * resid[:, None, None, :] * hidden[..., None]
    d_hidden = (-2.0 / R) * np.einsum("nq,rlq->nrl", resid, spec.efficiencies)
    # d cos / d w = x / (|x| |w|) - cos * w / |w|^2
    d_cos = pieces[:, None] / (x_norm[:, None, :, None] * w_norm[None, :, :, None]) - cos[
        ..., None
    ] * (spec.weights / w_norm[..., None] ** 2)[None]
    g_w = (d_hidden * -cos)[..., None] * d_cos
    return Gradient(weights=_fsum0(g_w), efficiencies=_fsum0(g_eff))


def finite_difference_gradient(spec: NetworkSpec, data: Dataset, step: float = 1e-6) -> Gradient:
    """Central-difference estimate of the loss gradient (independent check of :func:`gradient`)."""
    grads = []
    for name in ("weights", "efficiencies"):
        base = getattr(spec, name)
        g = np.empty(base.shape)
        for idx in np.ndindex(base.shape):
            hi, lo = base.copy(), base.copy()
            hi[idx] += step
            lo[idx] -= step
            # efficiencies may leave [0, 1] by one step; evaluate unvalidated
            g[idx] = (_raw_loss(spec, data, **{name: hi}) - _raw_loss(spec, data, **{name: lo})) / (2 * step)
        grads.append(g)
    return Gradient(weights=grads[0], efficiencies=grads[1])


def _raw_loss(spec: NetworkSpec, data: Dataset, weights=None, efficiencies=None) -> float:
    w = spec.weights if weights is None else weights
    p = spec.efficiencies if efficiencies is None else efficiencies
    total = 0.0
    for x, y in zip(data.X, data.Y):
        pieces = spec.input_pieces(x)
        out = np.zeros(spec.Q)
        for r in range(spec.R):
            for l in range(spec.m):
                c = np.dot(pieces[l], w[r, l]) / (np.linalg.norm(pieces[l]) * np.linalg.norm(w[r, l]))
                out += p[r, l] * 0.5 * (1.0 - c * c) / spec.R
        total += float(np.sum((y - out) ** 2))
    return total


def relative_error(a: Gradient, b: Gradient) -> float:
    """Norm-wise relative deviation of ``a`` from ``b``."""
    va = np.concatenate([a.weights.ravel(), a.efficiencies.ravel()])
    vb = np.concatenate([b.weights.ravel(), b.efficiencies.ravel()])
    return float(np.linalg.norm(va - vb) / max(np.linalg.norm(vb), 1e-300))


def train(
    spec0: NetworkSpec,
    data: Dataset,
    cfg: TrainConfig = TrainConfig(),
    on_step: Optional[Callable[[int, NetworkSpec, float], None]] = None,
) -> TrainResult:
    """Projected gradient descent from ``spec0``; ``trace[0]`` is the initial loss."""
    spec = spec0
    cache = _pieces(spec, data)
    current = loss(spec, data, cache)
    trace = [current]
    for _ in range(cfg.max_epochs):
        g = gradient(spec, data, cache)
        w = spec.weights - cfg.learning_rate * g.weights
        p = np.clip(spec.efficiencies - cfg.learning_rate * g.efficiencies, 0.0, 1.0)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(p))):
            raise DivergenceDetected("parameters became non-finite")
        spec = spec.with_params(weights=w, efficiencies=p)
        new = loss(spec, data, cache)
        if not math.isfinite(new):
            raise DivergenceDetected(f"loss became {new!r}")
        trace.append(new)
        if on_step is not None:
            on_step(len(trace) - 1, spec, new)
        decrease = current - new
        current = new
        if decrease < cfg.tolerance:
            break
    return TrainResult(spec=spec, trace=trace)


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    oracle_loss: float
    sampled_loss: float
    gap: float
    oracle_outputs: np.ndarray
    sampled_outputs: np.ndarray
    shots: int
    seed: int
    error_bound: float


def evaluate_sampled(spec: NetworkSpec, data: Dataset, config: ProtocolConfig) -> EvaluationReport:
    """Compare the oracle loss with the loss of the shot-sampled quantum model."""
    _check(spec, data)
    oracle = np.stack([oracle_network(x, spec).values for x in data.X])
    preds = [predict(x, spec, config, key=(i,)) for i, x in enumerate(data.X)]
    sampled = np.stack([p.values for p in preds])
    o_loss = math.fsum(np.sum((data.Y - oracle) ** 2, axis=1))
    s_loss = math.fsum(np.sum((data.Y - sampled) ** 2, axis=1))
    return EvaluationReport(
        oracle_loss=o_loss,
        sampled_loss=s_loss,
        gap=abs(s_loss - o_loss),
        oracle_outputs=oracle,
        sampled_outputs=sampled,
        shots=config.shots,
        seed=config.seed,
        error_bound=preds[0].error_bound,
    )


# --------------------------------------------------------------------------- #
# fixtures


def random_full_spec(
    rng: np.random.Generator, k: int, R: int, Q: int, p_low: float = 0.0
) -> NetworkSpec:
    return NetworkSpec.full(
        rng.normal(size=(R, 2**k)), rng.uniform(p_low, 1.0, size=(R, Q)), k=k
    )


def teacher_student(
    seed: int = 0, n_samples: int = 200, k: int = 2, hidden: int = 2, outputs: int = 1
) -> tuple:
    """Teacher network, the dataset it labels, and a fresh student initialization."""
    rng = np.random.default_rng(seed)
    teacher = random_full_spec(rng, k, hidden, outputs, p_low=0.5)
    X = rng.normal(size=(n_samples, 2**k))
    Y = np.stack([oracle_network(x, teacher).values for x in X])
    student = random_full_spec(rng, k, hidden, outputs, p_low=0.5)
    return teacher, Dataset(X, Y), student


def load_dataset(path) -> Dataset:
    return Dataset.from_csv(Path(path).read_text())
