"""Modular swap-test networks and their exact classical counterpart.

Every topology is stored in one canonical shape:

* ``weights``      -- ``(R, m, 2**k)``: weight piece of hidden unit ``(r, l)``
* ``efficiencies`` -- ``(R, m, Q)``: measurement efficiency linking hidden
  unit ``(r, l)`` to output ``q``

MODULAR is ``R = Q = 1`` (one hidden unit per module, one output),
FULL_RQ is ``m = 1`` (a single module re-run with ``R`` weight vectors), and
BLOCK is the general ``m`` modules times ``R`` repetitions. Output ``q`` is
the number of ZERO outcomes gathered over all modules and repetitions for
that column, divided by ``R * shots``; its expectation is

    y_q = (1/R) * sum_{r,l} p[r,l,q] * (1 - cos(x_l, w_rl)**2) / 2
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, DimensionMismatch, InvalidEfficiency, ValidationError, ZeroNormPiece
from .measurement import (
    ProtocolConfig,
    concat,
    estimate,
    parallel_map,
    run_protocol,
    sample_joint,
)
from .quantum_core import (
    ZERO_NORM,
    DensityMatrix,
    ModuleLayout,
    QState,
    amplitude_encode,
    as_vector,
    partial_trace,
    reduced_density_matrix,
)
from .swap_test import joint_distribution, swap_test_analytic, swap_test_mixed

WEIGHT_NORM_FLOOR = 1e-8


class Topology(str, enum.Enum):
    MODULAR = "modular"
    FULL_RQ = "full"
    BLOCK = "block"


class PartitionMode(str, enum.Enum):
    CONTIGUOUS = "contiguous"
    SEEDED_RANDOM_PERMUTATION = "random_permutation"


def plan_layout(N: int, k: int) -> ModuleLayout:
    """Fewest ``k``-qubit modules that can hold an ``N``-dimensional input."""
    if N < 1 or k < 1:
        raise ValidationError("N and k must be positive")
    return ModuleLayout(k=k, m=-(-N // 2**k), N=N)


def input_permutation(
    layout: ModuleLayout,
    mode: PartitionMode = PartitionMode.CONTIGUOUS,
    seed: Optional[int] = None,
) -> np.ndarray:
    """Index order in which input entries are laid into the pieces."""
    mode = PartitionMode(mode)
    if mode is PartitionMode.CONTIGUOUS:
        return np.arange(layout.N)
    if seed is None:
        raise ValidationError("a seed is required for random-permutation partitions")
    return np.random.default_rng(int(seed)).permutation(layout.N)


def partition(
    x,
    layout: ModuleLayout,
    mode: PartitionMode = PartitionMode.CONTIGUOUS,
    pad_value: float = 0.0,
    seed: Optional[int] = None,
) -> list:
    """Split ``x`` into ``m`` pieces of length ``2**k``, padding the tail with ``pad_value``."""
    x = as_vector(x)
    if x.size != layout.N:
        raise DimensionMismatch(f"input has {x.size} entries, layout expects {layout.N}")
    perm = input_permutation(layout, mode, seed)
    flat = np.full(layout.m * layout.piece_size, float(pad_value))
    flat[: layout.N] = x[perm]
    pieces = list(flat.reshape(layout.m, layout.piece_size))
    for l, piece in enumerate(pieces):
        if not np.linalg.norm(piece) > ZERO_NORM:
            raise ZeroNormPiece(l, f"input piece {l} has zero norm")
    return pieces


def unpartition(
    pieces: Sequence,
    layout: ModuleLayout,
    mode: PartitionMode = PartitionMode.CONTIGUOUS,
    seed: Optional[int] = None,
) -> np.ndarray:
    """Inverse of :func:`partition` (drops padding, undoes the permutation)."""
    flat = np.concatenate([np.asarray(p, dtype=float) for p in pieces])[: layout.N]
    perm = input_permutation(layout, mode, seed)
    x = np.empty(layout.N)
    x[perm] = flat
    return x


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    k: int
    topology: Topology
    weights: np.ndarray
    efficiencies: np.ndarray
    N: Optional[int] = None
    partition_mode: PartitionMode = PartitionMode.CONTIGUOUS
    partition_seed: Optional[int] = None
    pad_value: float = 0.0

    def __post_init__(self):
        topology = Topology(self.topology)
        object.__setattr__(self, "topology", topology)
        object.__setattr__(self, "partition_mode", PartitionMode(self.partition_mode))
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise ValidationError(f"k must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))

        w = np.array(self.weights, dtype=float)
        p = np.array(self.efficiencies, dtype=float)
        if w.ndim != 3 or w.shape[2] != 2**self.k:
            raise DimensionMismatch(f"weights must have shape (R, m, {2**self.k}), got {w.shape}")
        if p.ndim != 3 or p.shape[:2] != w.shape[:2]:
            raise DimensionMismatch(
                f"efficiencies must have shape {w.shape[:2] + ('Q',)}, got {p.shape}"
            )
        R, m, _ = w.shape
        Q = p.shape[2]
        if min(R, m, Q) < 1:
            raise DimensionMismatch("R, m and Q must all be positive")
        if topology is Topology.MODULAR and (R != 1 or Q != 1):
            raise DimensionMismatch("a modular network has R = Q = 1")
        if topology is Topology.FULL_RQ and m != 1:
            raise DimensionMismatch("a full R x Q network uses a single module")
        if not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite")
        if not np.all((p >= 0.0) & (p <= 1.0)):
            raise InvalidEfficiency("efficiencies must lie in [0, 1]")
        norms = np.linalg.norm(w, axis=2)
        bad = np.argwhere(~(norms > WEIGHT_NORM_FLOOR))
        if bad.size:
            r, l = (int(i) for i in bad[0])
            raise ZeroNormPiece((r, l), f"weight piece (r={r}, l={l}) has zero norm")
        w.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "efficiencies", p)

        N = m * 2**self.k if self.N is None else int(self.N)
        object.__setattr__(self, "N", N)
        ModuleLayout(k=self.k, m=m, N=N)
        object.__setattr__(self, "pad_value", float(self.pad_value))
        if self.partition_mode is PartitionMode.SEEDED_RANDOM_PERMUTATION and self.partition_seed is None:
            raise ValidationError("random-permutation partitions need partition_seed")

    # -- constructors ----------------------------------------------------- #

    @classmethod
    def modular(cls, weights, efficiencies, k: int, N: Optional[int] = None, **kw) -> "NetworkSpec":
        """``weights`` is a flat length-``m*2**k`` vector or an ``(m, 2**k)`` array."""
        w = np.asarray(weights, dtype=float).reshape(1, -1, 2**k)
        p = np.asarray(efficiencies, dtype=float).reshape(1, -1, 1)
        return cls(k=k, topology=Topology.MODULAR, weights=w, efficiencies=p, N=N, **kw)

    @classmethod
    def full(cls, weights, efficiencies, k: Optional[int] = None, **kw) -> "NetworkSpec":
        """``weights`` is ``(R, 2**k)``, ``efficiencies`` is ``(R, Q)``."""
        w = np.asarray(weights, dtype=float)
        if w.ndim != 2:
            raise DimensionMismatch("full-network weights must be an (R, 2**k) array")
        if k is None:
            k = int(round(math.log2(w.shape[1])))
        p = np.asarray(efficiencies, dtype=float)
        if p.ndim != 2:
            raise DimensionMismatch("full-network efficiencies must be an (R, Q) array")
        return cls(k=k, topology=Topology.FULL_RQ, weights=w[:, None, :], efficiencies=p[:, None, :], **kw)

    @classmethod
    def block(cls, weights, efficiencies, k: int, N: Optional[int] = None, **kw) -> "NetworkSpec":
        return cls(k=k, topology=Topology.BLOCK, weights=weights, efficiencies=efficiencies, N=N, **kw)

    # -- shape ------------------------------------------------------------ #

    @property
    def R(self) -> int:
        return self.weights.shape[0]

    @property
    def m(self) -> int:
        return self.weights.shape[1]

    @property
    def Q(self) -> int:
        return self.efficiencies.shape[2]

    @property
    def layout(self) -> ModuleLayout:
        return ModuleLayout(k=self.k, m=self.m, N=self.N)

    def with_params(self, weights=None, efficiencies=None) -> "NetworkSpec":
        return replace(
            self,
            weights=self.weights if weights is None else weights,
            efficiencies=self.efficiencies if efficiencies is None else efficiencies,
        )

    def input_pieces(self, x) -> np.ndarray:
        return np.stack(
            partition(x, self.layout, self.partition_mode, self.pad_value, self.partition_seed)
        )

    # -- serialization ---------------------------------------------------- #

    def to_dict(self) -> dict:
        if self.topology is Topology.MODULAR:
            w, p = self.weights[0], self.efficiencies[0, :, 0]
        elif self.topology is Topology.FULL_RQ:
            w, p = self.weights[:, 0], self.efficiencies[:, 0]
        else:
            w, p = self.weights, self.efficiencies
        return {
            "topology": self.topology.value,
            "k": self.k,
            "N": self.N,
            "m": self.m,
            "R": self.R,
            "Q": self.Q,
            "partition_mode": self.partition_mode.value,
            "partition_seed": self.partition_seed,
            "pad_value": self.pad_value,
            "weights": w.tolist(),
            "efficiencies": p.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict, topology: Optional[str] = None) -> "NetworkSpec":
        if not isinstance(d, dict):
            raise ConfigError("network spec must be a JSON object")
        topo = d.get("topology", topology)
        if topo is None:
            raise ConfigError("missing field 'topology'")
        if topology is not None and Topology(topology) != Topology(topo):
            raise ConfigError(f"field 'topology' is {topo!r} but {topology!r} was requested")
        try:
            topo = Topology(topo)
        except ValueError:
            raise ConfigError(f"field 'topology': unknown value {topo!r}") from None
        for name in ("k", "weights", "efficiencies"):
            if name not in d:
                raise ConfigError(f"missing field {name!r}")
        kw = dict(
            N=d.get("N"),
            partition_mode=d.get("partition_mode", PartitionMode.CONTIGUOUS.value),
            partition_seed=d.get("partition_seed"),
            pad_value=d.get("pad_value", 0.0),
        )
        try:
            k = int(d["k"])
            if topo is Topology.MODULAR:
                spec = cls.modular(d["weights"], d["efficiencies"], k=k, **kw)
            elif topo is Topology.FULL_RQ:
                kw.pop("N")
                spec = cls.full(d["weights"], d["efficiencies"], k=k, **kw)
            else:
                spec = cls.block(d["weights"], d["efficiencies"], k=k, **kw)
        except ZeroNormPiece:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid network spec: {exc}") from None
        for name in ("m", "R", "Q"):
            if name in d and int(d[name]) != getattr(spec, name):
                raise ConfigError(f"field {name!r} = {d[name]} disagrees with weights/efficiencies")
        return spec

    @classmethod
    def from_json(cls, text: str, topology: Optional[str] = None) -> "NetworkSpec":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(d, topology)


def connectivity_mask(spec: NetworkSpec) -> np.ndarray:
    """Boolean ``(R*m, N)`` first-layer mask: hidden unit ``r*m + l`` sees the inputs routed to piece ``l``."""
    layout = spec.layout
    perm = input_permutation(layout, spec.partition_mode, spec.partition_seed)
    piece_of = np.empty(layout.N, dtype=int)
    piece_of[perm] = np.arange(layout.N) // layout.piece_size
    mask = piece_of[None, :] == np.arange(spec.m)[:, None]
    return np.tile(mask, (spec.R, 1))


@dataclass(frozen=True, eq=False)
class Prediction:
    values: np.ndarray
    shots_used: int
    error_bound: float
    expected: Optional[np.ndarray] = field(default=None)


def activation(z):
    """Quadratic activation ``(1 - z**2) / 2``."""
    return 0.5 * (1.0 - np.square(z))


def cosines(x, spec: NetworkSpec) -> np.ndarray:
    """Cosine pre-activations, shape ``(R, m)``."""
    pieces = spec.input_pieces(x)
    w = spec.weights
    dots = np.einsum("rli,li->rl", w, pieces)
    norms = np.linalg.norm(w, axis=2) * np.linalg.norm(pieces, axis=1)[None, :]
    return np.clip(dots / norms, -1.0, 1.0)


def combine(hidden: np.ndarray, spec: NetworkSpec) -> np.ndarray:
    """Second layer: ``(1/R) * sum_{r,l} p[r,l,q] * hidden[r,l]``."""
    return np.einsum("rlq,rl->q", spec.efficiencies, hidden) / spec.R


def oracle_network(x, spec: NetworkSpec) -> Prediction:
    """Noise-free network output equal to the expectation of the sampled model."""
    return Prediction(values=combine(activation(cosines(x, spec)), spec), shots_used=0, error_bound=0.0)


def swap_probabilities(x, spec: NetworkSpec) -> np.ndarray:
    """ZERO probability of every module run, via amplitude encoding and the swap test."""
    pieces = spec.input_pieces(x)
    states = [amplitude_encode(p, spec.k) for p in pieces]
    out = np.empty((spec.R, spec.m))
    for r in range(spec.R):
        for l in range(spec.m):
            out[r, l] = swap_test_analytic(states[l], amplitude_encode(spec.weights[r, l], spec.k)).p_zero
    return out


def _column_config(spec: NetworkSpec, config: ProtocolConfig, r: int, q: int) -> ProtocolConfig:
    return replace(config, efficiencies=tuple(spec.efficiencies[r, :, q]))


def _collect(spec: NetworkSpec, config: ProtocolConfig, run_batch) -> Prediction:
    """Run every ``(r, q)`` batch, concatenate per output column, and estimate."""
    keys = [(r, q) for r in range(spec.R) for q in range(spec.Q)]
    batches = dict(zip(keys, parallel_map(lambda rq: run_batch(*rq, _column_config(spec, config, *rq)), keys)))
    values = np.empty(spec.Q)
    for q in range(spec.Q):
        column = concat([s for r in range(spec.R) for s in batches[r, q]])
        values[q] = estimate([column], spec.R * config.shots).f_hat
    return Prediction(
        values=values,
        shots_used=spec.R * spec.Q * config.shots,
        error_bound=1.0 / math.sqrt(spec.R * config.shots),
    )


def _sample(probabilities: np.ndarray, spec: NetworkSpec, config: ProtocolConfig, key: tuple) -> Prediction:
    def batch(r, q, cfg):
        return run_protocol(probabilities[r], cfg, key, r, q)

    pred = _collect(spec, config, batch)
    return replace(pred, expected=combine(probabilities, spec))


def _require(spec: NetworkSpec, topology: Topology) -> None:
    if spec.topology is not topology:
        raise ValidationError(f"expected a {topology.value} network, got {spec.topology.value}")


def predict_modular(x, spec: NetworkSpec, config: ProtocolConfig, key: tuple = ()) -> Prediction:
    """Sampled output ``N_0 / shots`` of ``m`` parallel swap tests."""
    _require(spec, Topology.MODULAR)
    return _sample(swap_probabilities(x, spec), spec, config, key)


def predict_full(x, spec: NetworkSpec, config: ProtocolConfig, key: tuple = ()) -> Prediction:
    """One module re-run with ``R`` weight vectors and ``R x Q`` efficiencies.

    For every ``(r, q)`` the swap test between ``x`` and ``w_r`` is run
    ``shots`` times and measured with efficiency ``p[r, q]``; the strings of
    column ``q`` are concatenated and ``y_q`` is their ZERO count over
    ``R * shots``.
    """
    _require(spec, Topology.FULL_RQ)
    if as_vector(x).size != 2**spec.k:
        raise DimensionMismatch(f"input must have {2**spec.k} entries")
    return _sample(swap_probabilities(x, spec), spec, config, key)


def predict_block(x, spec: NetworkSpec, config: ProtocolConfig, key: tuple = ()) -> Prediction:
    _require(spec, Topology.BLOCK)
    return _sample(swap_probabilities(x, spec), spec, config, key)


def predict(x, spec: NetworkSpec, config: ProtocolConfig, key: tuple = ()) -> Prediction:
    """Dispatch to the sampled predictor matching ``spec.topology``."""
    return {
        Topology.MODULAR: predict_modular,
        Topology.FULL_RQ: predict_full,
        Topology.BLOCK: predict_block,
    }[spec.topology](x, spec, config, key)


# --------------------------------------------------------------------------- #
# quantum data


InputState = Union[QState, DensityMatrix]


def _local_states(input_state: InputState, spec: NetworkSpec) -> list:
    n = input_state.num_qubits
    if n != spec.m * spec.k:
        raise DimensionMismatch(f"input spans {n} qubits, expected m*k = {spec.m * spec.k}")
    if spec.m == 1:
        return [input_state if isinstance(input_state, DensityMatrix) else DensityMatrix.from_state(input_state)]
    reduce = reduced_density_matrix if isinstance(input_state, QState) else partial_trace
    return [reduce(input_state, range(l * spec.k, (l + 1) * spec.k)) for l in range(spec.m)]


def quantum_input_probabilities(input_state: InputState, spec: NetworkSpec) -> np.ndarray:
    """Per-module ZERO probability from each module's reduced input state, shape ``(R, m)``."""
    local = _local_states(input_state, spec)
    out = np.empty((spec.R, spec.m))
    for r in range(spec.R):
        for l in range(spec.m):
            out[r, l] = swap_test_mixed(local[l], amplitude_encode(spec.weights[r, l], spec.k)).p_zero
    return out


def expected_quantum_input(input_state: InputState, spec: NetworkSpec) -> np.ndarray:
    return combine(quantum_input_probabilities(input_state, spec), spec)


def predict_quantum_input(
    input_state: InputState,
    spec: NetworkSpec,
    config: ProtocolConfig,
    key: tuple = (),
) -> Prediction:
    """Feed a quantum state spanning all ``m`` input registers into the network.

    With ``config.joint`` the controls are sampled from the exact joint
    post-circuit distribution (capturing correlations carried by entangled
    inputs); otherwise each module is sampled independently from its reduced
    state.
    """
    probs = quantum_input_probabilities(input_state, spec)
    if not config.joint:
        return _sample(probs, spec, config, key)

    weight_states = [
        [amplitude_encode(spec.weights[r, l], spec.k) for l in range(spec.m)] for r in range(spec.R)
    ]
    dists = [joint_distribution(input_state, ws, config.max_qubits) for ws in weight_states]

    def batch(r, q, cfg):
        return sample_joint(dists[r], cfg, key, r, q)

    pred = _collect(spec, config, batch)
    return replace(pred, expected=combine(probs, spec))
