"""Lossy computational measurements on swap-test control qubits.

Random streams
--------------
Every sampled string draws from its own generator,
``Philox(SeedSequence(seed, spawn_key=prefix + (domain, r, l, q)))``, where
``r`` is the weight repetition, ``l`` the module and ``q`` the output
column; ``domain`` separates independent per-qubit sampling (0), joint
outcome sampling across modules (1) and loss draws for joint sampling (2).
``prefix`` lets callers (e.g. per-datum evaluation) carve out disjoint
families. Because no stream depends on execution order, results are
bit-identical for any thread count.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    InvalidEfficiency,
    InvalidProbability,
    LengthMismatch,
    RegisterTooLarge,
    ValidationError,
)
from .quantum_core import QState
from .swap_test import DEFAULT_MAX_QUBITS, control_distribution

THREADS_ENV = "SWAPQNN_THREADS"

DOMAIN_MARGINAL = 0
DOMAIN_JOINT = 1
DOMAIN_JOINT_LOSS = 2


class Symbol(enum.IntEnum):
    ZERO = 0
    ONE = 1
    MISSING = 2


_TO_CHAR = np.array([ord("0"), ord("1"), ord(".")], dtype=np.uint8)
_FROM_CHAR = {"0": Symbol.ZERO, "1": Symbol.ONE, ".": Symbol.MISSING}


class LossMode(str, enum.Enum):
    STOCHASTIC_THINNING = "stochastic"
    DETERMINISTIC_COUNT = "deterministic"


@dataclass(frozen=True, eq=False)
class OutcomeString:
    """Per-shot record over {ZERO, ONE, MISSING}, stored as uint8 codes."""

    symbols: np.ndarray

    def __post_init__(self):
        s = np.array(self.symbols, dtype=np.uint8).reshape(-1)
        if s.size and s.max() > Symbol.MISSING:
            raise ValidationError("outcome strings only admit ZERO, ONE and MISSING")
        s.flags.writeable = False
        object.__setattr__(self, "symbols", s)

    def __len__(self) -> int:
        return int(self.symbols.size)

    def __eq__(self, other):
        if not isinstance(other, OutcomeString):
            return NotImplemented
        return bool(np.array_equal(self.symbols, other.symbols))

    def count(self, symbol: Symbol) -> int:
        return int(np.count_nonzero(self.symbols == symbol))

    @property
    def n_zero(self) -> int:
        return self.count(Symbol.ZERO)

    def to_text(self) -> str:
        return _TO_CHAR[self.symbols].tobytes().decode("ascii")

    @classmethod
    def from_text(cls, text: str) -> "OutcomeString":
        try:
            return cls(np.array([_FROM_CHAR[c] for c in text.strip()], dtype=np.uint8))
        except KeyError as exc:
            raise ValidationError(f"invalid outcome character {exc.args[0]!r}") from None


def dumps(strings: Sequence[OutcomeString]) -> str:
    """One line per qubit using '0', '1' and '.' for a missing outcome."""
    return "".join(s.to_text() + "\n" for s in strings)


def loads(text: str) -> list:
    return [OutcomeString.from_text(line) for line in text.splitlines() if line.strip()]


@dataclass(frozen=True)
class ProtocolConfig:
    shots: int
    efficiencies: tuple = ()
    loss_mode: LossMode = LossMode.STOCHASTIC_THINNING
    seed: int = 0
    joint: bool = False
    max_qubits: int = DEFAULT_MAX_QUBITS

    def __post_init__(self):
        if isinstance(self.shots, bool) or not isinstance(self.shots, (int, np.integer)) or self.shots < 1:
            raise ValidationError(f"shots must be a positive integer, got {self.shots!r}")
        object.__setattr__(self, "shots", int(self.shots))
        effs = tuple(float(p) for p in self.efficiencies)
        for p in effs:
            _check_efficiency(p)
        object.__setattr__(self, "efficiencies", effs)
        object.__setattr__(self, "loss_mode", LossMode(self.loss_mode))
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class EstimateReport:
    n_zero: int
    shots_total: int
    f_hat: float
    std_error_bound: float


def _check_probability(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise InvalidProbability(f"probability {p!r} outside [0, 1]")


def _check_efficiency(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise InvalidEfficiency(f"efficiency {p!r} outside [0, 1]")


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the counter ``key`` under master ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def parallel_map(fn: Callable, items: Iterable) -> list:
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def kept_count(efficiency: float, shots: int) -> int:
    # Python's round() is round-half-to-even
    return int(round(efficiency * shots))


def _keep_mask(efficiency: float, shots: int, loss_mode: LossMode, rng: np.random.Generator) -> np.ndarray:
    if loss_mode is LossMode.DETERMINISTIC_COUNT:
        keep = np.zeros(shots, dtype=bool)
        keep[: kept_count(efficiency, shots)] = True
        return keep
    return rng.random(shots) < efficiency


def measure_lossy(
    p_zero: float,
    efficiency: float,
    shots: int,
    rng: np.random.Generator,
    loss_mode: LossMode = LossMode.STOCHASTIC_THINNING,
) -> OutcomeString:
    """Repeat a single-qubit measurement ``shots`` times, recording each with probability ``efficiency``."""
    p_zero, efficiency = float(p_zero), float(efficiency)
    _check_probability(p_zero)
    _check_efficiency(efficiency)
    if shots < 1:
        raise ValidationError("shots must be positive")
    loss_mode = LossMode(loss_mode)
    out = np.full(shots, Symbol.MISSING, dtype=np.uint8)
    if loss_mode is LossMode.DETERMINISTIC_COUNT:
        n_kept = kept_count(efficiency, shots)
        out[:n_kept] = np.where(rng.random(n_kept) < p_zero, Symbol.ZERO, Symbol.ONE)
    else:
        # one uniform per shot: [0, p*p0) -> ZERO, [p*p0, p) -> ONE, rest lost
        u = rng.random(shots)
        out[u < efficiency] = Symbol.ONE
        out[u < efficiency * p_zero] = Symbol.ZERO
    return OutcomeString(out)


def run_protocol(
    p_zeros: Sequence[float],
    config: ProtocolConfig,
    key: tuple = (),
    r: int = 0,
    q: int = 0,
) -> list:
    """Independent lossy measurement of each control qubit (separable modules)."""
    p_zeros = [float(p) for p in p_zeros]
    if len(p_zeros) != len(config.efficiencies):
        raise LengthMismatch(
            f"{len(p_zeros)} probabilities but {len(config.efficiencies)} efficiencies"
        )

    def one(l):
        rng = substream(config.seed, *key, DOMAIN_MARGINAL, r, l, q)
        return measure_lossy(p_zeros[l], config.efficiencies[l], config.shots, rng, config.loss_mode)

    return parallel_map(one, range(len(p_zeros)))


def sample_joint(
    distribution: np.ndarray,
    config: ProtocolConfig,
    key: tuple = (),
    r: int = 0,
    q: int = 0,
) -> list:
    """Sample all controls jointly from a model outcome distribution, then apply per-qubit loss.

    ``distribution`` is indexed as returned by
    :func:`swapqnn.swap_test.control_distribution`.
    """
    dist = np.asarray(distribution, dtype=float)
    m = len(config.efficiencies)
    if dist.size != 2**m:
        raise LengthMismatch(f"distribution over {dist.size} patterns for {m} qubits")
    cdf = np.cumsum(dist)
    cdf /= cdf[-1]
    rng = substream(config.seed, *key, DOMAIN_JOINT, r, 0, q)
    patterns = np.minimum(np.searchsorted(cdf, rng.random(config.shots), side="right"), dist.size - 1)

    def one(l):
        zero = ((patterns >> (m - 1 - l)) & 1).astype(bool)
        loss_rng = substream(config.seed, *key, DOMAIN_JOINT_LOSS, r, l, q)
        keep = _keep_mask(config.efficiencies[l], config.shots, config.loss_mode, loss_rng)
        sym = np.where(zero, Symbol.ZERO, Symbol.ONE).astype(np.uint8)
        sym[~keep] = Symbol.MISSING
        return OutcomeString(sym)

    return parallel_map(one, range(m))


def run_protocol_joint(
    joint_state: QState,
    config: ProtocolConfig,
    k: int,
    key: tuple = (),
    r: int = 0,
    q: int = 0,
) -> list:
    """Measure the controls of a post-circuit joint state of ``len(config.efficiencies)`` modules."""
    m = len(config.efficiencies)
    if joint_state.num_qubits > config.max_qubits:
        raise RegisterTooLarge(
            f"{joint_state.num_qubits} qubits exceeds the budget of {config.max_qubits}"
        )
    return sample_joint(control_distribution(joint_state, m, k), config, key, r, q)


def concat(strings: Sequence[OutcomeString]) -> OutcomeString:
    if not strings:
        return OutcomeString(np.zeros(0, dtype=np.uint8))
    return OutcomeString(np.concatenate([s.symbols for s in strings]))


def estimate(strings: Sequence[OutcomeString], denominator: int) -> EstimateReport:
    """Relative frequency of ZERO over all ``strings`` with the given denominator."""
    if isinstance(denominator, bool) or int(denominator) != denominator or denominator < 1:
        raise ValidationError(f"denominator must be a positive integer, got {denominator!r}")
    denominator = int(denominator)
    n_zero = sum(s.n_zero for s in strings)
    return EstimateReport(
        n_zero=n_zero,
        shots_total=denominator,
        f_hat=n_zero / denominator,
        std_error_bound=1.0 / math.sqrt(denominator),
    )
