"""Dense state-vector and density-matrix primitives for small qubit registers.

Basis convention: computational basis states are indexed by bit strings with
qubit 0 as the most significant bit, so ``|q0 q1 ... q_{n-1}>`` has index
``sum(q_i * 2**(n-1-i))``. All values are immutable once constructed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateIndex,
    EmptyKeepSet,
    IndexOutOfRange,
    InvalidDensityMatrix,
    ValidationError,
    ZeroNorm,
)

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
PSD_FLOOR = -1e-10
ZERO_NORM = 1e-300

_SQRT2_INV = 1.0 / math.sqrt(2.0)
_H = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) * _SQRT2_INV


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _log2_exact(n: int) -> int:
    if n < 2 or n & (n - 1):
        return -1
    return n.bit_length() - 1


def as_vector(x, name: str = "x") -> np.ndarray:
    """Coerce ``x`` into a finite, non-empty, 1-D float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class QState:
    """Normalized pure state of a ``num_qubits``-qubit register."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if _log2_exact(amps.size) < 1:
            raise DimensionMismatch(f"state length {amps.size} is not 2**k with k >= 1")
        norm_sq = float(np.vdot(amps, amps).real)
        if abs(norm_sq - 1.0) > NORM_TOL:
            raise ValidationError(f"state is not normalized (norm^2 = {norm_sq!r})")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @classmethod
    def basis(cls, bits: str) -> "QState":
        """Computational basis state, e.g. ``QState.basis("10")`` is ``|10>``."""
        if not bits or set(bits) - {"0", "1"}:
            raise ValidationError(f"invalid basis label {bits!r}")
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(amps)

    @classmethod
    def random(cls, num_qubits: int, rng: np.random.Generator, real: bool = False) -> "QState":
        dim = 2**num_qubits
        v = rng.normal(size=dim).astype(complex)
        if not real:
            v = v + 1j * rng.normal(size=dim)
        return cls(v / np.linalg.norm(v))

    @property
    def num_qubits(self) -> int:
        return _log2_exact(self.amplitudes.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __eq__(self, other):
        if not isinstance(other, QState):
            return NotImplemented
        return bool(np.array_equal(self.amplitudes, other.amplitudes))

    def allclose(self, other: "QState", atol: float = 1e-12) -> bool:
        return self.num_qubits == other.num_qubits and bool(
            np.allclose(self.amplitudes, other.amplitudes, rtol=0.0, atol=atol)
        )


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace operator on ``num_qubits`` qubits."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or _log2_exact(mat.shape[0]) < 1:
            raise InvalidDensityMatrix(f"density matrix must be 2**k x 2**k, got {mat.shape}")
        if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_TOL:
            raise InvalidDensityMatrix("matrix is not Hermitian")
        tr = np.trace(mat)
        if abs(tr - 1.0) > NORM_TOL:
            raise InvalidDensityMatrix(f"trace is {tr!r}, expected 1")
        if np.min(np.linalg.eigvalsh(mat)) < PSD_FLOOR:
            raise InvalidDensityMatrix("matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", _frozen(mat))

    @classmethod
    def from_state(cls, state: QState) -> "DensityMatrix":
        a = state.amplitudes
        return cls(np.outer(a, a.conj()))

    @classmethod
    def maximally_mixed(cls, num_qubits: int) -> "DensityMatrix":
        dim = 2**num_qubits
        return cls(np.eye(dim, dtype=complex) / dim)

    @property
    def num_qubits(self) -> int:
        return _log2_exact(self.matrix.shape[0])

    def eigvals(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def allclose(self, other: "DensityMatrix", atol: float = 1e-12) -> bool:
        return self.matrix.shape == other.matrix.shape and bool(
            np.allclose(self.matrix, other.matrix, rtol=0.0, atol=atol)
        )


@dataclass(frozen=True)
class ModuleLayout:
    """Register size ``k``, module count ``m`` and encoded input dimension ``N``."""

    k: int
    m: int
    N: int

    def __post_init__(self):
        for name in ("k", "m", "N"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        cap = 2**self.k
        if not (self.m - 1) * cap < self.N <= self.m * cap:
            raise ValidationError(
                f"layout k={self.k}, m={self.m} is not minimal for N={self.N}"
            )

    @property
    def piece_size(self) -> int:
        return 2**self.k

    @property
    def qubits_per_module(self) -> int:
        return 2 * self.k + 1

    @property
    def total_qubits(self) -> int:
        return self.m * self.qubits_per_module

    @property
    def padding(self) -> int:
        return self.m * self.piece_size - self.N


# --------------------------------------------------------------------------- #
# encoding and overlaps


def amplitude_encode(x, num_qubits: int | None = None) -> QState:
    """Encode ``x`` (length ``2**k``, real or complex) into state amplitudes."""
    arr = np.asarray(x)
    arr = arr.astype(complex if np.iscomplexobj(arr) else float).reshape(-1)
    k = _log2_exact(arr.size)
    if k < 1 or (num_qubits is not None and k != num_qubits):
        expected = "2**k" if num_qubits is None else str(2**num_qubits)
        raise DimensionMismatch(f"vector length {arr.size} does not match {expected}")
    norm = float(np.linalg.norm(arr))
    if not norm > ZERO_NORM:
        raise ZeroNorm("cannot amplitude-encode a zero-norm vector")
    return QState(arr / norm)


def inner_product(a: QState, b: QState) -> complex:
    """``<a|b>``, conjugate-linear in ``a``."""
    if a.num_qubits != b.num_qubits:
        raise DimensionMismatch(f"{a.num_qubits} vs {b.num_qubits} qubits")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def cosine_similarity(x, y) -> float:
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    if x.size != y.size:
        raise DimensionMismatch(f"lengths {x.size} and {y.size} differ")
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if not (nx > ZERO_NORM and ny > ZERO_NORM):
        raise ZeroNorm("cosine similarity is undefined for zero-norm vectors")
    return float(np.clip(np.dot(x, y) / (nx * ny), -1.0, 1.0))


def tensor_product(a: QState, b: QState) -> QState:
    """``a ⊗ b`` with ``a`` occupying the more significant qubits."""
    return QState(np.kron(a.amplitudes, b.amplitudes))


# --------------------------------------------------------------------------- #
# gates


@dataclass(frozen=True)
class Hadamard:
    target: int

    @property
    def qubits(self) -> tuple:
        return (self.target,)


@dataclass(frozen=True)
class CNOT:
    control: int
    target: int

    @property
    def qubits(self) -> tuple:
        return (self.control, self.target)


@dataclass(frozen=True)
class SWAP:
    q1: int
    q2: int

    @property
    def qubits(self) -> tuple:
        return (self.q1, self.q2)


@dataclass(frozen=True)
class Fredkin:
    """Controlled swap: identity when ``control`` is 0, swaps ``q1``/``q2`` when 1."""

    control: int
    q1: int
    q2: int

    @property
    def qubits(self) -> tuple:
        return (self.control, self.q1, self.q2)


Gate = Union[Hadamard, CNOT, SWAP, Fredkin]


def _check_qubits(qubits: Sequence[int], n: int) -> None:
    for q in qubits:
        if isinstance(q, bool) or not isinstance(q, (int, np.integer)) or not 0 <= q < n:
            raise IndexOutOfRange(f"qubit index {q!r} out of range for {n} qubits")
    if len(set(qubits)) != len(qubits):
        raise DuplicateIndex(f"gate qubits {tuple(qubits)} are not distinct")


def _bit(idx: np.ndarray, q: int, n: int) -> np.ndarray:
    return (idx >> (n - 1 - q)) & 1


def _permutation(gate: Gate, n: int) -> np.ndarray:
    # all supported permutation gates are involutions, so the map is its own inverse
    idx = np.arange(2**n, dtype=np.int64)
    if isinstance(gate, CNOT):
        return idx ^ (_bit(idx, gate.control, n) << (n - 1 - gate.target))
    if isinstance(gate, SWAP):
        c = np.ones_like(idx)
        a, b = gate.q1, gate.q2
    else:
        c = _bit(idx, gate.control, n)
        a, b = gate.q1, gate.q2
    differ = c & (_bit(idx, a, n) ^ _bit(idx, b, n))
    return idx ^ ((differ << (n - 1 - a)) | (differ << (n - 1 - b)))


def _apply_raw(amps: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    if isinstance(gate, Hadamard):
        t = amps.reshape(2**gate.target, 2, -1)
        return np.einsum("ij,ajb->aib", _H, t).reshape(-1)
    if isinstance(gate, (CNOT, SWAP, Fredkin)):
        return amps[_permutation(gate, n)]
    raise ValidationError(f"unsupported gate {gate!r}")


def apply_gate(state: QState, gate: Gate) -> QState:
    n = state.num_qubits
    _check_qubits(gate.qubits, n)
    return QState(_apply_raw(state.amplitudes, gate, n))


def apply_circuit(state: QState, gates: Iterable[Gate]) -> QState:
    n = state.num_qubits
    amps = state.amplitudes
    for gate in gates:
        _check_qubits(gate.qubits, n)
        amps = _apply_raw(amps, gate, n)
    return QState(amps)


def gate_matrix(gate: Gate, num_qubits: int) -> np.ndarray:
    """Dense unitary of ``gate`` acting on ``num_qubits`` qubits (columns are images of basis states)."""
    _check_qubits(gate.qubits, num_qubits)
    dim = 2**num_qubits
    cols = [_apply_raw(np.eye(dim, dtype=complex)[:, j], gate, num_qubits) for j in range(dim)]
    return np.stack(cols, axis=1)


# --------------------------------------------------------------------------- #
# partial trace


def _normalize_keep(keep: Iterable[int], n: int) -> list:
    keep = list(keep)
    if not keep:
        raise EmptyKeepSet("at least one qubit must be kept")
    for q in keep:
        if isinstance(q, bool) or not isinstance(q, (int, np.integer)) or not 0 <= q < n:
            raise IndexOutOfRange(f"qubit index {q!r} out of range for {n} qubits")
    return sorted(set(int(q) for q in keep))


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the qubits in ``keep`` (kept in ascending index order)."""
    n = rho.num_qubits
    keep = _normalize_keep(keep, n)
    t = rho.matrix.reshape([2] * (2 * n))
    row = list(range(n))
    col = [q if q not in keep else n + q for q in range(n)]
    out = keep + [n + q for q in keep]
    dim = 2 ** len(keep)
    reduced = np.einsum(t, row + col, out).reshape(dim, dim)
    return DensityMatrix(0.5 * (reduced + reduced.conj().T))


def reduced_density_matrix(state: QState, keep: Iterable[int]) -> DensityMatrix:
    """Partial trace of the pure state ``|state><state|`` without forming the full operator."""
    n = state.num_qubits
    keep = _normalize_keep(keep, n)
    rest = [q for q in range(n) if q not in keep]
    t = np.transpose(state.amplitudes.reshape([2] * n), keep + rest)
    a = t.reshape(2 ** len(keep), -1)
    reduced = a @ a.conj().T
    return DensityMatrix(0.5 * (reduced + reduced.conj().T))
