"""Swap-test outcome probabilities: closed form, gate-level circuit, and mixed input.

Outcome labeling. With the control prepared in ``|0>`` and the sequence
H, controlled-SWAP, H, the raw control outcome 0 occurs with probability
``(1 + |<psi|phi>|^2) / 2``. The model symbol ZERO is defined as the
*other* outcome, so that ``p_zero = (1 - |<psi|phi>|^2) / 2`` everywhere in
this package; the circuit simulator maps raw outcome 1 to model ZERO.

Module register order (used by every multi-module simulation): module ``l``
occupies qubits ``l*(2k+1) ... (l+1)*(2k+1) - 1`` as
``[control, input register (k), weight register (k)]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DimensionMismatch, InvalidEpsilon, RegisterTooLarge, ValidationError
from .quantum_core import (
    DensityMatrix,
    Fredkin,
    Hadamard,
    QState,
    _apply_raw,
    inner_product,
)

DEFAULT_MAX_QUBITS = 21
SHOT_CONSTANT = 1.0


@dataclass(frozen=True)
class SwapTestResult:
    p_zero: float
    overlap_sq: float

    @classmethod
    def from_overlap(cls, overlap_sq: float) -> "SwapTestResult":
        o = min(max(float(overlap_sq), 0.0), 1.0)
        return cls(p_zero=0.5 * (1.0 - o), overlap_sq=o)


def _same_size(a_qubits: int, b_qubits: int) -> None:
    if a_qubits != b_qubits:
        raise DimensionMismatch(f"registers have {a_qubits} and {b_qubits} qubits")


def swap_test_analytic(psi: QState, phi: QState) -> SwapTestResult:
    _same_size(psi.num_qubits, phi.num_qubits)
    return SwapTestResult.from_overlap(abs(inner_product(psi, phi)) ** 2)


def module_gates(k: int, control: int = 0) -> list:
    """Gate list of one swap-test module whose control sits at qubit ``control``."""
    inp, wgt = control + 1, control + 1 + k
    return (
        [Hadamard(control)]
        + [Fredkin(control, inp + i, wgt + i) for i in range(k)]
        + [Hadamard(control)]
    )


def _check_budget(n: int, max_qubits: int) -> None:
    if n > max_qubits:
        raise RegisterTooLarge(f"{n} qubits exceeds the simulation budget of {max_qubits}")


def swap_test_circuit(
    psi: QState, phi: QState, max_qubits: int = DEFAULT_MAX_QUBITS
) -> SwapTestResult:
    """Simulate the ``2k+1``-qubit swap-test circuit gate by gate."""
    _same_size(psi.num_qubits, phi.num_qubits)
    k = psi.num_qubits
    n = 2 * k + 1
    _check_budget(n, max_qubits)
    amps = np.kron(np.array([1.0, 0.0], dtype=complex), np.kron(psi.amplitudes, phi.amplitudes))
    for gate in module_gates(k):
        amps = _apply_raw(amps, gate, n)
    half = amps.size // 2
    # raw control outcome 1 is the model's ZERO
    p_zero = float(np.sum(np.abs(amps[half:]) ** 2))
    return SwapTestResult(p_zero=p_zero, overlap_sq=1.0 - 2.0 * p_zero)


def swap_test_mixed(rho: DensityMatrix, w: QState) -> SwapTestResult:
    """Swap test between a (possibly reduced) mixed input and a pure weight state."""
    if not isinstance(rho, DensityMatrix):
        raise ValidationError("rho must be a DensityMatrix")
    _same_size(rho.num_qubits, w.num_qubits)
    a = w.amplitudes
    return SwapTestResult.from_overlap(float(np.real(np.vdot(a, rho.matrix @ a))))


def required_shots(epsilon: float, constant: float = SHOT_CONSTANT) -> int:
    """Number of swap-test runs needed to pin ``p_zero`` within ``epsilon``: ``ceil(c / eps^2)``."""
    if not (isinstance(epsilon, (int, float)) and 0.0 < epsilon < 1.0):
        raise InvalidEpsilon(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if not constant > 0:
        raise InvalidEpsilon("shot constant must be positive")
    # guard against 1/0.1**2 = 100.00000000000001 style rounding
    return max(1, math.ceil(round(constant / epsilon**2, 9)))


# --------------------------------------------------------------------------- #
# joint multi-module simulation


def control_qubits(m: int, k: int) -> list:
    return [l * (2 * k + 1) for l in range(m)]


def network_state(
    input_state: QState,
    weights: Sequence[QState],
    max_qubits: int = DEFAULT_MAX_QUBITS,
) -> QState:
    """Joint state of ``m`` modules after their swap-test circuits.

    ``input_state`` spans the ``m`` input registers (``m*k`` qubits, register
    ``l`` holding qubits ``l*k ... l*k+k-1``) and may be entangled across them.
    """
    m = len(weights)
    if m == 0:
        raise ValidationError("at least one weight state is required")
    k = weights[0].num_qubits
    for w in weights:
        _same_size(w.num_qubits, k)
    if input_state.num_qubits != m * k:
        raise DimensionMismatch(
            f"input spans {input_state.num_qubits} qubits, expected {m}*{k}"
        )
    n = m * (2 * k + 1)
    _check_budget(n, max_qubits)

    amps = input_state.amplitudes
    for w in weights:
        amps = np.kron(amps, w.amplitudes)
    amps = np.kron(amps, np.eye(2**m, dtype=complex)[0])
    # source axes: inputs (m*k), weights (m*k), controls (m)
    order = []
    for l in range(m):
        order.append(2 * m * k + l)
        order.extend(l * k + j for j in range(k))
        order.extend(m * k + l * k + j for j in range(k))
    amps = np.transpose(amps.reshape([2] * n), order).reshape(-1)

    for c in control_qubits(m, k):
        for gate in module_gates(k, c):
            amps = _apply_raw(amps, gate, n)
    return QState(amps)


def control_distribution(post_state: QState, m: int, k: int) -> np.ndarray:
    """Probability of each model outcome pattern on the ``m`` controls.

    Index bit ``l`` (most significant first) is 1 when module ``l`` yields
    the model symbol ZERO.
    """
    n = m * (2 * k + 1)
    if post_state.num_qubits != n:
        raise DimensionMismatch(f"state has {post_state.num_qubits} qubits, expected {n}")
    controls = control_qubits(m, k)
    rest = [q for q in range(n) if q not in controls]
    probs = np.abs(post_state.amplitudes.reshape([2] * n)) ** 2
    raw = np.transpose(probs, controls + rest).reshape(2**m, -1).sum(axis=1)
    # raw control bit 1 is the model ZERO, so the raw index is already the model pattern
    return raw


InputState = Union[QState, DensityMatrix]


def joint_distribution(
    input_state: InputState,
    weights: Sequence[QState],
    max_qubits: int = DEFAULT_MAX_QUBITS,
) -> np.ndarray:
    """Model outcome distribution over all controls for a pure or mixed input."""
    m = len(weights)
    k = weights[0].num_qubits if m else 0
    if isinstance(input_state, QState):
        return control_distribution(network_state(input_state, weights, max_qubits), m, k)
    _check_budget(m * (2 * k + 1), max_qubits)
    evals, evecs = np.linalg.eigh(input_state.matrix)
    dist = np.zeros(2**m)
    for lam, vec in zip(evals, evecs.T):
        if lam <= 1e-14:
            continue
        post = network_state(QState(vec / np.linalg.norm(vec)), weights, max_qubits)
        dist += lam * control_distribution(post, m, k)
    return dist / dist.sum()
