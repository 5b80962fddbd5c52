"""Self-check suite run by ``swapqnn verify``.

Each check returns a :class:`CheckResult`; sizes are chosen so the whole
suite finishes in well under a minute on one core.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .measurement import ProtocolConfig
from .model import (
    NetworkSpec,
    expected_quantum_input,
    oracle_network,
    plan_layout,
    predict_full,
    predict_modular,
    predict_quantum_input,
)
from .quantum_core import CNOT, SWAP, QState, amplitude_encode, cosine_similarity, gate_matrix, inner_product
from .swap_test import swap_test_analytic, swap_test_circuit
from .trainer import Dataset, finite_difference_gradient, gradient, relative_error


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_circuit_vs_analytic(rng, pairs: int = 100) -> CheckResult:
    worst = 0.0
    for i in range(pairs):
        k = 1 + i % 5
        psi, phi = QState.random(k, rng), QState.random(k, rng)
        worst = max(worst, abs(swap_test_circuit(psi, phi).p_zero - swap_test_analytic(psi, phi).p_zero))
    return CheckResult("circuit_vs_analytic", worst <= 1e-12, f"max deviation {worst:.2e} over {pairs} pairs")


def check_swap_decomposition() -> CheckResult:
    a, b = 0, 2
    lhs = gate_matrix(SWAP(a, b), 3)
    rhs = gate_matrix(CNOT(a, b), 3) @ gate_matrix(CNOT(b, a), 3) @ gate_matrix(CNOT(a, b), 3)
    err = float(np.max(np.abs(lhs - rhs)))
    return CheckResult("swap_decomposition", err <= 1e-12, f"max deviation {err:.2e}")


def check_encoding_identity(rng, cases: int = 200) -> CheckResult:
    worst = 0.0
    for i in range(cases):
        d = 2 ** (1 + i % 5)
        x, y = rng.normal(size=d), rng.normal(size=d)
        worst = max(worst, abs(inner_product(amplitude_encode(x), amplitude_encode(y)).real - cosine_similarity(x, y)))
    return CheckResult("encoding_identity", worst <= 1e-12, f"max deviation {worst:.2e}")


def check_layout() -> CheckResult:
    lay = plan_layout(128, 5)
    return CheckResult("layout_128_5", (lay.m, lay.total_qubits) == (4, 44), f"m={lay.m}, qubits={lay.total_qubits}")


def check_modular_equivalence(rng, instances: int = 10, shots: int = 10**5) -> CheckResult:
    band = 5.0 / math.sqrt(shots)
    hits = 0
    for i in range(instances):
        k, m = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        d = 2**k
        spec = NetworkSpec.modular(rng.normal(size=(m, d)), rng.uniform(size=m), k=k)
        x = rng.normal(size=m * d)
        f = predict_modular(x, spec, ProtocolConfig(shots=shots, seed=i)).values[0]
        hits += bool(abs(f - oracle_network(x, spec).values[0]) <= band)
    return CheckResult("modular_equivalence", hits >= instances - 1, f"{hits}/{instances} within {band:.1e}")


def check_full_equivalence(rng, instances: int = 10, shots: int = 10**4) -> CheckResult:
    hits = 0
    for i in range(instances):
        k, R, Q = int(rng.integers(1, 4)), int(rng.integers(1, 5)), int(rng.integers(1, 5))
        spec = NetworkSpec.full(rng.normal(size=(R, 2**k)), rng.uniform(size=(R, Q)), k=k)
        x = rng.normal(size=2**k)
        y = predict_full(x, spec, ProtocolConfig(shots=shots, seed=i)).values
        hits += bool(np.all(np.abs(y - oracle_network(x, spec).values) <= 5.0 / math.sqrt(R * shots)))
    return CheckResult("full_equivalence", hits >= instances - 1, f"{hits}/{instances} instances within band")


def check_shot_scaling(seeds: int = 100) -> CheckResult:
    spec = NetworkSpec.modular([1.0, 1.0, 1.0, 0.0], [1.0, 1.0], k=1)
    x = [1.0, 0.0, 1.0, 0.0]
    sds = []
    for shots in (10**3, 10**5):
        f = [predict_modular(x, spec, ProtocolConfig(shots=shots, seed=s)).values[0] for s in range(seeds)]
        sds.append(float(np.std(f, ddof=1)))
    ratio = sds[0] / sds[1]
    return CheckResult("shot_scaling", 7.0 <= ratio <= 14.0, f"std ratio {ratio:.2f} (target 10)")


def check_entangled_input(shots: int = 10**5) -> CheckResult:
    bell = QState(np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2.0))
    spec = NetworkSpec.modular([1.0, 0.0, 1.0, 0.0], [1.0, 1.0], k=1)
    expected = float(expected_quantum_input(bell, spec)[0])
    f = predict_quantum_input(bell, spec, ProtocolConfig(shots=shots, seed=0, joint=True)).values[0]
    sigma = math.sqrt(2 * 0.25 * 0.75 / shots)
    ok = abs(expected - 0.5) <= 1e-12 and abs(f - expected) <= 3 * sigma
    return CheckResult("entangled_input", ok, f"E[f]={expected:.12f}, joint-sampled f={f:.5f}")


def check_gradient(rng, instances: int = 20) -> CheckResult:
    worst = 0.0
    for _ in range(instances):
        spec = NetworkSpec.full(rng.normal(size=(2, 4)), rng.uniform(0.2, 0.8, size=(2, 2)), k=2)
        data = Dataset(rng.normal(size=(5, 4)), rng.uniform(size=(5, 2)))
        worst = max(worst, relative_error(gradient(spec, data), finite_difference_gradient(spec, data)))
    return CheckResult("gradient_vs_finite_difference", worst <= 1e-5, f"max relative deviation {worst:.2e}")


def run_checks(seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    checks: list[Callable[[], CheckResult]] = [
        lambda: check_circuit_vs_analytic(rng),
        check_swap_decomposition,
        lambda: check_encoding_identity(rng),
        check_layout,
        lambda: check_modular_equivalence(rng),
        lambda: check_full_equivalence(rng),
        check_shot_scaling,
        check_entangled_input,
        lambda: check_gradient(rng),
    ]
    return [c() for c in checks]
