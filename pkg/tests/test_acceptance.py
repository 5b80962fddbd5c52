"""Acceptance criteria, each checked at its stated tolerance and time limit."""

import math
import os
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from swapqnn.measurement import ProtocolConfig, run_protocol_joint
from swapqnn.model import (
    NetworkSpec,
    expected_quantum_input,
    oracle_network,
    plan_layout,
    predict_full,
    predict_modular,
    predict_quantum_input,
)
from swapqnn.quantum_core import DensityMatrix, QState, partial_trace
from swapqnn.swap_test import network_state, swap_test_circuit, swap_test_mixed
from swapqnn.trainer import (
    Dataset,
    TrainConfig,
    finite_difference_gradient,
    gradient,
    relative_error,
    teacher_student,
    train,
)

pytestmark = pytest.mark.acceptance


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_criterion_1_circuit_vs_analytic(acceptance_report):
    rng = np.random.default_rng(1)
    with Timer() as t:
        worst = 0.0
        for i in range(500):
            k = 1 + i % 5
            psi, phi = QState.random(k, rng), QState.random(k, rng)
            expected = 0.5 * (1 - abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2)
            worst = max(worst, abs(swap_test_circuit(psi, phi).p_zero - expected))
    ok = worst <= 1e-12 and t.elapsed < 10
    acceptance_report(1, "circuit vs analytic swap test", ok,
                      f"max |dp| = {worst:.2e} over 500 pairs (tol 1e-12), {t.elapsed:.2f}s (limit 10s)")
    assert ok


def test_criterion_2_layout_arithmetic(acceptance_report):
    lay = plan_layout(128, 5)
    ok = lay.m == 4 and lay.total_qubits == 44
    acceptance_report(2, "layout arithmetic", ok, f"N=128, k=5 -> m={lay.m}, qubits={lay.total_qubits} (want 4, 44)")
    assert ok


def test_criterion_3_modular_equivalence(acceptance_report):
    rng = np.random.default_rng(3)
    shots, hits, total = 10**6, 0, 50
    with Timer() as t:
        worst = 0.0
        for i in range(total):
            k, m = int(rng.integers(1, 4)), int(rng.integers(1, 5))
            spec = NetworkSpec.modular(rng.normal(size=(m, 2**k)), rng.uniform(size=m), k=k)
            x = rng.normal(size=m * 2**k)
            gap = abs(predict_modular(x, spec, ProtocolConfig(shots=shots, seed=i)).values[0]
                      - oracle_network(x, spec).values[0])
            worst = max(worst, gap)
            hits += gap <= 5e-3
    ok = hits >= 49 and t.elapsed < 120
    acceptance_report(3, "modular network equivalence", ok,
                      f"{hits}/{total} within 5e-3 (need 49), worst gap {worst:.2e}, {t.elapsed:.1f}s (limit 120s)")
    assert ok


def test_criterion_4_full_equivalence(acceptance_report):
    rng = np.random.default_rng(4)
    shots, hits, total = 10**5, 0, 25
    with Timer() as t:
        for i in range(total):
            k = int(rng.integers(1, 4))
            R, Q = (int(v) for v in rng.integers(1, 5, size=2))
            spec = NetworkSpec.full(rng.normal(size=(R, 2**k)), rng.uniform(size=(R, Q)))
            x = rng.normal(size=2**k)
            y = predict_full(x, spec, ProtocolConfig(shots=shots, seed=i)).values
            hits += bool(np.all(np.abs(y - oracle_network(x, spec).values) <= 5 / math.sqrt(R * shots)))
    ok = hits >= 24 and t.elapsed < 180
    acceptance_report(4, "full R x Q network equivalence", ok,
                      f"{hits}/{total} with every output within 5/sqrt(R*N) (need 24), {t.elapsed:.1f}s (limit 180s)")
    assert ok


def test_criterion_5_shot_scaling(acceptance_report):
    spec = NetworkSpec.modular([1.0, 1.0, 1.0, 0.0, 0.3, 1.0], [1.0, 0.8, 0.6], k=1)
    x = [1.0, 0.0, 1.0, 0.0, 1.0, 0.5]
    with Timer() as t:
        sds = []
        for shots in (10**3, 10**5):
            f = [predict_modular(x, spec, ProtocolConfig(shots=shots, seed=s)).values[0] for s in range(200)]
            sds.append(float(np.std(f, ddof=1)))
    ratio = sds[0] / sds[1]
    ok = 7 <= ratio <= 14 and t.elapsed < 120
    acceptance_report(5, "1/sqrt(N) scaling", ok,
                      f"std ratio {ratio:.2f} (band [7, 14]), {t.elapsed:.1f}s (limit 120s)")
    assert ok


def test_criterion_6_entangled_input(acceptance_report):
    bell = QState(np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2))
    spec = NetworkSpec.modular([1.0, 0.0, 1.0, 0.0], [1.0, 1.0], k=1)
    shots = 10**5
    with Timer() as t:
        expected = float(expected_quantum_input(bell, spec)[0])
        w = QState.basis("0")
        rho = DensityMatrix.from_state(bell)
        marg = [swap_test_mixed(partial_trace(rho, [l]), w).p_zero for l in (0, 1)]
        cfg = ProtocolConfig(shots=shots, efficiencies=(1.0, 1.0), seed=6, joint=True)
        strings = run_protocol_joint(network_state(bell, [w, w]), cfg, k=1)
        freqs = [s.n_zero / shots for s in strings]
        sig = [math.sqrt(p * (1 - p) / shots) for p in marg]
        f = predict_quantum_input(bell, spec, cfg).values[0]
    ok = (
        abs(expected - 0.5) <= 1e-12
        and all(abs(fr - p) <= 3 * s for fr, p, s in zip(freqs, marg, sig))
        and abs(f - expected) <= 3 * math.sqrt(0.5 / shots)
        and t.elapsed < 30
    )
    acceptance_report(6, "entangled input", ok,
                      f"E[f]={expected:.12f} (want 0.5), joint marginals {freqs[0]:.5f}, {freqs[1]:.5f} "
                      f"vs {marg[0]:.3f} (3 sigma = {3 * sig[0]:.4f}), f={f:.5f}, {t.elapsed:.2f}s (limit 30s)")
    assert ok


def test_criterion_7_gradient(acceptance_report):
    rng = np.random.default_rng(7)
    with Timer() as t:
        worst = 0.0
        for _ in range(100):
            k, R, Q = (int(v) for v in rng.integers(1, 4, size=3))
            spec = NetworkSpec.full(rng.normal(size=(R, 2**k)), rng.uniform(0.05, 0.95, size=(R, Q)))
            data = Dataset(rng.normal(size=(5, 2**k)), rng.uniform(size=(5, Q)))
            worst = max(worst, relative_error(gradient(spec, data), finite_difference_gradient(spec, data)))
    ok = worst <= 1e-5 and t.elapsed < 30
    acceptance_report(7, "gradient vs finite differences", ok,
                      f"max relative error {worst:.2e} over 100 instances (tol 1e-5), {t.elapsed:.2f}s (limit 30s)")
    assert ok


def test_criterion_8_teacher_student(acceptance_report):
    _, data, student = teacher_student(seed=0)
    assert (data.N, student.R, data.Q) == (4, 2, 1)
    feasible = []

    def check(epoch, spec, value):
        feasible.append(bool(np.all((spec.efficiencies >= 0) & (spec.efficiencies <= 1))))

    cfg = TrainConfig()
    with Timer() as t:
        res = train(student, data, cfg, on_step=check)
    epochs = len(res.trace) - 1
    ok = res.final_loss <= 1e-3 and epochs <= 5000 and all(feasible) and t.elapsed < 60
    acceptance_report(8, "teacher-student training", ok,
                      f"loss {res.final_loss:.2e} (tol 1e-3) after {epochs} epochs at lr={cfg.learning_rate}, "
                      f"efficiencies feasible at every step: {all(feasible)}, {t.elapsed:.2f}s (limit 60s)")
    assert ok


def _cli():
    exe = shutil.which("swapqnn")
    return [exe] if exe else [sys.executable, "-m", "swapqnn.cli"]


def test_criterion_9_determinism(acceptance_report, tmp_path):
    spec = NetworkSpec.block(np.random.default_rng(9).normal(size=(3, 2, 4)), np.full((3, 2, 2), 0.7), k=2)
    cfg = tmp_path / "spec.json"
    cfg.write_text(spec.to_json())
    outputs = []
    for i, threads in enumerate(("1", "1", "4", "3")):
        env = dict(os.environ, SWAPQNN_THREADS=threads)
        out = tmp_path / f"report{i}.json"
        proc = subprocess.run(
            _cli() + ["predict", "--config", str(cfg), "--input", "1,2,3,4,5,6,7,8",
                      "--shots", "20000", "--seed", "99", "--out", str(out)],
            env=env, capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append(out.read_bytes())
    ok = all(o == outputs[0] for o in outputs)
    acceptance_report(9, "deterministic predict reports", ok,
                      "4 runs (threads 1, 1, 4, 3) byte-identical" if ok else "reports differ")
    assert ok
