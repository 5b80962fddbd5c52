"""Command-line entry point: ``swapqnn {swaptest,predict,layout,train,verify}``.

Exit status: 0 on success, 1 on validation or configuration errors, 2 on
runtime or numerical failures (including failed verification checks).
Reports are JSON with sorted keys, so identical inputs give identical bytes.
The thread count used for sampling can be set through ``SWAPQNN_THREADS``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, SwapQNNError, ValidationError, ZeroNormPiece
from .measurement import LossMode, ProtocolConfig, estimate, measure_lossy, substream
from .model import NetworkSpec, Topology, oracle_network, plan_layout, predict
from .quantum_core import amplitude_encode
from .swap_test import swap_test_analytic, swap_test_circuit
from .trainer import TrainConfig, load_dataset, train
from .verify import run_checks

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.replace(" ", "").split(",") if v], dtype=float)
    except ValueError:
        raise ConfigError(f"cannot parse vector {text!r}") from None


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _read_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _base_report(command: str, seed: int | None = None, shots: int | None = None) -> dict:
    return {"command": command, "tool_version": __version__, "seed": seed, "shots": shots}


# --------------------------------------------------------------------------- #


def cmd_swaptest(args) -> int:
    psi = amplitude_encode(_vector(args.psi))
    phi = amplitude_encode(_vector(args.phi))
    analytic = swap_test_analytic(psi, phi)
    circuit = swap_test_circuit(psi, phi)
    report = _base_report("swaptest", args.seed, args.shots)
    report.update(
        p_zero_analytic=analytic.p_zero,
        p_zero_circuit=circuit.p_zero,
        overlap_sq=analytic.overlap_sq,
    )
    if args.shots:
        s = measure_lossy(analytic.p_zero, 1.0, args.shots, substream(args.seed, 0),
                          args.loss_mode or LossMode.STOCHASTIC_THINNING)
        est = estimate([s], args.shots)
        report.update(
            p_zero_sampled=est.f_hat,
            error_bound=est.std_error_bound,
            error_bound_formula="1/sqrt(shots)",
        )
    _emit(report, args.out)
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _read_json(args.config)
    spec = NetworkSpec.from_dict(cfg, topology=args.topology)
    protocol = cfg.get("protocol", {}) if isinstance(cfg.get("protocol", {}), dict) else {}
    if args.input is not None:
        x = _vector(args.input)
    elif "input" in cfg:
        x = np.asarray(cfg["input"], dtype=float)
    else:
        raise ConfigError("missing field 'input' (give --input or an 'input' entry in the config)")
    shots = args.shots or protocol.get("shots")
    if shots is None:
        raise ConfigError("missing field 'shots' (give --shots or protocol.shots)")
    seed = args.seed if args.seed is not None else protocol.get("seed", 0)
    mode = args.loss_mode or protocol.get("loss_mode", LossMode.STOCHASTIC_THINNING.value)
    config = ProtocolConfig(shots=int(shots), loss_mode=mode, seed=int(seed))

    pred = predict(x, spec, config)
    oracle = oracle_network(x, spec).values
    gap = np.abs(pred.values - oracle)
    report = _base_report("predict", config.seed, config.shots)
    report.update(
        topology=spec.topology.value,
        loss_mode=config.loss_mode.value,
        R=spec.R,
        m=spec.m,
        Q=spec.Q,
        values=pred.values.tolist(),
        oracle=oracle.tolist(),
        gap=gap.tolist(),
        max_gap=float(gap.max()),
        error_bound=pred.error_bound,
        error_bound_formula="1/sqrt(R*shots)",
        shots_used=pred.shots_used,
    )
    _emit(report, args.out)
    return EXIT_OK


def cmd_layout(args) -> int:
    lay = plan_layout(args.N, args.k)
    lines = [f"m={lay.m}, qubits={lay.total_qubits}"]
    for l in range(lay.m):
        lo, hi = l * lay.piece_size, min((l + 1) * lay.piece_size, lay.N)
        lines.append(
            f"module {l + 1}: qubits={lay.qubits_per_module} (control 1 + input {lay.k} + weight {lay.k}), "
            f"entries {lo + 1}..{hi}"
        )
    if lay.padding:
        lines.append(f"padding: {lay.padding} entries")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_train(args) -> int:
    spec = NetworkSpec.from_dict(_read_json(args.config), topology=args.topology)
    try:
        data = load_dataset(args.data)
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {args.data!r}: {exc.strerror}") from None
    cfg = TrainConfig(learning_rate=args.lr, max_epochs=args.epochs, tolerance=args.tolerance, seed=args.seed or 0)
    result = train(spec, data, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trained_spec.json").write_text(result.spec.to_json() + "\n")
    (out / "loss_trace.csv").write_text(result.trace_csv())
    report = _base_report("train", cfg.seed, None)
    report.update(
        epochs=len(result.trace) - 1,
        initial_loss=result.trace[0],
        final_loss=result.final_loss,
        learning_rate=cfg.learning_rate,
        loss_metric=cfg.loss_metric.value,
        error_bound_formula="none (trained on the exact network)",
    )
    _emit(report, str(out / "report.json"))
    sys.stdout.write(f"final_loss={result.final_loss!r} epochs={len(result.trace) - 1}\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_checks(seed=args.seed or 0)
    for r in results:
        sys.stdout.write(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}\n")
    failed = [r.name for r in results if not r.passed]
    sys.stdout.write(f"{len(results) - len(failed)}/{len(results)} checks passed\n")
    return EXIT_RUNTIME if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="swapqnn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"swapqnn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, shots=True):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        if shots:
            p.add_argument("--shots", type=int, default=None)
            p.add_argument("--loss-mode", choices=[m.value for m in LossMode], default=None)

    p = sub.add_parser("swaptest", help="swap-test probability of two vectors")
    p.add_argument("--psi", required=True, help="comma-separated vector")
    p.add_argument("--phi", required=True, help="comma-separated vector")
    common(p)
    p.set_defaults(func=cmd_swaptest)

    p = sub.add_parser("predict", help="sampled prediction of a network")
    p.add_argument("--config", required=True, help="network spec JSON")
    p.add_argument("--input", default=None, help="comma-separated input vector")
    p.add_argument("--topology", choices=[t.value for t in Topology], default=None)
    common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("layout", help="module count and qubit budget")
    p.add_argument("N", type=int)
    p.add_argument("k", type=int)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_layout)

    p = sub.add_parser("train", help="fit weights and efficiencies on a dataset")
    p.add_argument("--config", required=True, help="initial network spec JSON")
    p.add_argument("--data", required=True, help="CSV dataset with header x0..,y0..")
    p.add_argument("--topology", choices=[t.value for t in Topology], default=None)
    p.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--epochs", type=int, default=TrainConfig.max_epochs)
    p.add_argument("--tolerance", type=float, default=TrainConfig.tolerance)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("verify", help="run the invariant self-checks")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "swaptest" and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except ZeroNormPiece as exc:
        sys.stderr.write(f"error: zero-norm piece at index {exc.index}: {exc}\n")
        return EXIT_VALIDATION
    except (ValidationError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except (SwapQNNError, ArithmeticError) as exc:
        sys.stderr.write(f"runtime error: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
