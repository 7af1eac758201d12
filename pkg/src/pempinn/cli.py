"""Command-line pipeline: simulate, generate-data, train, evaluate, reproduce.

Every command writes its artifacts into an output directory together with an
append-only ``manifest.json`` recording the command, config hash, seeds, and
file checksums. Exit codes are a stable contract for CI: 0 success, 2
configuration error, 3 numerical failure, 4 I/O failure (1 is reserved for
a completed reproduction run whose acceptance checks did not all pass).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import __version__
from .config import RunConfig, config_hash, load_config
from .errors import (
    ConfigError,
    DatasetFormatError,
    NumericalError,
    PempinnError,
)
from .network import load_checkpoint, save_checkpoint
from .simulator import (
    generate_dataset,
    integrate_trajectory,
    load_dataset,
    save_dataset,
    save_trajectory,
)
from .training import evaluate, train

K5_RECOVERY_WINDOW = (0.90, 1.10)
RMSE_BOUND_V = 0.02       # V
RMSE_BOUND_MEM = 5.0e-4   # cm
PINN_OVER_ANN_FACTOR = 5.0


def _default_config_path() -> Path:
    return Path(resources.files("pempinn") / "data" / "default_config.json")


def _load(args) -> RunConfig:
    path = Path(args.config) if args.config else _default_config_path()
    cfg = load_config(path)
    if getattr(args, "seed", None) is not None:
        cfg = replace(
            cfg,
            simulation=replace(cfg.simulation, dataset_seed=args.seed),
            training=replace(cfg.training, seed=args.seed),
        )
    if getattr(args, "epochs", None) is not None:
        cfg = replace(cfg, training=replace(cfg.training, max_epochs=args.epochs))
    if getattr(args, "no_physics", False):
        cfg = replace(cfg, training=replace(cfg.training, physics_enabled=False))
    return cfg


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _append_manifest(out_dir: Path, command: str, cfg: RunConfig, outputs, inputs=()):
    manifest_path = out_dir / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
    else:
        manifest = {"runs": []}
    manifest["runs"].append(
        {
            "command": command,
            "tool_version": __version__,
            "config_sha256": config_hash(cfg),
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "seeds": {
                "dataset": cfg.simulation.dataset_seed,
                "training": cfg.training.seed,
            },
            "inputs": [str(p) for p in inputs],
            "outputs": {str(p.name): _sha256(p) for p in outputs},
        }
    )
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")


def _write_history_csv(path: Path, history) -> None:
    lines = ["epoch,loss_data,loss_physics_v,loss_physics_mem,loss_ic,loss_total,k5_hat"]
    for r in history:
        lines.append(
            f"{r.epoch},{r.loss_data!r},{r.loss_physics_v!r},"
            f"{r.loss_physics_mem!r},{r.loss_ic!r},{r.loss_total!r},{r.k5_hat!r}"
        )
    path.write_text("\n".join(lines) + "\n")


def _metrics_dict(metrics) -> dict:
    return {
        "rmse_train_V": metrics.rmse_train_v,
        "rmse_test_V": metrics.rmse_test_v,
        "rmse_train_mem": metrics.rmse_train_mem,
        "rmse_test_mem": metrics.rmse_test_mem,
        "k5_hat_final": metrics.k5_hat_final,
    }


# -- commands ------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    traj = integrate_trajectory(
        cfg.physics,
        cfg.conditions,
        k5=getattr(args, "k5", None),
        n_steps=cfg.simulation.n_steps,
    )
    traj_path = out_dir / "trajectory.csv"
    diag_path = out_dir / "trajectory_diagnostics.csv"
    save_trajectory(traj, traj_path, diag_path)
    _append_manifest(out_dir, "simulate", cfg, [traj_path, diag_path])
    print(f"wrote {traj_path} ({len(traj.times)} samples)")
    return 0


def cmd_generate_data(args) -> int:
    cfg = _load(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    traj = integrate_trajectory(
        cfg.physics,
        cfg.conditions,
        k5=getattr(args, "k5", None),
        n_steps=cfg.simulation.n_steps,
    )
    ds = generate_dataset(
        traj,
        cfg.simulation.n_train,
        cfg.simulation.n_test,
        cfg.simulation.train_fraction,
        cfg.simulation.dataset_seed,
    )
    ds_path = out_dir / "dataset.csv"
    save_dataset(ds, ds_path, config_hash(cfg))
    _append_manifest(
        out_dir, "generate-data", cfg, [ds_path, Path(str(ds_path) + ".meta.json")]
    )
    print(f"wrote {ds_path} ({len(ds.train_times)} train / {len(ds.test_times)} test)")
    return 0


def _train_into(cfg: RunConfig, dataset_path: Path, out_dir: Path, label: str):
    ds = load_dataset(dataset_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / "checkpoint.json"

    def hook(epoch, net):
        save_checkpoint(net, ckpt_path)

    net, metrics = train(
        ds, cfg.physics, cfg.conditions, cfg.training, checkpoint_hook=hook
    )
    save_checkpoint(net, ckpt_path)
    history_path = out_dir / "history.csv"
    _write_history_csv(history_path, metrics.loss_history)
    metrics_path = out_dir / "metrics.json"
    metrics_path.write_text(json.dumps(_metrics_dict(metrics), indent=2) + "\n")
    _append_manifest(
        out_dir,
        f"train[{label}]",
        cfg,
        [ckpt_path, history_path, metrics_path],
        inputs=[dataset_path],
    )
    return net, metrics


def cmd_train(args) -> int:
    cfg = _load(args)
    dataset_path = Path(args.data)
    if not dataset_path.exists():
        print(f"error: dataset not found: {dataset_path}", file=sys.stderr)
        return 2
    label = "ann" if not cfg.training.physics_enabled else "pinn"
    net, metrics = _train_into(cfg, dataset_path, Path(args.out), label)
    print(
        f"trained {label}: k5_hat={metrics.k5_hat_final:.4f} "
        f"test RMSE V={metrics.rmse_test_v:.5f} mem={metrics.rmse_test_mem:.6f}"
    )
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    ckpt_path = Path(args.checkpoint)
    dataset_path = Path(args.data)
    for p in (ckpt_path, dataset_path):
        if not p.exists():
            print(f"error: missing input: {p}", file=sys.stderr)
            return 2
    net = load_checkpoint(ckpt_path)
    ds = load_dataset(dataset_path)
    metrics = evaluate(net, ds)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.json"
    metrics_path.write_text(json.dumps(_metrics_dict(metrics), indent=2) + "\n")
    _append_manifest(
        out_dir, "evaluate", cfg, [metrics_path], inputs=[ckpt_path, dataset_path]
    )
    print(json.dumps(_metrics_dict(metrics), indent=2))
    return 0


def cmd_reproduce(args) -> int:
    cfg = _load(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    stage = "simulate"
    try:
        traj = integrate_trajectory(
            cfg.physics, cfg.conditions, n_steps=cfg.simulation.n_steps
        )
        save_trajectory(
            traj, out_dir / "trajectory.csv", out_dir / "trajectory_diagnostics.csv"
        )

        stage = "generate-data"
        ds = generate_dataset(
            traj,
            cfg.simulation.n_train,
            cfg.simulation.n_test,
            cfg.simulation.train_fraction,
            cfg.simulation.dataset_seed,
        )
        ds_path = out_dir / "dataset.csv"
        save_dataset(ds, ds_path, config_hash(cfg))

        stage = "train-pinn"
        _, pinn = _train_into(cfg, ds_path, out_dir / "pinn", "pinn")

        stage = "train-ann"
        ann_cfg = replace(cfg, training=replace(cfg.training, physics_enabled=False))
        _, ann = _train_into(ann_cfg, ds_path, out_dir / "ann", "ann")
    except PempinnError as exc:
        report = {"status": "FAIL", "failed_stage": stage, "error": str(exc)}
        (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
        print(f"reproduction FAILED at stage {stage}: {exc}", file=sys.stderr)
        raise

    lo, hi = K5_RECOVERY_WINDOW
    checks = {
        "k5_recovery": lo <= pinn.k5_hat_final <= hi,
        "pinn_vs_ann_voltage": pinn.rmse_test_v * PINN_OVER_ANN_FACTOR
        < ann.rmse_test_v,
        "pinn_vs_ann_membrane": pinn.rmse_test_mem * PINN_OVER_ANN_FACTOR
        < ann.rmse_test_mem,
        "rmse_voltage_bound": pinn.rmse_test_v <= RMSE_BOUND_V,
        "rmse_membrane_bound": pinn.rmse_test_mem <= RMSE_BOUND_MEM,
    }

    rows = [
        ("Training RMSE (Voltage) [V]", ann.rmse_train_v, pinn.rmse_train_v),
        ("Testing RMSE (Voltage) [V]", ann.rmse_test_v, pinn.rmse_test_v),
        ("Training RMSE (Membrane) [cm]", ann.rmse_train_mem, pinn.rmse_train_mem),
        ("Testing RMSE (Membrane) [cm]", ann.rmse_test_mem, pinn.rmse_test_mem),
    ]
    lines = [
        f"{'Metric':38s} {'ANN':>12s} {'PINN':>12s}",
        "-" * 64,
    ]
    for name, a, b in rows:
        lines.append(f"{name:38s} {a:12.6f} {b:12.6f}")
    lines.append("")
    lines.append(f"k5_hat_final (target 1.0): {pinn.k5_hat_final:.4f}")
    lines.append("")
    for name, ok in checks.items():
        lines.append(f"{name:38s} {'PASS' if ok else 'FAIL'}")
    report_txt = "\n".join(lines) + "\n"
    (out_dir / "report.txt").write_text(report_txt)

    report = {
        "status": "PASS" if all(checks.values()) else "FAIL",
        "checks": checks,
        "ann": _metrics_dict(ann),
        "pinn": _metrics_dict(pinn),
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    _append_manifest(
        out_dir,
        "reproduce",
        cfg,
        [out_dir / "report.json", out_dir / "report.txt", ds_path],
    )
    print(report_txt)
    return 0 if all(checks.values()) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pempinn",
        description="PEM electrolyzer degradation simulator and PINN calibration",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="path to a run config JSON (default: packaged)")
        p.add_argument("--out", required=True, help="output directory")
        if seed:
            p.add_argument("--seed", type=int, help="override dataset and training seeds")

    p = sub.add_parser("simulate", help="integrate the clean ground-truth trajectory")
    common(p)
    p.add_argument("--k5", type=float, help="override the attack-rate constant")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate-data", help="simulate and sample a noisy dataset")
    common(p)
    p.add_argument("--k5", type=float, help="override the attack-rate constant")
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("train", help="train on a generated dataset")
    common(p)
    p.add_argument("--data", required=True, help="dataset CSV from generate-data")
    p.add_argument("--epochs", type=int, help="override max_epochs")
    p.add_argument(
        "--no-physics",
        action="store_true",
        help="drop the physics residual terms (baseline ANN)",
    )
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint against a dataset")
    common(p, seed=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser(
        "reproduce",
        help="run the full pipeline (simulate, data, PINN, ANN, report)",
    )
    common(p)
    p.add_argument("--epochs", type=int, help="override max_epochs")
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except DatasetFormatError as exc:
        print(f"data format error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
