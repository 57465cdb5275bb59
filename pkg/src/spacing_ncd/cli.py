"""Command-line pipeline: generate data, solve anchors, train, evaluate.

Every command resolves its settings in the same order: built-in defaults,
then an optional --config JSON file, then explicit flags (the environment
variable SPACING_NCD_SEED slots in as the default seed). Each command
writes its artifacts plus a manifest JSON recording the resolved
configuration, paths, version, and wall-clock duration.

Exit codes: 0 success, 2 usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    SplitSpec,
    generate_mixture,
    load_csv,
    load_points_csv,
    load_sidecar,
    save_csv,
    save_points_csv,
    save_sidecar,
    split,
)
from .exceptions import (
    ConfigError,
    InvalidAlphaError,
    SpacingNCDError,
)
from .geometry import SolverSettings, get_equidistant_points
from .metrics import evaluate_clustering, report_to_json
from .model import ModelBundle, embed, load_checkpoint, save_checkpoint
from .training import (
    TrainingConfig,
    trace_to_jsonl,
    train_single_stage,
    train_two_stage,
)

_REQUIRED = object()
_SEED = object()  # placeholder resolved from SPACING_NCD_SEED or 0

_COMMAND_DEFAULTS: dict[str, dict] = {
    "gen-data": {
        "classes": _REQUIRED,
        "labeled": _REQUIRED,
        "per_class": 500,
        "dim": 32,
        "cluster_std": 1.0,
        "separation": 8.0,
        "seed": _SEED,
        "out": _REQUIRED,
    },
    "equidistant": {
        "input": _REQUIRED,
        "alpha": 1.5,
        "epsilon": 1e-8,
        "max_iterations": 10_000,
        "seed": _SEED,
        "out": _REQUIRED,
    },
    "train": {
        "data": _REQUIRED,
        "out": _REQUIRED,
        "mode": "two-stage",
        "novel_classes": None,
        "epochs": 30,
        "phase1_epochs": None,
        "batch_size": 64,
        "learning_rate": 1e-2,
        "latent_dim": 16,
        "hidden_dims": "64,64",
        "alpha": 1.5,
        "epsilon": 1e-8,
        "max_solver_iterations": 10_000,
        "spacing_weight": 1.0,
        "cross_entropy_weight": 1.0,
        "pairwise_weight": 1.0,
        "consistency_weight": 1.0,
        "rho": 0.9,
        "transport_mode": "verbatim",
        "convex_lambda": 0.5,
        "augment_noise_sigma": None,
        "consistency_on": "unlabeled",
        "prototype_class_count_policy": "novel_only",
        "recompute_anchors_each_epoch": 0,
        "seed": _SEED,
    },
    "eval": {
        "data": _REQUIRED,
        "checkpoint": _REQUIRED,
        "sidecar": None,
        "k": None,
        "seed": _SEED,
        "out": _REQUIRED,
    },
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spacing-ncd",
        description="Class discovery with equidistant latent anchors.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(cmd: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(cmd, help=help_text)
        p.add_argument(
            "--config",
            default=None,
            help="JSON file supplying any flag; explicit flags override it",
        )
        for name in _COMMAND_DEFAULTS[cmd]:
            flag = "--" + name.replace("_", "-")
            p.add_argument(flag, default=None)
        return p

    add("gen-data", "synthesize a labeled/unlabeled Gaussian mixture")
    add("equidistant", "solve mutually equidistant anchors for a point CSV")
    add("train", "train a model on a feature CSV (-1 labels are unlabeled)")
    add("eval", "score a checkpoint's clustering against the truth sidecar")
    return parser


def _resolve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
    """Merge defaults, the optional config file, the seed env var, and
    explicit flags, then require that nothing mandatory is missing.
    """
    defaults = _COMMAND_DEFAULTS[args.command]
    merged = dict(defaults)
    if args.config is not None:
        with open(args.config) as handle:
            try:
                payload = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {args.config}: {exc}") from exc
        unknown = set(payload) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(payload)
    if merged.get("seed") is _SEED:
        merged["seed"] = int(os.environ.get("SPACING_NCD_SEED", 0))
    for name in defaults:
        value = getattr(args, name)
        if value is not None:
            merged[name] = value
    missing = [n for n, v in merged.items() if v is _REQUIRED]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in sorted(missing))
        parser.error(f"{args.command}: missing required flags: {flags}")
    return merged


def _hidden_dims(value) -> tuple[int, ...]:
    if isinstance(value, str):
        parts = [p for p in value.split(",") if p.strip()]
        return tuple(int(p) for p in parts)
    return tuple(int(v) for v in value)


def _optional(value, cast):
    if value is None or value == "":
        return None
    return cast(value)


def _manifest_path(out_dir: Path) -> Path:
    return out_dir / "manifest.json"


def _write_manifest(
    out_dir: Path,
    command: str,
    configuration: dict,
    inputs: dict,
    outputs: dict,
    started: float,
    status: str = "complete",
    error: str | None = None,
) -> None:
    payload = {
        "command": command,
        "version": __version__,
        "seed": configuration.get("seed"),
        "configuration": {k: v for k, v in configuration.items()},
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {k: str(v) for k, v in outputs.items()},
        "duration_seconds": time.monotonic() - started,
        "status": status,
        "error": error,
    }
    with open(_manifest_path(out_dir), "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _features_path(data: str) -> Path:
    """--data accepts either a gen-data output directory or a CSV file."""
    path = Path(data)
    return path / "features.csv" if path.is_dir() else path


def _cmd_gen_data(merged: dict) -> int:
    started = time.monotonic()
    out_dir = Path(merged["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = SplitSpec(
        total_classes=int(merged["classes"]),
        labeled_classes=int(merged["labeled"]),
        samples_per_class=int(merged["per_class"]),
        dimensionality=int(merged["dim"]),
        cluster_std=float(merged["cluster_std"]),
        mean_separation=float(merged["separation"]),
        seed=int(merged["seed"]),
    )
    dataset, sidecar = generate_mixture(spec)
    features_path = out_dir / "features.csv"
    sidecar_path = out_dir / "sidecar.csv"
    save_csv(features_path, dataset)
    save_sidecar(sidecar_path, sidecar)
    _write_manifest(
        out_dir,
        "gen-data",
        {**merged, "seed": spec.seed},
        inputs={},
        outputs={"features": features_path, "sidecar": sidecar_path},
        started=started,
    )
    print(f"wrote {dataset.n_samples} rows to {features_path}")
    return 0


def _cmd_equidistant(merged: dict) -> int:
    started = time.monotonic()
    out_dir = Path(merged["out"])
    alpha = float(merged["alpha"])
    if not alpha > 1:
        raise InvalidAlphaError(f"alpha must be > 1, got {alpha}")
    points = load_points_csv(merged["input"])
    result = get_equidistant_points(
        points,
        alpha=alpha,
        settings=SolverSettings(
            epsilon=float(merged["epsilon"]),
            max_iterations=int(merged["max_iterations"]),
            seed=int(merged["seed"]),
        ),
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    anchors_path = out_dir / "anchors.csv"
    diagnostics_path = out_dir / "diagnostics.json"
    save_points_csv(anchors_path, result.points)
    diagnostics = {
        "iterations": result.iterations,
        "final_stress": result.final_stress,
        "converged": result.converged,
    }
    with open(diagnostics_path, "w") as handle:
        json.dump(diagnostics, handle, indent=2, sort_keys=True)
        handle.write("\n")
    _write_manifest(
        out_dir,
        "equidistant",
        merged,
        inputs={"points": merged["input"]},
        outputs={"anchors": anchors_path, "diagnostics": diagnostics_path},
        started=started,
    )
    print(json.dumps(diagnostics, sort_keys=True))
    return 0


def _training_config(merged: dict, labeled_class_count: int) -> TrainingConfig:
    novel = _optional(merged["novel_classes"], int)
    if novel is None:
        # Balanced-split default: discover as many classes as were labeled.
        novel = labeled_class_count
        if novel < 2:
            raise ConfigError(
                "cannot infer --novel-classes from a pool with "
                f"{labeled_class_count} labeled classes; pass it explicitly"
            )
    mode = merged["mode"]
    if mode not in ("single", "two-stage"):
        raise ConfigError(f"mode must be 'single' or 'two-stage', got {mode!r}")
    return TrainingConfig(
        novel_classes=novel,
        epochs=int(merged["epochs"]),
        phase1_epochs=_optional(merged["phase1_epochs"], int),
        batch_size=int(merged["batch_size"]),
        learning_rate=float(merged["learning_rate"]),
        alpha=float(merged["alpha"]),
        epsilon=float(merged["epsilon"]),
        max_solver_iterations=int(merged["max_solver_iterations"]),
        seed=int(merged["seed"]),
        latent_dim=int(merged["latent_dim"]),
        hidden_dims=_hidden_dims(merged["hidden_dims"]),
        spacing_weight=float(merged["spacing_weight"]),
        cross_entropy_weight=float(merged["cross_entropy_weight"]),
        pairwise_weight=float(merged["pairwise_weight"]),
        consistency_weight=float(merged["consistency_weight"]),
        regime="two_stage" if mode == "two-stage" else "single_stage",
        prototype_class_count_policy=merged["prototype_class_count_policy"],
        transport_mode=merged["transport_mode"],
        convex_lambda=float(merged["convex_lambda"]),
        rho=float(merged["rho"]),
        augment_noise_sigma=_optional(merged["augment_noise_sigma"], float),
        consistency_on=merged["consistency_on"],
        recompute_anchors_each_epoch=bool(int(merged["recompute_anchors_each_epoch"])),
    )


def _cmd_train(merged: dict) -> int:
    started = time.monotonic()
    out_dir = Path(merged["out"])
    features_path = _features_path(merged["data"])
    dataset = load_csv(features_path)
    labeled, unlabeled = split(dataset)
    config = _training_config(merged, int(np.unique(labeled.labels).shape[0]))
    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out_dir / "checkpoint"
    phase1_path = out_dir / "phase1-checkpoint"
    trace_path = out_dir / "trace.jsonl"
    outputs = {"checkpoint": checkpoint_path, "trace": trace_path}
    try:
        if config.regime == "two_stage":
            outputs["phase1_checkpoint"] = phase1_path
            bundle, trace = train_two_stage(
                labeled, unlabeled, config, checkpoint_path=phase1_path
            )
        else:
            bundle, trace = train_single_stage(labeled, unlabeled, config)
    except SpacingNCDError as exc:
        _write_manifest(
            out_dir,
            "train",
            {**merged, "seed": config.seed},
            inputs={"features": features_path},
            outputs={k: v for k, v in outputs.items() if Path(v).exists()},
            started=started,
            status="incomplete",
            error=f"{type(exc).__name__}: {exc}",
        )
        raise
    save_checkpoint(checkpoint_path, bundle)
    with open(trace_path, "w") as handle:
        handle.write(trace_to_jsonl(trace))
        handle.write("\n")
    _write_manifest(
        out_dir,
        "train",
        {**merged, "seed": config.seed, "novel_classes": config.novel_classes},
        inputs={"features": features_path},
        outputs=outputs,
        started=started,
    )
    print(f"trained {config.regime} model, checkpoint at {checkpoint_path}")
    return 0


def _cmd_eval(merged: dict) -> int:
    started = time.monotonic()
    out_dir = Path(merged["out"])
    features_path = _features_path(merged["data"])
    sidecar_path = (
        Path(merged["sidecar"])
        if merged["sidecar"] is not None
        else features_path.parent / "sidecar.csv"
    )
    dataset = load_csv(features_path)
    _, unlabeled = split(dataset)
    sidecar = load_sidecar(sidecar_path)
    truth = sidecar.labels_for(unlabeled.ids)
    bundle: ModelBundle = load_checkpoint(merged["checkpoint"])
    latents = embed(bundle.extractor, unlabeled.features)
    k = _optional(merged["k"], int)
    if k is None:
        k = int(np.unique(truth).shape[0])
    report = evaluate_clustering(latents, truth, k=k, seed=int(merged["seed"]))
    payload = report_to_json(report)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    with open(report_path, "w") as handle:
        handle.write(payload)
        handle.write("\n")
    _write_manifest(
        out_dir,
        "eval",
        {**merged, "k": k},
        inputs={
            "features": features_path,
            "sidecar": sidecar_path,
            "checkpoint": merged["checkpoint"],
        },
        outputs={"report": report_path},
        started=started,
    )
    print(payload)
    return 0


_HANDLERS = {
    "gen-data": _cmd_gen_data,
    "equidistant": _cmd_equidistant,
    "train": _cmd_train,
    "eval": _cmd_eval,
}

# Bad knob values are the caller's mistake; everything else that the
# package raises is a runtime failure.
_USAGE_ERRORS = (ConfigError, InvalidAlphaError)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        merged = _resolve(args, parser)
        return _HANDLERS[args.command](merged)
    except SystemExit as exc:
        return int(exc.code or 0)
    except _USAGE_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except SpacingNCDError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
