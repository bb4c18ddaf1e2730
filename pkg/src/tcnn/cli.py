"""Command-line interface: train, eval, count-ops, gradcheck, list-variants.

Configuration may come from a JSON file (--config) whose sections mirror
the flags; explicit flags override file values, which override defaults.
The TCNN_SEED environment variable is the last-resort seed.

Exit codes: 0 success, 2 configuration error, 3 data or I/O error,
4 check failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import complexity, data, gradcheck, zoo
from .errors import DomainError, FormatError, ShapeError
from .train import TrainConfig, evaluate, fit, load_checkpoint, save_checkpoint
from .zoo import ModelConfig, VariantId

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CHECK = 4


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


def _env_seed() -> int:
    raw = os.environ.get("TCNN_SEED", "")
    if not raw:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"TCNN_SEED must be an integer, got {raw!r}") from exc


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return doc


def _merged(file_section: dict, flags: dict) -> dict:
    out = dict(file_section)
    for key, value in flags.items():
        if value is not None:
            out[key] = value
    return out


def _model_config(args, file_doc: dict) -> ModelConfig:
    section = _merged(file_doc.get("model", {}), {
        "variant": args.variant,
        "dim": args.dim,
        "input_shape": [int(s) for s in args.input_shape.split(",")] if args.input_shape else None,
        "num_classes": args.num_classes,
        "seed": args.seed,
    })
    if "variant" not in section:
        raise ConfigError("a model variant is required (--variant or config file)")
    section.setdefault("dim", 2)
    section.setdefault("input_shape", [1, 28, 28] if section["dim"] == 2 else None)
    if section["input_shape"] is None:
        raise ConfigError("--input-shape is required for 1d/3d models")
    section.setdefault("num_classes", 10)
    section.setdefault("seed", _env_seed())
    try:
        return ModelConfig(
            variant=VariantId(section["variant"]),
            dim=int(section["dim"]),
            input_shape=tuple(section["input_shape"]),
            num_classes=int(section["num_classes"]),
            seed=int(section["seed"]),
        )
    except (ValueError, DomainError, ShapeError) as exc:
        raise ConfigError(f"invalid model config: {exc}") from exc


def _train_config(args, file_doc: dict) -> TrainConfig:
    section = _merged(file_doc.get("train", {}), {
        "optimizer": getattr(args, "optimizer", None),
        "lr": getattr(args, "lr", None),
        "schedule": getattr(args, "schedule", None),
        "gamma": getattr(args, "gamma", None),
        "batch_size": getattr(args, "batch_size", None),
        "epochs": getattr(args, "epochs", None),
        "seed": getattr(args, "seed", None),
    })
    section.setdefault("seed", _env_seed())
    try:
        return TrainConfig.from_json_dict(section)
    except (TypeError, ValueError, DomainError) as exc:
        raise ConfigError(f"invalid train config: {exc}") from exc


def _load_data(args, file_doc: dict):
    """Returns (train_set, test_set) per the data section."""
    section = _merged(file_doc.get("data", {}), {
        "kind": getattr(args, "data_kind", None),
        "synthetic": getattr(args, "synthetic_kind", None),
        "n": getattr(args, "n_samples", None),
        "classes": getattr(args, "classes", None),
        "separation": getattr(args, "separation", None),
        "seed": getattr(args, "data_seed", None),
        "train_images": getattr(args, "train_images", None),
        "train_labels": getattr(args, "train_labels", None),
        "test_images": getattr(args, "test_images", None),
        "test_labels": getattr(args, "test_labels", None),
        "train_csv": getattr(args, "train_csv", None),
        "test_csv": getattr(args, "test_csv", None),
    })
    kind = section.get("kind", "synthetic")
    try:
        if kind == "synthetic":
            ds = data.synthetic(section.get("synthetic", "blobs-2d"),
                                int(section.get("n", 500)),
                                int(section.get("classes", 3)),
                                int(section.get("seed", 0)),
                                float(section.get("separation", 3.0)))
            return data.split(ds, (0.8, 0.2), int(section.get("seed", 0)))
        if kind == "idx":
            for key in ("train_images", "train_labels", "test_images", "test_labels"):
                if not section.get(key):
                    raise ConfigError(f"idx data requires --{key.replace('_', '-')}")
            train = data.load_idx(section["train_images"], section["train_labels"])
            test = data.load_idx(section["test_images"], section["test_labels"])
            return train, test
        if kind == "csv":
            if not section.get("train_csv"):
                raise ConfigError("csv data requires --train-csv")
            train = data.load_csv_labeled(section["train_csv"])
            if section.get("test_csv"):
                return train, data.load_csv_labeled(section["test_csv"])
            return data.split(train, (0.8, 0.2), int(section.get("seed", 0)))
        raise ConfigError(f"unknown data kind {kind!r}")
    except (FileNotFoundError, OSError, FormatError) as exc:
        raise DataError(str(exc)) from exc
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def _output_dir(args, file_doc: dict) -> Path:
    out = args.output_dir or file_doc.get("output_dir") or "tcnn-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_train(args) -> int:
    file_doc = _load_config_file(args.config)
    model_config = _model_config(args, file_doc)
    train_config = _train_config(args, file_doc)
    out_dir = _output_dir(args, file_doc)
    train_set, test_set = _load_data(args, file_doc)
    try:
        model = zoo.build(model_config)
    except (ShapeError, DomainError) as exc:
        raise ConfigError(f"cannot build model: {exc}") from exc

    def progress(row):
        print(f"epoch {row['epoch']}: lr={row['lr']:.6g} "
              f"loss={row['train_loss']:.4f} test_acc={row['test_acc']:.4f}")

    _, state = fit(model, train_set, test_set, train_config,
                   log_path=out_dir / "train_log.csv", progress=progress)
    save_checkpoint(out_dir / "checkpoint.tcnn", model, model_config, train_config,
                    state, train_config.epochs)
    report = evaluate(model, test_set)
    (out_dir / "metrics.json").write_text(report.to_json(), encoding="utf-8")
    (out_dir / "metrics.csv").write_text(report.to_csv(), encoding="utf-8")
    print(f"final test accuracy: {report.accuracy:.4f}")
    print(f"artifacts written to {out_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    file_doc = _load_config_file(args.config)
    checkpoint = args.checkpoint or file_doc.get("checkpoint")
    if not checkpoint:
        raise ConfigError("--checkpoint is required")
    try:
        model, _, _, _, _ = load_checkpoint(checkpoint)
    except FileNotFoundError as exc:
        raise DataError(f"checkpoint not found: {checkpoint}") from exc
    except FormatError as exc:
        raise DataError(str(exc)) from exc
    _, test_set = _load_data(args, file_doc)
    report = evaluate(model, test_set)
    text = report.to_json()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_count_ops(args) -> int:
    file_doc = _load_config_file(args.config)
    model_config = _model_config(args, file_doc)
    try:
        model = zoo.build(model_config)
    except (ShapeError, DomainError) as exc:
        raise ConfigError(f"cannot build model: {exc}") from exc
    theta = Fraction(args.theta).limit_denominator(10**9) if args.theta is not None \
        else complexity.DEFAULT_THETA
    if theta <= 0:
        raise ConfigError("--theta must be positive")
    cost = complexity.count_model(model, theta=theta, batch=args.batch,
                                  exact_standard=args.exact_standard)
    lines = ["layer,kind,mults,adds,comparisons,omega_u"]
    for row in cost.rows:
        lines.append(f"{row.name},{row.kind.value},{row.count.mults},"
                     f"{row.count.adds},{row.count.comparisons},{float(row.omega_u)!r}")
    lines.append(f"TOTAL,,{cost.total.mults},{cost.total.adds},"
                 f"{cost.total.comparisons},{float(cost.omega_u)!r}")
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = gradcheck.run_all(seed=args.seed if args.seed is not None else _env_seed())
    rows = []
    worst_ok = True
    for res in results:
        status = "ok" if res.ok() else "FAIL"
        print(f"{res.name:<32} {res.passed}/{res.checked} ({res.pass_rate:.1%}) {status}")
        rows.append({"suite": res.name, "checked": res.checked, "passed": res.passed,
                     "pass_rate": res.pass_rate, "ok": res.ok()})
        worst_ok = worst_ok and res.ok()
    if args.output:
        Path(args.output).write_text(json.dumps(rows, indent=2), encoding="utf-8")
    if not worst_ok:
        print("gradient check FAILED")
        return EXIT_CHECK
    print("gradient check passed")
    return EXIT_OK


def cmd_list_variants(_args) -> int:
    for variant, description in zoo.list_variants():
        print(f"{variant.value:<10} {description}")
    return EXIT_OK


def _add_model_flags(parser):
    parser.add_argument("--config", help="JSON config file; flags override its fields")
    parser.add_argument("--variant", help="model variant id (see list-variants)")
    parser.add_argument("--dim", type=int, choices=(1, 2, 3), help="convolution dimensionality")
    parser.add_argument("--input-shape", help="comma-separated, channels first, e.g. 1,28,28")
    parser.add_argument("--num-classes", type=int, help="number of output classes")
    parser.add_argument("--seed", type=int, help="seed for weights and shuffling")


def _add_data_flags(parser):
    parser.add_argument("--data-kind", choices=("synthetic", "idx", "csv"))
    parser.add_argument("--synthetic-kind", choices=("blobs-1d", "blobs-2d", "blobs-3d"))
    parser.add_argument("--n-samples", type=int, help="synthetic sample count")
    parser.add_argument("--classes", type=int, help="synthetic class count")
    parser.add_argument("--separation", type=float, help="synthetic class separation")
    parser.add_argument("--data-seed", type=int, help="seed for data generation/splitting")
    parser.add_argument("--train-images", help="IDX image file (train)")
    parser.add_argument("--train-labels", help="IDX label file (train)")
    parser.add_argument("--test-images", help="IDX image file (test)")
    parser.add_argument("--test-labels", help="IDX label file (test)")
    parser.add_argument("--train-csv", help="labeled CSV (train)")
    parser.add_argument("--test-csv", help="labeled CSV (test)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tcnn",
                                     description="tropical convolutional networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write artifacts")
    _add_model_flags(p)
    _add_data_flags(p)
    p.add_argument("--optimizer", choices=("adam", "sgd"))
    p.add_argument("--lr", type=float, help="initial learning rate")
    p.add_argument("--schedule", choices=("none", "exponential", "multistep"))
    p.add_argument("--gamma", type=float, help="exponential decay factor")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--output-dir", help="directory for checkpoint/log/metrics")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--checkpoint", help="checkpoint file written by train")
    p.add_argument("--output", help="write the metrics JSON here as well")
    _add_data_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("count-ops", help="closed-form operation counts as CSV")
    _add_model_flags(p)
    p.add_argument("--theta", type=float, help="multiplication weight (default 10)")
    p.add_argument("--batch", type=int, default=1, help="batch size multiplier")
    p.add_argument("--exact-standard", action="store_true",
                   help="use the conventional standard-conv addition count")
    p.add_argument("--output", help="also write the CSV here")
    p.set_defaults(func=cmd_count_ops)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    p.add_argument("--seed", type=int, help="suite seed")
    p.add_argument("--output", help="write a JSON report here")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("list-variants", help="print the model roster")
    p.set_defaults(func=cmd_list_variants)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DomainError, ShapeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
