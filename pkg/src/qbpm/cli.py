"""Command line entry point: ``qbpm {train,evaluate,inspect-circuit,noise-sweep}``.

Exit codes: 0 success, 1 config error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .data import augment_minority, load_dataset, split
from .exceptions import (CapacityError, ConfigError, DataError, EncodingError, NumericalError)
from .model import TrainingConfig, build_programs, evaluate, load_params, save_params, train
from .noise import NoiseConfig, stream
from .statevector import n_qubits_for

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
DATA_KEYS = {"root", "image_size", "train_fraction", "augment_class", "augment_target", "split_seed"}
EPOCH_COLUMNS = ["epoch", "train_loss", "train_acc", "val_loss", "val_acc", "seconds"]

log = logging.getLogger("qbpm")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _add_overrides(p):
    p.add_argument("--config", type=Path, help="YAML or JSON run config")
    p.add_argument("--n-qubits", type=int)
    p.add_argument("--n-layers", type=int)
    p.add_argument("--n-classes", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--lambda", dest="reg_lambda", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--hadamard", choices=["per_layer", "first_layer_only"])
    p.add_argument("--logit-selection", type=lambda s: [int(v) for v in s.split(",")])
    p.add_argument("--n-jobs", type=int)
    p.add_argument("--noise-modes", help="comma list of pixel,gate,phase")
    p.add_argument("--pixel-sigma", type=float)
    p.add_argument("--pixel-factor", type=float)
    p.add_argument("--gate-sigma", type=float)
    p.add_argument("--phase-sigma", type=float)
    p.add_argument("--noise-seed", type=int)


def _add_data(p):
    p.add_argument("--data", type=Path, help="dataset root (class folders or raw features.f32/labels.txt)")
    p.add_argument("--image-size", type=int, nargs=2, metavar=("H", "W"))
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--augment-class", help="class name grown by augmentation in the training split")
    p.add_argument("--augment-target", type=int)


def build_parser():
    parser = _Parser(prog="qbpm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train and write epochs.csv, report.json, params.bin")
    _add_overrides(p)
    _add_data(p)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("evaluate", help="evaluate saved parameters on a dataset")
    _add_overrides(p)
    _add_data(p)
    p.add_argument("--params", type=Path, required=True)
    p.add_argument("--split", choices=["all", "train", "validation"], default="all")
    p.add_argument("--out", type=Path, help="report path (stdout when omitted)")

    p = sub.add_parser("inspect-circuit", help="print gate lists and the parameter count")
    _add_overrides(p)
    p.add_argument("--variant", choices=["pqc1", "pqc2", "both"], default="both")
    p.add_argument("--summary", action="store_true", help="gate counts only")

    p = sub.add_parser("noise-sweep", help="train over a grid of noise levels")
    _add_overrides(p)
    _add_data(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--pixel-sigmas", type=_floats, default=None)
    p.add_argument("--gate-sigmas", type=_floats, default=None)
    p.add_argument("--phase-sigmas", type=_floats, default=None)
    return parser


def load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return doc


def resolve_config(args) -> tuple:
    """Merge file values with CLI flags; returns ``(config dict, data dict)``."""
    doc = load_config_file(args.config)
    data = dict(doc.pop("data", None) or {})
    unknown = set(data) - DATA_KEYS
    if unknown:
        raise ConfigError(f"unknown data key(s): {sorted(unknown)}")
    noise = dict(doc.pop("noise", None) or {})
    flags = {
        "n_qubits": args.n_qubits, "n_layers": args.n_layers, "n_classes": args.n_classes,
        "epochs": args.epochs, "batch_size": args.batch_size, "learning_rate": args.learning_rate,
        "reg_lambda": args.reg_lambda, "seed": args.seed, "hadamard": args.hadamard,
        "logit_selection": args.logit_selection, "n_jobs": args.n_jobs,
    }
    if "lambda" in doc:
        doc["reg_lambda"] = doc.pop("lambda")
    doc.update({k: v for k, v in flags.items() if v is not None})
    noise_flags = {
        "modes": args.noise_modes, "pixel_sigma": args.pixel_sigma, "pixel_factor": args.pixel_factor,
        "gate_sigma": args.gate_sigma, "phase_sigma": args.phase_sigma, "seed": args.noise_seed,
    }
    noise.update({k: v for k, v in noise_flags.items() if v is not None})
    doc["noise"] = NoiseConfig.from_dict(noise)
    for key, attr in (("root", "data"), ("image_size", "image_size"), ("train_fraction", "train_fraction"),
                      ("augment_class", "augment_class"), ("augment_target", "augment_target")):
        value = getattr(args, attr, None)
        if value is not None:
            data[key] = value
    return doc, data


def _prepare_data(doc, data):
    if not data.get("root"):
        raise ConfigError("no dataset given (--data or data.root)")
    size = tuple(data.get("image_size") or (100, 100))
    manifest, ds = load_dataset(data["root"], size)
    if doc.get("n_classes") not in (None, ds.n_classes):
        raise ConfigError(f"config says {doc['n_classes']} classes, dataset has {ds.n_classes}")
    doc["n_classes"] = ds.n_classes
    if "n_qubits" not in doc:
        doc["n_qubits"] = max(2, n_qubits_for(ds.X.shape[1]))
    config = TrainingConfig.from_dict(doc)
    fraction = float(data.get("train_fraction", 0.67))
    split_seed = int(data.get("split_seed", config.seed))
    train_ds, val_ds = split(ds, fraction, stream(split_seed, 99))
    aug_class = data.get("augment_class")
    if aug_class is not None:
        if aug_class not in ds.class_names:
            raise ConfigError(f"augment_class {aug_class!r} is not one of {ds.class_names}")
        target = int(data.get("augment_target") or max(train_ds.counts()))
        train_ds = augment_minority(train_ds, ds.class_names.index(aug_class), target, stream(split_seed, 98))
    manifest.split_seed = split_seed
    manifest.train_fraction = fraction
    manifest.split_counts = {"train": train_ds.counts(), "validation": val_ds.counts()}
    return config, manifest, ds, train_ds, val_ds


def write_epochs_csv(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EPOCH_COLUMNS)
        for r in history:
            w.writerow([r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy, r.seconds])


def _report(config, manifest, metrics_by_split, extra=None):
    out = {"config": config.to_dict(), "dataset": manifest.to_dict() if manifest else None}
    out.update({name: m.to_dict() for name, m in metrics_by_split.items()})
    if extra:
        out.update(extra)
    return out


def cmd_train(args):
    doc, data = resolve_config(args)
    config, manifest, _, train_ds, val_ds = _prepare_data(doc, data)
    args.out.mkdir(parents=True, exist_ok=True)
    log.info("training %d samples, validating on %d", len(train_ds), len(val_ds))
    result = train(train_ds.X, train_ds.y, val_ds.X, val_ds.y, config)
    programs = build_programs(config)
    names = manifest.class_names
    metrics = {
        "train": evaluate(train_ds.X, train_ds.y, result.params, config, programs, class_names=names),
        "validation": evaluate(val_ds.X, val_ds.y, result.params, config, programs, class_names=names),
    }
    write_epochs_csv(args.out / "epochs.csv", result.history)
    save_params(args.out / "params.bin", result.params)
    manifest.write(args.out / "manifest.json")
    report = _report(config, manifest, metrics, {"initial_loss": result.initial_loss,
                                                "n_trainable": result.params.n_trainable})
    (args.out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    print(json.dumps({"validation_accuracy": metrics["validation"].accuracy,
                      "train_accuracy": metrics["train"].accuracy}))
    return EXIT_OK


def cmd_evaluate(args):
    doc, data = resolve_config(args)
    params = load_params(args.params)
    doc.setdefault("n_qubits", params.n_qubits)
    doc.setdefault("n_layers", params.n_layers)
    config, manifest, ds, train_ds, val_ds = _prepare_data(doc, data)
    if (config.n_qubits, config.n_layers, config.n_classes) != (params.n_qubits, params.n_layers, params.n_classes):
        raise ConfigError("parameter file does not match the configured model shape")
    target = {"all": ds, "train": train_ds, "validation": val_ds}[args.split]
    metrics = evaluate(target.X, target.y, params, config, class_names=manifest.class_names)
    text = json.dumps(_report(config, manifest, {args.split: metrics}), indent=2) + "\n"
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_inspect(args):
    doc, _ = resolve_config(args)
    config = TrainingConfig.from_dict(doc)
    programs = build_programs(config)
    chosen = {"pqc1": [0], "pqc2": [1], "both": [0, 1]}[args.variant]
    for c in chosen:
        prog = programs[c]
        counts = {k: prog.count(k) for k in ("H", "U3", "RX", "RY", "RZ", "CX", "CY", "CCX") if prog.count(k)}
        print(f"# PQC{c + 1}: {len(prog)} gates, {len(prog.slots())} parameter slots, counts {counts}")
        if not args.summary:
            sys.stdout.write(prog.to_text())
    print(f"# trainable parameters: {config.model_spec().n_trainable}")
    return EXIT_OK


def cmd_noise_sweep(args):
    doc, data = resolve_config(args)
    config, manifest, _, train_ds, val_ds = _prepare_data(doc, data)
    base = config.noise
    pixel = args.pixel_sigmas or [0.0]
    gate = args.gate_sigmas or [0.0]
    phase = args.phase_sigmas or [0.0]
    args.out.mkdir(parents=True, exist_ok=True)
    rows = []
    for ps, gs, hs in itertools.product(pixel, gate, phase):
        modes = [m for m, s in (("pixel", ps), ("gate", gs), ("phase", hs)) if s > 0]
        noise = replace(base, pixel_sigma=ps, gate_sigma=gs, phase_sigma=hs, modes=tuple(modes))
        cfg = replace(config, noise=noise)
        result = train(train_ds.X, train_ds.y, val_ds.X, val_ds.y, cfg)
        last = result.history[-1]
        rows.append({"pixel_sigma": ps, "gate_sigma": gs, "phase_sigma": hs, "train_loss": last.train_loss,
                     "train_acc": last.train_accuracy, "val_loss": last.val_loss, "val_acc": last.val_accuracy})
        log.info("sweep point %s", rows[-1])
    with open(args.out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    manifest.write(args.out / "manifest.json")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "evaluate": cmd_evaluate, "inspect-circuit": cmd_inspect,
            "noise-sweep": cmd_noise_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, EncodingError, CapacityError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
