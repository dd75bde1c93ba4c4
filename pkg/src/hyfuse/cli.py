"""Command-line interface.

Commands: train, cross-validate, pair-matrix, synth, export-features,
inspect. Configuration precedence is command-line flags over a JSON config
file (--config) over built-in defaults; the fully resolved configuration is
echoed into every run's manifest. Exit codes: 0 success, 1 configuration
error, 2 data error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import models
from .data import (
    EmbeddingSet,
    make_folds,
    pair_datasets,
    read_embedding_file,
    read_sidecar,
    write_embedding_file,
)
from .errors import ConfigError, DataError, HyfuseError, NumericalError
from .models import ModelSpec, build, load_checkpoint, parameter_count, save_checkpoint
from .synth import SynthSpec, synth_generate
from .training import (
    TrainConfig,
    cross_validate,
    dataset_split,
    report_json,
    spec_to_dict,
    train_fold,
    _stratified_carve,
)
from .geometry import PoincareConfig
from .seeding import substream

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "folds": 5,
    "unstratified": False,
    "batch_size": 32,
    "learning_rate": 1e-5,
    "epochs": 50,
    "patience": 10,
    "monitor": "loss",
    "val_mode": "honest",
    "val_fraction": 0.1,
    "hidden_units": 128,
    "kernel_size": 3,
    "conv_filters": "64,128",
    "dropout": 0.2,
    "fusion_width": 64,
    "fusion_order": "ab",
    "curvature": 1.0,
    "ball_epsilon": 1e-5,
    "classes": 4,
    "dim_a": 32,
    "dim_b": 32,
    "samples_per_class": 200,
    "spread": 0.25,
    "synth_mode": "split",
    "name_a": "synth-a",
    "name_b": "synth-b",
    "family_a": "RLR",
    "family_b": "CBR",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


class Resolver:
    """flags > config file > defaults, recording everything it resolves."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self._args = args
        self._config = config
        self.resolved: dict = {}

    def get(self, key: str):
        value = getattr(self._args, key, None)
        if value is None:
            value = self._config.get(key, DEFAULTS[key])
        self.resolved[key] = value
        return value


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    unknown = set(cfg) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"config file {path} has unknown keys: {sorted(unknown)}")
    return cfg


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_set(path, what: str) -> EmbeddingSet:
    try:
        return read_embedding_file(path)
    except OSError as exc:
        raise DataError(f"cannot read {what} {path}: {exc}") from exc


def _out_dir(args) -> Path:
    if args.out is None:
        raise ConfigError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, resolver: Resolver,
                    inputs: list, artifacts: list[str], started: float) -> None:
    manifest = {
        "command": command,
        "resolved_config": resolver.resolved,
        "input_digests": {str(p): _sha256(p) for p in inputs},
        "artifacts": sorted(artifacts),
        "timing_seconds": time.time() - started,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _train_config(r: Resolver) -> TrainConfig:
    return TrainConfig(
        batch_size=int(r.get("batch_size")),
        learning_rate=float(r.get("learning_rate")),
        max_epochs=int(r.get("epochs")),
        early_stop_patience=int(r.get("patience")),
        early_stop_metric=r.get("monitor"),
        seed=int(r.get("seed")),
        val_mode=r.get("val_mode"),
        val_fraction=float(r.get("val_fraction")),
    )


def _conv_filters(raw) -> tuple[int, int]:
    if isinstance(raw, (list, tuple)):
        parts = list(raw)
    else:
        parts = str(raw).split(",")
    if len(parts) != 2:
        raise ConfigError(f"--conv-filters takes two comma-separated counts, got {raw!r}")
    return int(parts[0]), int(parts[1])


def _model_spec(kind: str, dims: tuple[int, ...], num_classes: int, r: Resolver) -> ModelSpec:
    return ModelSpec(
        kind=kind,
        input_dims=dims,
        num_classes=num_classes,
        hidden_units=int(r.get("hidden_units")),
        conv_filters=_conv_filters(r.get("conv_filters")),
        kernel_size=int(r.get("kernel_size")),
        dropout_rate=float(r.get("dropout")),
        fusion_width=int(r.get("fusion_width")),
        fusion_order=r.get("fusion_order"),
        poincare=PoincareConfig(float(r.get("curvature")), float(r.get("ball_epsilon"))),
    )


def _load_model_data(args, r: Resolver, kind: str):
    """(data, dims, class_names, input_paths) for a model kind's flags."""
    if args.rep_a is None:
        raise ConfigError("--rep-a is required")
    set_a = _load_set(args.rep_a, "embedding file")
    inputs = [args.rep_a]
    if kind in models.FUSION_KINDS:
        if args.rep_b is None:
            raise ConfigError(f"model {kind!r} fuses two representations: --rep-b is required")
        set_b = _load_set(args.rep_b, "embedding file")
        inputs.append(args.rep_b)
        if set_a.class_names != set_b.class_names:
            raise DataError("the two embedding files disagree on class names")
        data = pair_datasets(set_a, set_b)
        dims = (set_a.dim, set_b.dim)
    else:
        if args.rep_b is not None:
            raise ConfigError(f"model {kind!r} takes a single representation: drop --rep-b")
        data = set_a
        dims = (set_a.dim,)
    return data, dims, set_a.class_names, inputs, set_a


# --- commands ---

def cmd_train(args) -> int:
    started = time.time()
    r = Resolver(args, _load_config(args.config))
    kind = args.model
    data, dims, class_names, inputs, set_a = _load_model_data(args, r, kind)
    spec = _model_spec(kind, dims, len(class_names), r)
    cfg = _train_config(r)
    out = _out_dir(args)

    whole = dataset_split(data)
    keep, carved = _stratified_carve(
        whole.labels, cfg.val_fraction, substream(cfg.seed, "val-carve", 0))
    train, val = whole.take(keep), whole.take(carved)
    params = build(spec, cfg.seed)
    params, report = train_fold(spec, params, train, val, cfg, fold_index=0)

    save_checkpoint(out / "model.ckpt", spec, params)
    payload = report.to_dict()
    payload["parameter_count"] = parameter_count(spec)
    payload["class_names"] = list(class_names)
    payload["model_spec"] = spec_to_dict(spec)
    payload["train_config"] = cfg.to_dict()
    (out / "report.json").write_text(report_json(payload), encoding="utf-8")
    _write_manifest(out, "train", r, inputs, ["model.ckpt", "report.json", "manifest.json"], started)
    print(f"trained {kind} for {report.epochs_run} epochs; "
          f"val accuracy {report.accuracy:.4f}, macro-F1 {report.macro_f1:.4f}")
    return 0


def cmd_cross_validate(args) -> int:
    started = time.time()
    r = Resolver(args, _load_config(args.config))
    kind = args.model
    data, dims, class_names, inputs, set_a = _load_model_data(args, r, kind)
    spec = _model_spec(kind, dims, len(class_names), r)
    cfg = _train_config(r)
    folds = int(r.get("folds"))
    stratified = not bool(r.get("unstratified"))
    out = _out_dir(args)

    plan = make_folds(set_a, folds, cfg.seed, stratified=stratified)
    report = cross_validate(data, spec, cfg, plan, jobs=int(r.get("jobs")))
    (out / "report.json").write_text(report_json(report), encoding="utf-8")
    _write_manifest(out, "cross-validate", r, inputs, ["report.json", "manifest.json"], started)
    print(f"{folds}-fold {kind}: mean accuracy {report.mean_accuracy:.4f}, "
          f"mean macro-F1 {report.mean_macro_f1:.4f}")
    return 0


def _scan_tagged_files(data_dir: Path) -> dict[str, list[tuple[str, Path]]]:
    """Embedding files grouped by family tag, as (representation name, path)."""
    groups: dict[str, list[tuple[str, Path]]] = {"RLR": [], "CBR": []}
    for path in sorted(data_dir.glob("*.hyfe")):
        sidecar = read_sidecar(path)
        family = sidecar.get("family")
        if family not in groups:
            continue
        name = sidecar.get("representation", sidecar.get("name", path.stem))
        groups[family].append((name, path))
    return groups


def cmd_pair_matrix(args) -> int:
    started = time.time()
    r = Resolver(args, _load_config(args.config))
    cfg = _train_config(r)
    folds = int(r.get("folds"))
    jobs = int(r.get("jobs"))
    stratified = not bool(r.get("unstratified"))
    mode = args.mode
    data_dir = Path(args.data_dir)
    if not data_dir.is_dir():
        raise DataError(f"--data-dir {data_dir} is not a directory")
    out = _out_dir(args)

    groups = _scan_tagged_files(data_dir)
    combos = {
        "rlr+rlr": [("RLR", "RLR")],
        "cbr+cbr": [("CBR", "CBR")],
        "rlr+cbr": [("RLR", "CBR")],
        "all": [("RLR", "RLR"), ("CBR", "CBR"), ("RLR", "CBR")],
    }[mode]

    pairs: list[tuple[tuple[str, Path], tuple[str, Path]]] = []
    for fam_a, fam_b in combos:
        if fam_a == fam_b:
            members = groups[fam_a]
            pairs.extend((members[i], members[j])
                         for i in range(len(members)) for j in range(i + 1, len(members)))
        else:
            pairs.extend((a, b) for a in groups[fam_a] for b in groups[fam_b])
    if not pairs:
        raise DataError(f"no {mode} pairs found in {data_dir} "
                        f"({len(groups['RLR'])} RLR, {len(groups['CBR'])} CBR files)")

    sets: dict[Path, EmbeddingSet] = {}
    for _, path in {p for pair in pairs for p in pair}:
        sets[path] = _load_set(path, "embedding file")

    def run_cell(pair, method) -> dict:
        (name_a, path_a), (name_b, path_b) = pair
        set_a, set_b = sets[path_a], sets[path_b]
        data = pair_datasets(set_a, set_b)
        spec = _model_spec(method, (set_a.dim, set_b.dim), set_a.num_classes, r)
        plan = make_folds(set_a, folds, cfg.seed, stratified=stratified)
        report = cross_validate(data, spec, cfg, plan)
        return {
            "pair": [name_a, name_b],
            "method": method,
            "mean_accuracy": report.mean_accuracy,
            "mean_macro_f1": report.mean_macro_f1,
            "fold_accuracies": [f.accuracy for f in report.folds],
            "fold_macro_f1": [f.macro_f1 for f in report.folds],
        }

    tasks = [(pair, method) for pair in pairs for method in ("concat", "hyfuse")]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(lambda t: run_cell(*t), tasks))
    else:
        cells = [run_cell(*t) for t in tasks]

    best = max(cells, key=lambda c: (c["mean_accuracy"], c["mean_macro_f1"],
                                     "+".join(c["pair"]), c["method"]))
    matrix = {
        "mode": mode,
        "num_folds": folds,
        "cells": cells,
        "best": best,
        "train_config": cfg.to_dict(),
    }
    (out / "matrix.json").write_text(report_json(matrix), encoding="utf-8")
    summary = (f"best pair: {best['pair'][0]} + {best['pair'][1]} ({best['method']}) "
               f"with mean accuracy {best['mean_accuracy']:.4f} "
               f"and mean macro-F1 {best['mean_macro_f1']:.4f}\n")
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    _write_manifest(out, "pair-matrix", r, [p for _, p in {q for pair in pairs for q in pair}],
                    ["matrix.json", "summary.txt", "manifest.json"], started)
    sys.stdout.write(summary)
    return 0


def cmd_synth(args) -> int:
    started = time.time()
    r = Resolver(args, _load_config(args.config))
    spec = SynthSpec(
        classes=int(r.get("classes")),
        dim_a=int(r.get("dim_a")),
        dim_b=int(r.get("dim_b")),
        samples_per_class=int(r.get("samples_per_class")),
        cluster_spread=float(r.get("spread")),
        complementarity_mode=r.get("synth_mode"),
        seed=int(r.get("seed")),
    )
    name_a, name_b = r.get("name_a"), r.get("name_b")
    family_a, family_b = r.get("family_a"), r.get("family_b")
    out = _out_dir(args)

    set_a, set_b = synth_generate(spec)
    set_a.name, set_b.name = name_a, name_b
    path_a, path_b = out / f"{name_a}.hyfe", out / f"{name_b}.hyfe"
    write_embedding_file(set_a, path_a, representation=name_a, family=family_a)
    write_embedding_file(set_b, path_b, representation=name_b, family=family_b)
    _write_manifest(out, "synth", r, [],
                    [path_a.name, f"{path_a.name}.json", path_b.name, f"{path_b.name}.json",
                     "manifest.json"], started)
    print(f"wrote {path_a} ({set_a.dim}d) and {path_b} ({set_b.dim}d), "
          f"{len(set_a)} samples, {spec.classes} classes, mode {spec.complementarity_mode}")
    return 0


def cmd_export_features(args) -> int:
    started = time.time()
    r = Resolver(args, _load_config(args.config))
    if args.checkpoint is None:
        raise ConfigError("--checkpoint is required")
    try:
        spec, params = load_checkpoint(args.checkpoint)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {args.checkpoint}: {exc}") from exc
    data, dims, class_names, inputs, set_a = _load_model_data(args, r, spec.kind)
    if dims != spec.input_dims:
        raise DataError(f"embedding dims {dims} do not match checkpoint dims {spec.input_dims}")
    out = _out_dir(args)

    whole = dataset_split(data)
    feats = []
    for start in range(0, len(whole), 512):
        chunk = tuple(x[start:start + 512] for x in whole.inputs)
        feats.append(models.penultimate_features(spec, params, *chunk))
    features = np.concatenate(feats) if feats else np.empty((0, spec.hidden_units), np.float32)

    exported = EmbeddingSet(
        name=f"{set_a.name}-features",
        dim=spec.hidden_units,
        class_names=list(class_names),
        ids=list(whole.ids),
        labels=whole.labels.copy(),
        vectors=features.astype(np.float32),
    )
    path = out / "features.hyfe"
    write_embedding_file(exported, path)
    _write_manifest(out, "export-features", r, inputs + [args.checkpoint],
                    [path.name, f"{path.name}.json", "manifest.json"], started)
    print(f"exported {len(exported)} feature vectors of dim {exported.dim} to {path}")
    return 0


def cmd_inspect(args) -> int:
    eset = _load_set(args.file, "embedding file")
    sidecar = read_sidecar(args.file)
    print(f"file: {args.file}")
    print(f"name: {eset.name}")
    print(f"dim: {eset.dim}")
    print(f"classes ({eset.num_classes}): {', '.join(eset.class_names)}")
    print(f"samples: {len(eset)}")
    for key in ("representation", "family"):
        if key in sidecar:
            print(f"{key}: {sidecar[key]}")
    return 0


# --- parser wiring ---

def _add_common(p: _Parser, out_required: bool = True) -> None:
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    if out_required:
        p.add_argument("--out")


def _add_train_opts(p: _Parser) -> None:
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", "--lr", dest="learning_rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--monitor", choices=("loss", "macro_f1"))
    p.add_argument("--val-mode", dest="val_mode", choices=("honest", "faithful"))
    p.add_argument("--val-fraction", dest="val_fraction", type=float)
    p.add_argument("--hidden-units", dest="hidden_units", type=int)
    p.add_argument("--kernel-size", dest="kernel_size", type=int)
    p.add_argument("--conv-filters", dest="conv_filters")
    p.add_argument("--dropout", type=float)
    p.add_argument("--fusion-width", dest="fusion_width", type=int)
    p.add_argument("--fusion-order", dest="fusion_order", choices=("ab", "ba"))
    p.add_argument("--curvature", type=float)
    p.add_argument("--ball-epsilon", dest="ball_epsilon", type=float)


def build_parser() -> _Parser:
    parser = _Parser(prog="hyfuse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one model on one or two embedding files")
    p.add_argument("--model", required=True, choices=models.KINDS)
    p.add_argument("--rep-a", dest="rep_a")
    p.add_argument("--rep-b", dest="rep_b")
    _add_common(p)
    _add_train_opts(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cross-validate", help="k-fold cross-validation")
    p.add_argument("--model", required=True, choices=models.KINDS)
    p.add_argument("--rep-a", dest="rep_a")
    p.add_argument("--rep-b", dest="rep_b")
    p.add_argument("--folds", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--unstratified", action="store_const", const=True)
    _add_common(p)
    _add_train_opts(p)
    p.set_defaults(func=cmd_cross_validate)

    p = sub.add_parser("pair-matrix",
                       help="cross-validate every representation pair under both fusion methods")
    p.add_argument("--data-dir", dest="data_dir", required=True)
    p.add_argument("--mode", required=True, choices=("rlr+rlr", "cbr+cbr", "rlr+cbr", "all"))
    p.add_argument("--folds", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--unstratified", action="store_const", const=True)
    _add_common(p)
    _add_train_opts(p)
    p.set_defaults(func=cmd_pair_matrix)

    p = sub.add_parser("synth", help="generate a paired synthetic dataset")
    p.add_argument("--classes", type=int)
    p.add_argument("--dim-a", dest="dim_a", type=int)
    p.add_argument("--dim-b", dest="dim_b", type=int)
    p.add_argument("--samples-per-class", dest="samples_per_class", type=int)
    p.add_argument("--spread", type=float)
    p.add_argument("--mode", dest="synth_mode", choices=("split", "redundant"))
    p.add_argument("--name-a", dest="name_a")
    p.add_argument("--name-b", dest="name_b")
    p.add_argument("--family-a", dest="family_a", choices=("RLR", "CBR"))
    p.add_argument("--family-b", dest="family_b", choices=("RLR", "CBR"))
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("export-features",
                       help="export penultimate-layer features as an embedding file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--rep-a", dest="rep_a")
    p.add_argument("--rep-b", dest="rep_b")
    _add_common(p)
    p.set_defaults(func=cmd_export_features)

    p = sub.add_parser("inspect", help="print an embedding file's header")
    p.add_argument("file")
    _add_common(p, out_required=False)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except HyfuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
