"""Training loop with early stopping, evaluation, and k-fold cross-validation.

Early stopping monitors a validation split. Two validation modes exist:
``honest`` (default) carves a stratified 10% out of the training folds, so
the test fold is never seen before the final evaluation; ``faithful``
monitors the test fold itself, matching a common but optimistic reading of
5-fold protocols that mention no separate validation split. Patience 0
disables early stopping (all epochs run); the best-epoch parameters are
returned in every mode.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import models
from .data import EmbeddingSet, FoldPlan, PairedDataset
from .errors import ConfigError, DataError, NumericalAbortError
from .metrics import accuracy_from_confusion, confusion_matrix, macro_f1_from_confusion
from .models import ModelParams, ModelSpec
from .optim import Adam
from .seeding import substream

EVAL_CHUNK = 512


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-5
    max_epochs: int = 50
    early_stop_patience: int = 10
    early_stop_metric: str = "loss"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    val_mode: str = "honest"
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.early_stop_patience < 0:
            raise ConfigError(f"early_stop_patience must be >= 0, got {self.early_stop_patience}")
        if self.early_stop_metric not in ("loss", "macro_f1"):
            raise ConfigError(f"early_stop_metric must be 'loss' or 'macro_f1', got {self.early_stop_metric!r}")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ConfigError("Adam betas must lie in (0, 1)")
        if self.val_mode not in ("honest", "faithful"):
            raise ConfigError(f"val_mode must be 'honest' or 'faithful', got {self.val_mode!r}")
        if not 0 < self.val_fraction < 0.5:
            raise ConfigError(f"val_fraction must lie in (0, 0.5), got {self.val_fraction}")

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


@dataclass
class Split:
    """One or two aligned input batches plus integer labels."""

    inputs: tuple[np.ndarray, ...]
    labels: np.ndarray
    ids: tuple[str, ...] | None = None

    def __len__(self) -> int:
        return len(self.labels)

    def take(self, idx) -> "Split":
        idx = np.asarray(idx, dtype=np.int64)
        return Split(
            inputs=tuple(x[idx] for x in self.inputs),
            labels=self.labels[idx],
            ids=tuple(self.ids[i] for i in idx) if self.ids is not None else None,
        )


def dataset_split(data) -> Split:
    """Whole-dataset Split from an EmbeddingSet or a PairedDataset."""
    if isinstance(data, EmbeddingSet):
        return Split((data.vectors,), data.labels, tuple(data.ids))
    if isinstance(data, PairedDataset):
        return Split((data.vectors_a, data.vectors_b), data.labels, tuple(data.ids))
    raise DataError(f"unsupported dataset type {type(data).__name__}")


@dataclass
class FoldReport:
    fold_index: int
    accuracy: float
    macro_f1: float
    confusion: np.ndarray
    epochs_run: int
    train_loss_curve: list[float]
    best_epoch: int
    val_score_curve: list[float] = field(default_factory=list)

    def __post_init__(self):
        cm = np.asarray(self.confusion)
        total = int(cm.sum())
        if total and abs(self.accuracy - np.trace(cm) / total) > 1e-12:
            raise DataError("accuracy inconsistent with confusion matrix")

    def to_dict(self) -> dict:
        return {
            "fold_index": self.fold_index,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "confusion": np.asarray(self.confusion).tolist(),
            "epochs_run": self.epochs_run,
            "best_epoch": self.best_epoch,
            "train_loss_curve": [float(x) for x in self.train_loss_curve],
            "val_score_curve": [float(x) for x in self.val_score_curve],
        }


@dataclass
class EvalResult:
    accuracy: float
    macro_f1: float
    confusion: np.ndarray
    predictions: np.ndarray


def _predict(spec: ModelSpec, params: ModelParams, split: Split) -> np.ndarray:
    preds = []
    for start in range(0, len(split), EVAL_CHUNK):
        chunk = tuple(x[start:start + EVAL_CHUNK] for x in split.inputs)
        logits = models.forward(spec, params, chunk, training=False)
        preds.append(np.argmax(logits.data, axis=1))
    return np.concatenate(preds) if preds else np.empty(0, dtype=np.int64)


def evaluate(spec: ModelSpec, params: ModelParams, split: Split) -> EvalResult:
    """Accuracy, macro-F1, and confusion matrix on a split, evaluation mode."""
    preds = _predict(spec, params, split)
    cm = confusion_matrix(split.labels, preds, spec.num_classes)
    return EvalResult(
        accuracy=accuracy_from_confusion(cm),
        macro_f1=macro_f1_from_confusion(cm),
        confusion=cm,
        predictions=preds,
    )


def _mean_loss(spec: ModelSpec, params: ModelParams, split: Split) -> float:
    total = 0.0
    for start in range(0, len(split), EVAL_CHUNK):
        chunk = tuple(x[start:start + EVAL_CHUNK] for x in split.inputs)
        labels = split.labels[start:start + EVAL_CHUNK]
        logits = models.forward(spec, params, chunk, training=False)
        loss = ad.softmax_cross_entropy(logits, labels)
        total += float(loss.data) * len(labels)
    return total / len(split)


def _val_score(spec: ModelSpec, params: ModelParams, split: Split, metric: str) -> float:
    """Higher is better for both monitored metrics."""
    if metric == "loss":
        return -_mean_loss(spec, params, split)
    return evaluate(spec, params, split).macro_f1


def train_fold(spec: ModelSpec, params: ModelParams, train: Split, val: Split,
               cfg: TrainConfig, fold_index: int = 0) -> tuple[ModelParams, FoldReport]:
    """Train with mini-batch Adam and early stopping; return best-epoch params.

    The returned FoldReport's metrics are computed on the validation split at
    the best epoch.
    """
    if len(train) == 0 or len(val) == 0:
        raise DataError("train and validation splits must be non-empty")
    if train.ids is not None and val.ids is not None:
        overlap = set(train.ids) & set(val.ids)
        if overlap:
            raise DataError(f"train/validation splits overlap on {len(overlap)} ids")

    optimizer = Adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon)
    best_score = -np.inf
    best_epoch = -1
    best_values = params.snapshot()
    bad_epochs = 0
    curve: list[float] = []
    val_curve: list[float] = []
    epochs_run = 0

    for epoch in range(cfg.max_epochs):
        perm = np.arange(len(train))
        substream(cfg.seed, "shuffle", fold_index, epoch).shuffle(perm)
        drop_rng = substream(cfg.seed, "dropout", fold_index, epoch)

        epoch_loss = 0.0
        for bidx, start in enumerate(range(0, len(train), cfg.batch_size)):
            idx = perm[start:start + cfg.batch_size]
            batch = tuple(x[idx] for x in train.inputs)
            logits = models.forward(spec, params, batch, training=True, rng=drop_rng)
            loss = ad.softmax_cross_entropy(logits, train.labels[idx])
            if not np.isfinite(loss.data):
                raise NumericalAbortError(
                    f"non-finite training loss at epoch {epoch}, batch {bidx}")
            params.zero_grad()
            ad.backward(loss)
            optimizer.step(params)
            epoch_loss += float(loss.data) * len(idx)
        curve.append(epoch_loss / len(train))
        epochs_run = epoch + 1

        score = _val_score(spec, params, val, cfg.early_stop_metric)
        val_curve.append(score)
        if score > best_score:
            best_score = score
            best_epoch = epoch
            best_values = params.snapshot()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if cfg.early_stop_patience > 0 and bad_epochs >= cfg.early_stop_patience:
                break

    params.restore(best_values)
    result = evaluate(spec, params, val)
    report = FoldReport(
        fold_index=fold_index,
        accuracy=result.accuracy,
        macro_f1=result.macro_f1,
        confusion=result.confusion,
        epochs_run=epochs_run,
        train_loss_curve=curve,
        best_epoch=best_epoch,
        val_score_curve=val_curve,
    )
    return params, report


def _stratified_carve(labels: np.ndarray, fraction: float,
                      rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Indices (keep, carved) with roughly `fraction` carved per class."""
    keep, carved = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        n_val = int(round(len(idx) * fraction))
        if len(idx) >= 2:
            n_val = min(max(n_val, 1), len(idx) - 1)
        else:
            n_val = 0
        carved.extend(idx[:n_val])
        keep.extend(idx[n_val:])
    if not carved:  # tiny degenerate datasets: fall back to one sample
        carved = [keep.pop()]
    return np.asarray(sorted(keep)), np.asarray(sorted(carved))


def fold_build_seed(seed: int, fold: int) -> int:
    digest = hashlib.sha256(f"{seed}/fold/{fold}".encode()).digest()
    return int.from_bytes(digest[:8], "little") & (2 ** 63 - 1)


def spec_to_dict(spec: ModelSpec) -> dict:
    return {
        "kind": spec.kind,
        "input_dims": list(spec.input_dims),
        "num_classes": spec.num_classes,
        "hidden_units": spec.hidden_units,
        "conv_filters": list(spec.conv_filters),
        "kernel_size": spec.kernel_size,
        "dropout_rate": spec.dropout_rate,
        "fusion_width": spec.fusion_width,
        "fusion_order": spec.fusion_order,
        "curvature": spec.poincare.curvature,
        "ball_epsilon": spec.poincare.ball_epsilon,
    }


@dataclass
class CrossValReport:
    folds: list[FoldReport]
    mean_accuracy: float
    mean_macro_f1: float
    spec: ModelSpec
    config: TrainConfig
    num_folds: int
    fold_seed: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "folds": [f.to_dict() for f in self.folds],
            "mean_accuracy": self.mean_accuracy,
            "mean_macro_f1": self.mean_macro_f1,
            "model_spec": spec_to_dict(self.spec),
            "train_config": self.config.to_dict(),
            "num_folds": self.num_folds,
            "fold_seed": self.fold_seed,
        }
        out.update(self.extra)
        return out


def cross_validate(data, spec: ModelSpec, cfg: TrainConfig, plan: FoldPlan,
                   jobs: int = 1) -> CrossValReport:
    """Rotate each fold as the test set; train on the rest; aggregate the means.

    Folds are independent (own params, own RNG substreams) and run on a
    thread pool when jobs > 1; results are identical either way.
    """
    whole = dataset_split(data)
    ids = list(whole.ids)
    assigned = set(plan.assignments)
    if assigned != set(ids):
        raise DataError("fold plan does not cover exactly the dataset's sample ids")

    def run_fold(fold: int) -> FoldReport:
        train_idx, test_idx = plan.indices(ids, fold)
        if len(train_idx) == 0 or len(test_idx) == 0:
            raise DataError(f"fold {fold} leaves an empty train or test split")
        train_all = whole.take(train_idx)
        test = whole.take(test_idx)
        if cfg.val_mode == "honest":
            keep, carved = _stratified_carve(
                train_all.labels, cfg.val_fraction, substream(cfg.seed, "val-carve", fold))
            train, val = train_all.take(keep), train_all.take(carved)
        else:
            train, val = train_all, test
        params = models.build(spec, fold_build_seed(cfg.seed, fold))
        params, trained = train_fold(spec, params, train, val, cfg, fold_index=fold)
        result = evaluate(spec, params, test)
        return FoldReport(
            fold_index=fold,
            accuracy=result.accuracy,
            macro_f1=result.macro_f1,
            confusion=result.confusion,
            epochs_run=trained.epochs_run,
            train_loss_curve=trained.train_loss_curve,
            best_epoch=trained.best_epoch,
            val_score_curve=trained.val_score_curve,
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(run_fold, range(plan.num_folds)))
    else:
        reports = [run_fold(fold) for fold in range(plan.num_folds)]

    return CrossValReport(
        folds=reports,
        mean_accuracy=float(np.mean([r.accuracy for r in reports])),
        mean_macro_f1=float(np.mean([r.macro_f1 for r in reports])),
        spec=spec,
        config=cfg,
        num_folds=plan.num_folds,
        fold_seed=plan.seed,
    )


def report_json(report) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    payload = report.to_dict() if hasattr(report, "to_dict") else report
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
