"""Mini-batch training loop, per-epoch history, and classification
evaluation.

One epoch shuffles the training rows with a seeded Fisher-Yates
permutation, walks them in batches (the short final batch is trained on,
not dropped), and then records loss/MAE for the train and validation sets
in a separate inference pass so dropout never contaminates the reported
curves. Everything is deterministic given (net.seed, cfg.seed).
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledDataset, SplitDataset
from .errors import (
    EmptyHistory,
    EmptyTestSet,
    EmptyTrainingSet,
    WidthMismatch,
)
from .nn import Network, backward, forward, mae, mse, sgd_step
from .rng import STREAM_DROPOUT, STREAM_SHUFFLE, VectorXoshiro, Xoshiro256StarStar

DEFAULT_BATCH_SIZE = 8
DEFAULT_MAX_EPOCHS = 500
DEFAULT_LEARNING_RATE = 0.01


@dataclass(frozen=True)
class EarlyStop:
    """Optional termination rule on top of the epoch cap.

    kind "none": run to max_epochs. kind "loss_threshold": stop once the
    epoch's training loss drops below tau. kind "patience": stop after
    `patience` consecutive epochs without a new best validation loss.
    """

    kind: str = "none"
    tau: float = 0.0
    patience: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "loss_threshold", "patience"):
            raise ValueError(f"unknown early-stop kind {self.kind!r}")
        if self.kind == "loss_threshold" and self.tau <= 0.0:
            raise ValueError("loss_threshold needs tau > 0")
        if self.kind == "patience" and self.patience < 1:
            raise ValueError("patience needs p >= 1")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = DEFAULT_BATCH_SIZE
    max_epochs: int = DEFAULT_MAX_EPOCHS
    learning_rate: float = DEFAULT_LEARNING_RATE
    seed: int = 42
    early_stop: EarlyStop = field(default_factory=EarlyStop)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be > 0")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_mae: float
    val_loss: float | None
    val_mae: float | None


@dataclass(frozen=True)
class TrainingHistory:
    records: tuple[EpochRecord, ...]
    stop_reason: str  # epoch_cap | loss_threshold | patience

    def __len__(self) -> int:
        return len(self.records)


def _metrics(net: Network, data: LabeledDataset) -> tuple[float, float]:
    out, _ = forward(net, data.features.values, mode="infer")
    t = data.one_hot()
    return mse(out, t), mae(out, t)


def train(net: Network, split: SplitDataset,
          cfg: TrainConfig) -> tuple[Network, TrainingHistory]:
    """Run the mini-batch loop and return the final network and history."""
    train_set = split.train
    if train_set.n_rows == 0:
        raise EmptyTrainingSet("no training rows")
    if train_set.features.n_cols != net.in_width:
        raise WidthMismatch(
            f"features width {train_set.features.n_cols} != network input "
            f"{net.in_width}")
    if train_set.n_classes != net.out_width:
        raise WidthMismatch(
            f"{train_set.n_classes} classes != network output {net.out_width}")
    has_val = split.validation.n_rows > 0
    shuffle_rng = Xoshiro256StarStar(cfg.seed, stream=STREAM_SHUFFLE)
    mask_rng = VectorXoshiro(cfg.seed, first_stream=STREAM_DROPOUT)
    x_all = train_set.features.values
    t_all = train_set.one_hot()
    n = train_set.n_rows
    records: list[EpochRecord] = []
    stop_reason = "epoch_cap"
    best_val = np.inf
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            rows = order[start: start + cfg.batch_size]
            xb = x_all[rows]
            tb = t_all[rows]
            _, cache = forward(net, xb, mode="train", rng=mask_rng)
            grads = backward(net, cache, tb)
            net = sgd_step(net, grads, cfg.learning_rate)
        train_loss, train_mae_v = _metrics(net, train_set)
        if has_val:
            val_loss, val_mae_v = _metrics(net, split.validation)
        else:
            val_loss = val_mae_v = None
        records.append(EpochRecord(epoch, train_loss, train_mae_v,
                                   val_loss, val_mae_v))
        rule = cfg.early_stop
        if rule.kind == "loss_threshold" and train_loss < rule.tau:
            stop_reason = "loss_threshold"
            break
        if rule.kind == "patience" and has_val:
            if val_loss < best_val:
                best_val = val_loss
                stale = 0
            else:
                stale += 1
                if stale >= rule.patience:
                    stop_reason = "patience"
                    break
    return net, TrainingHistory(tuple(records), stop_reason)


# --- evaluation ------------------------------------------------------------

@dataclass(frozen=True)
class EvalReport:
    n: int
    accuracy: float
    confusion: np.ndarray          # (classes, classes), rows = true class
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    majority_baseline: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "majority_baseline": self.majority_baseline,
            "confusion": self.confusion.tolist(),
            "precision": list(self.precision),
            "recall": list(self.recall),
        }


def evaluate(net: Network, test: LabeledDataset) -> EvalReport:
    """Accuracy, confusion matrix, per-class precision/recall, and the
    majority-class baseline of the test labels."""
    if test.n_rows == 0:
        raise EmptyTestSet("no test rows")
    out, _ = forward(net, test.features.values, mode="infer")
    preds = np.argmax(out, axis=1)
    m = test.n_classes
    confusion = np.zeros((m, m), dtype=int)
    for true, pred in zip(test.labels, preds):
        confusion[true, pred] += 1
    n = test.n_rows
    accuracy = float(np.trace(confusion)) / n
    precision = []
    recall = []
    for c in range(m):
        col = confusion[:, c].sum()
        row = confusion[c, :].sum()
        precision.append(float(confusion[c, c]) / col if col else 0.0)
        recall.append(float(confusion[c, c]) / row if row else 0.0)
    counts = np.bincount(test.labels, minlength=m)
    return EvalReport(
        n=n,
        accuracy=accuracy,
        confusion=confusion,
        precision=tuple(precision),
        recall=tuple(recall),
        majority_baseline=float(counts.max()) / n,
    )


# --- history export --------------------------------------------------------

HISTORY_HEADER = "epoch,train_loss,train_mae,val_loss,val_mae"


def export_history(history: TrainingHistory, target=None) -> str:
    """History as CSV; values use repr floats so a round-trip parse is
    exact. Missing validation metrics are empty cells."""
    if not history.records:
        raise EmptyHistory("history holds no epochs")
    buf = io.StringIO()
    buf.write(HISTORY_HEADER + "\n")
    for r in history.records:
        cells = [str(r.epoch), repr(r.train_loss), repr(r.train_mae),
                 "" if r.val_loss is None else repr(r.val_loss),
                 "" if r.val_mae is None else repr(r.val_mae)]
        buf.write(",".join(cells) + "\n")
    text = buf.getvalue()
    if target is not None:
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    return text


def parse_history(text: str) -> TrainingHistory:
    """Read back an exported history CSV (stop reason is not stored)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != HISTORY_HEADER:
        raise EmptyHistory("not a history CSV")
    records = []
    for ln in lines[1:]:
        cells = ln.split(",")
        records.append(EpochRecord(
            epoch=int(cells[0]),
            train_loss=float(cells[1]),
            train_mae=float(cells[2]),
            val_loss=float(cells[3]) if cells[3] else None,
            val_mae=float(cells[4]) if cells[4] else None,
        ))
    return TrainingHistory(tuple(records), "epoch_cap")


def export_eval(report: EvalReport, target=None) -> str:
    text = json.dumps(report.to_dict(), indent=2)
    if target is not None:
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", encoding="utf-8") as fh:
                fh.write(text)
                fh.write("\n")
    return text
