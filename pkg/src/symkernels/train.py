"""Training loop, evaluation and the metrics CSV."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from symkernels.data import BatchPlan, Dataset, minibatches, shuffled_subset
from symkernels.nn import Network, load_checkpoint, save_checkpoint
from symkernels.optim import AdamState, adam_step

log = logging.getLogger(__name__)

CSV_HEADER = "epoch,train_loss,train_acc,test_loss,test_acc"
GRAD_CHUNK = 256
EVAL_CHUNK = 500


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch, last_good_epoch, detail=""):
        self.epoch = epoch
        self.last_good_epoch = last_good_epoch
        super().__init__(
            f"non-finite loss during epoch {epoch}; last good epoch {last_good_epoch}"
            + (f" ({detail})" if detail else "")
        )


@dataclass
class RunConfig:
    level: int
    epochs: int
    batch_size: int = 1280
    base_lr: float = 0.02
    decay: float = 0.97
    decay_every: int = 5
    seed: int = 0
    data_dir: str | None = None
    subset: int | None = None
    metrics_out: str | None = None
    checkpoint_out: str | None = None
    checkpoint_in: str | None = None
    eval_every: int = 5

    def validate(self):
        problems = []
        if self.level not in (0, 1, 2, 3, 4):
            problems.append(f"level must be 0..4, got {self.level}")
        if self.epochs < 1:
            problems.append(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            problems.append(f"batch size must be >= 1, got {self.batch_size}")
        if self.subset is not None and not 1 <= self.subset <= 50000:
            problems.append(f"subset must be in 1..50000, got {self.subset}")
        if self.eval_every < 1 or self.decay_every < 1:
            problems.append("eval-every and decay-every must be >= 1")
        if not (self.base_lr > 0 and math.isfinite(self.base_lr)):
            problems.append(f"learning rate must be positive, got {self.base_lr}")
        if not 0 <= self.seed < 2**64:
            problems.append(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if problems:
            raise ValueError("; ".join(problems))
        return self


@dataclass
class MetricsRow:
    epoch: int
    train_loss: float
    train_acc: float
    test_loss: float
    test_acc: float

    def csv_line(self) -> str:
        return (
            f"{self.epoch},{self.train_loss:.6f},{self.train_acc:.6f},"
            f"{self.test_loss:.6f},{self.test_acc:.6f}"
        )


def batch_gradient(net: Network, images, labels, chunk=GRAD_CHUNK):
    """Mean loss and gradient over a minibatch, reduced chunk by chunk in order."""
    n = len(labels)
    total_loss = 0.0
    grad = np.zeros_like(net.flat)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        loss, g = net.loss_and_grad(images[start:stop], labels[start:stop])
        w = (stop - start) / n
        total_loss += w * loss
        grad += w * g
    return total_loss, grad


def evaluate(net: Network, dataset: Dataset, chunk=EVAL_CHUNK):
    """Mean cross-entropy and argmax accuracy over the whole dataset."""
    loss_sum = 0.0
    correct = 0
    for start in range(0, len(dataset), chunk):
        idx = np.arange(start, min(start + chunk, len(dataset)))
        logits = net.logits(dataset.images(idx))
        z = logits - logits.max(axis=1, keepdims=True)
        log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        labels = dataset.labels[idx]
        loss_sum += float(-log_p[np.arange(len(idx)), labels].sum())
        correct += int((logits.argmax(axis=1) == labels).sum())
    return loss_sum / len(dataset), correct / len(dataset)


def build_network(config: RunConfig) -> Network:
    if config.checkpoint_in:
        net = load_checkpoint(config.checkpoint_in)
        if net.level != config.level:
            raise ValueError(
                f"checkpoint {config.checkpoint_in} is level {net.level}, config asks for {config.level}"
            )
        return net
    return Network(config.level, seed=config.seed)


def train(config: RunConfig, train_set: Dataset, test_set: Dataset, on_row=None):
    """Run the configured schedule; returns ``(network, metrics_rows)``."""
    config.validate()
    if config.subset is not None:
        train_set = shuffled_subset(train_set, config.subset, config.seed)
    net = build_network(config)
    state = AdamState.for_size(
        net.flat.size, base_lr=config.base_lr, decay=config.decay, decay_every=config.decay_every
    )
    plan = BatchPlan(config.seed, min(config.batch_size, len(train_set)))
    rows = []
    last_good = 0
    for epoch in range(config.epochs):
        lr = state.lr_at_epoch(epoch)
        for idx in minibatches(train_set, plan, epoch):
            loss, grad = batch_gradient(net, train_set.images(idx), train_set.labels[idx])
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch + 1, last_good, f"minibatch loss {loss}")
            adam_step(net.flat, grad, state, lr)
        done = epoch + 1
        if not np.all(np.isfinite(net.flat)):
            raise TrainingDiverged(done, last_good, "non-finite parameters")
        last_good = done
        if done % config.eval_every == 0 or done == config.epochs:
            tr_loss, tr_acc = evaluate(net, train_set)
            te_loss, te_acc = evaluate(net, test_set)
            if not (math.isfinite(tr_loss) and math.isfinite(te_loss)):
                raise TrainingDiverged(done, last_good - 1, "non-finite evaluation loss")
            row = MetricsRow(done, tr_loss, tr_acc, te_loss, te_acc)
            rows.append(row)
            log.info("epoch %d lr %.6g  %s", done, lr, row.csv_line())
            if on_row is not None:
                on_row(row)
    return net, rows


def write_metrics(rows, path):
    text = "\n".join([CSV_HEADER] + [r.csv_line() for r in rows]) + "\n"
    Path(path).write_text(text)


def read_metrics(path) -> list[MetricsRow]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: missing header {CSV_HEADER!r}")
    rows = []
    for line in lines[1:]:
        e, a, b, c, d = line.split(",")
        rows.append(MetricsRow(int(e), float(a), float(b), float(c), float(d)))
    return rows


def run(config: RunConfig, train_set: Dataset, test_set: Dataset):
    """Train, then write the metrics CSV and checkpoint if configured."""
    net, rows = train(config, train_set, test_set)
    if config.metrics_out:
        write_metrics(rows, config.metrics_out)
    if config.checkpoint_out:
        save_checkpoint(net, config.checkpoint_out)
    return net, rows
