"""Mini-batch SGD training with a plateau learning-rate schedule.

After every epoch the holdout accuracy is compared with the best seen so far.
An epoch whose improvement is below ``plateau_delta`` counts towards a
plateau; ``plateau_patience`` such epochs in a row multiply the learning rate
by ``lr_decay_factor`` (not below ``lr_floor``). A plateau reached while the
rate already sits at the floor ends training.
"""

import csv
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigError, DivergenceError
from .ndcore import Rng, derive_seed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    lr_decay_factor: float = 1.0
    lr_floor: float = 0.01
    max_epochs: int = 100
    batch_size: int = 64
    plateau_patience: int = 3
    plateau_delta: float = 0.0005
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.lr_floor > self.learning_rate:
            raise ConfigError("lr_floor must not exceed learning_rate")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.max_epochs < 0 or self.plateau_patience < 1:
            raise ConfigError("max_epochs must be >= 0 and plateau_patience >= 1")
        if not 0 < self.lr_decay_factor <= 1:
            raise ConfigError("lr_decay_factor must lie in (0, 1]")

    @classmethod
    def for_fnn(cls, **overrides):
        """Constant rate 0.01 for up to 100 epochs."""
        return replace(cls(), **overrides)

    @classmethod
    def for_cnn(cls, **overrides):
        """Start at 1e-3, divide by 10 on each plateau down to 1e-7, at most 50 epochs."""
        base = cls(learning_rate=1e-3, lr_decay_factor=0.1, lr_floor=1e-7, max_epochs=50)
        return replace(base, **overrides)

    @classmethod
    def default_for(cls, spec, **overrides):
        return cls.for_cnn(**overrides) if spec.is_cnn else cls.for_fnn(**overrides)


@dataclass
class TrainReport:
    loss: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    holdout_accuracy: list = field(default_factory=list)
    learning_rate: list = field(default_factory=list)
    stopped_early: bool = False

    @property
    def epochs_run(self):
        return len(self.loss)

    @property
    def final_learning_rate(self):
        return self.learning_rate[-1] if self.learning_rate else None

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "loss", "train_acc", "holdout_acc", "lr"])
            for i in range(self.epochs_run):
                w.writerow([i + 1] + [format(v, ".17g") for v in (
                    self.loss[i], self.train_accuracy[i], self.holdout_accuracy[i],
                    self.learning_rate[i])])

    @classmethod
    def read_csv(cls, path):
        report = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                report.loss.append(float(row["loss"]))
                report.train_accuracy.append(float(row["train_acc"]))
                report.holdout_accuracy.append(float(row["holdout_acc"]))
                report.learning_rate.append(float(row["lr"]))
        return report

    def to_dict(self):
        return asdict(self)


def predict(model, images, batch_size=500):
    """Argmax class for every image (ties go to the lowest class index)."""
    out = np.empty(len(images), dtype=np.int64)
    for i in range(0, len(images), batch_size):
        logits, _ = model.forward(images[i:i + batch_size])
        out[i:i + batch_size] = logits.argmax(axis=1)
    return out


def count_correct(model, dataset, batch_size=500):
    return int(np.sum(predict(model, dataset.images, batch_size) == dataset.labels))


def evaluate(model, dataset, batch_size=500):
    """Fraction of ``dataset`` classified correctly."""
    if len(dataset) == 0:
        return 0.0
    return count_correct(model, dataset, batch_size) / len(dataset)


def sgd_step(model, x, y, lr):
    """One plain gradient-descent update; returns ``(loss, n_correct)``."""
    logits, acts = model.forward(x)
    grads, _, loss = model.backward(acts, y)
    for p, g in zip(model.parameters, grads):
        p -= lr * g
    return loss, int(np.sum(logits.argmax(axis=1) == y))


def train(model, train_set, holdout, config, progress=None):
    """Train a copy of ``model``; return ``(trained_model, TrainReport)``.

    ``progress``, if given, is called as ``progress(epoch, report)`` after each
    epoch.
    """
    model = model.copy()
    report = TrainReport()
    lr = config.learning_rate
    best = -np.inf
    stale = 0
    n = len(train_set)
    for epoch in range(config.max_epochs):
        order = Rng(derive_seed(config.seed, epoch)).permutation(n)
        total_loss = 0.0
        correct = 0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            loss, hits = sgd_step(model, train_set.images[idx], train_set.labels[idx], lr)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch + 1}, batch {b + 1}")
            total_loss += loss * len(idx)
            correct += hits
        acc_hold = evaluate(model, holdout) if len(holdout) else correct / n
        report.loss.append(total_loss / n)
        report.train_accuracy.append(correct / n)
        report.holdout_accuracy.append(acc_hold)
        report.learning_rate.append(lr)
        log.info("epoch %d loss %.4f train %.4f holdout %.4f lr %g", epoch + 1,
                 total_loss / n, correct / n, acc_hold, lr)
        if progress is not None:
            progress(epoch + 1, report)

        if acc_hold - best < config.plateau_delta:
            stale += 1
        else:
            stale = 0
        best = max(best, acc_hold)
        if stale >= config.plateau_patience:
            if lr <= config.lr_floor:
                report.stopped_early = epoch + 1 < config.max_epochs
                break
            lr = max(lr * config.lr_decay_factor, config.lr_floor)
            stale = 0
    return model, report
