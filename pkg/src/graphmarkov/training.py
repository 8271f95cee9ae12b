"""Mini-batch training with masked loss, Adam, learning-rate decay, and
early stopping.

The loss only counts label entries whose observation mask is 1: injected
gaps corrupt the inputs, so every injected entry still has a usable label,
while readings the source data never had stay out of the loss entirely.

The schedule watches validation loss after every epoch. An epoch "improves"
when its validation loss drops more than min_delta below the best seen so
far. After lr_patience consecutive non-improving epochs the learning rate is
divided by 10 (never below lr_floor) and that counter restarts; after
stop_patience consecutive non-improving epochs training stops. The returned
parameters are the ones from the epoch with the lowest validation loss, not
the last epoch.
"""

import time
from dataclasses import dataclass

import numpy as np

from .models import Batch, backward, batch_from_samples, forward

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_EVAL_CHUNK = 1024


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for the training loop. Defaults match the reference setup:
    batches of 64, learning rate decaying from 1e-3 by factors of 10 down to
    1e-5, patience of 4 epochs per decay and 5 epochs to stop."""

    batch_size: int = 64
    lr_init: float = 1e-3
    lr_floor: float = 1e-5
    lr_patience: int = 4
    stop_patience: int = 5
    min_delta: float = 1e-5
    max_epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr_floor > self.lr_init:
            raise ValueError(f"lr_floor {self.lr_floor} exceeds lr_init {self.lr_init}")
        if self.lr_init < 0 or self.lr_floor < 0:
            raise ValueError("learning rates must be nonnegative")
        if self.lr_patience < 1 or self.stop_patience < 1:
            raise ValueError("patience values must be >= 1")
        if self.min_delta < 0:
            raise ValueError("min_delta must be nonnegative")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass(frozen=True)
class AdamState:
    """First/second moment accumulators shaped like the parameter tensors,
    plus the update counter used for bias correction."""

    first: tuple
    second: tuple
    step: int

    @classmethod
    def fresh(cls, params) -> "AdamState":
        zeros = tuple(np.zeros_like(np.asarray(t)) for t in params.tensors)
        return cls(first=zeros, second=tuple(z.copy() for z in zeros), step=0)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float
    seconds: float


@dataclass(frozen=True)
class TrainHistory:
    """Per-epoch loop telemetry, contiguous from epoch 1."""

    records: tuple

    def __post_init__(self):
        for k, rec in enumerate(self.records, start=1):
            if rec.epoch != k:
                raise ValueError(f"history records must be contiguous from 1, got {rec.epoch} at {k}")
        lrs = [rec.lr for rec in self.records]
        if any(b > a for a, b in zip(lrs, lrs[1:])):
            raise ValueError("learning rate must be non-increasing across epochs")

    @property
    def epochs(self) -> int:
        return len(self.records)

    @property
    def best_epoch(self) -> int:
        return min(self.records, key=lambda r: r.val_loss).epoch

    def val_losses(self) -> np.ndarray:
        return np.array([r.val_loss for r in self.records])


def write_history_csv(path, history: TrainHistory) -> None:
    """Write the history as CSV. Wall-clock seconds are deliberately left
    out so that reruns of the same configuration produce byte-identical
    files; timings still appear in the live log lines."""
    with open(path, "w", newline="") as fh:
        fh.write("epoch,train_loss,val_loss,lr\n")
        for rec in history.records:
            fh.write(
                f"{rec.epoch},{rec.train_loss:.17g},{rec.val_loss:.17g},{rec.lr:.17g}\n"
            )


def masked_mse(pred: np.ndarray, labels: np.ndarray, label_mask: np.ndarray) -> float:
    """Mean squared error over entries with label_mask = 1.

    Raises:
        ValueError: no observed label entries.
    """
    observed = label_mask.sum()
    if observed == 0:
        raise ValueError("masked_mse needs at least one observed label entry")
    diff = (pred - labels) * label_mask
    return float((diff * diff).sum() / observed)


def masked_mse_grad(pred: np.ndarray, labels: np.ndarray, label_mask: np.ndarray) -> np.ndarray:
    """Gradient of masked_mse at pred: 2 (pred - labels) / observed count,
    zero at masked entries."""
    observed = label_mask.sum()
    if observed == 0:
        raise ValueError("masked_mse needs at least one observed label entry")
    return 2.0 * (pred - labels) * label_mask / observed


def adam_step(params, grads, state: AdamState, lr: float):
    """One bias-corrected Adam update. Returns (new params, new state).

    Dense-model weights are re-masked to their hop supports by the params
    constructor, so off-support entries stay exactly zero no matter what the
    optimizer accumulates.

    Raises:
        ValueError: non-finite gradient entries.
    """
    if len(grads) != len(params.tensors):
        raise ValueError(f"{len(grads)} gradients for {len(params.tensors)} tensors")
    for k, g in enumerate(grads, start=1):
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient in tensor {k}; aborting the update")

    step = state.step + 1
    scale1 = 1.0 - ADAM_BETA1**step
    scale2 = 1.0 - ADAM_BETA2**step
    new_first, new_second, new_tensors = [], [], []
    for t, g, m, v in zip(params.tensors, grads, state.first, state.second):
        g = np.asarray(g, dtype=np.float64)
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * (g * g)
        update = lr * (m / scale1) / (np.sqrt(v / scale2) + ADAM_EPS)
        new_first.append(m)
        new_second.append(v)
        new_tensors.append(np.asarray(t) - update)
    return (
        params.with_tensors(new_tensors),
        AdamState(first=tuple(new_first), second=tuple(new_second), step=step),
    )


def _dataset_loss(params, samples) -> float:
    """Masked MSE over a whole sample list, evaluated in bounded chunks."""
    total_sq = 0.0
    total_obs = 0.0
    for lo in range(0, len(samples), _EVAL_CHUNK):
        batch = batch_from_samples(samples[lo : lo + _EVAL_CHUNK])
        diff = (forward(params, batch) - batch.labels) * batch.label_mask
        total_sq += float((diff * diff).sum())
        total_obs += float(batch.label_mask.sum())
    if total_obs == 0:
        raise ValueError("dataset has no observed label entries")
    return total_sq / total_obs


def train(params, train_samples, val_samples, config: TrainConfig, log=None):
    """Run the full training loop; returns (best params, TrainHistory).

    Each epoch shuffles the training windows with a seeded generator, walks
    them in batches of config.batch_size (final short batch included),
    updates via Adam, then scores the validation set. Batches without a
    single observed label are skipped. `log`, if given, receives one line
    per epoch.

    Raises:
        ValueError: empty datasets.
        FloatingPointError: non-finite training or validation loss.
    """
    if not train_samples:
        raise ValueError("empty training set")
    if not val_samples:
        raise ValueError("empty validation set")

    rng = np.random.default_rng(config.seed)
    state = AdamState.fresh(params)
    lr = config.lr_init

    best_val = np.inf
    best_params = params
    plateau_lr = 0
    plateau_stop = 0
    records = []

    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(len(train_samples))
        epoch_sq = 0.0
        epoch_obs = 0.0
        for lo in range(0, len(order), config.batch_size):
            chosen = [train_samples[j] for j in order[lo : lo + config.batch_size]]
            batch = batch_from_samples(chosen)
            if batch.label_mask.sum() == 0:
                continue
            pred = forward(params, batch)
            diff = (pred - batch.labels) * batch.label_mask
            epoch_sq += float((diff * diff).sum())
            epoch_obs += float(batch.label_mask.sum())
            grads = backward(params, batch, masked_mse_grad(pred, batch.labels, batch.label_mask))
            params, state = adam_step(params, grads, state, lr)

        train_loss = epoch_sq / epoch_obs if epoch_obs else np.nan
        val_loss = _dataset_loss(params, val_samples)
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise FloatingPointError(
                f"non-finite loss at epoch {epoch} (train {train_loss}, val {val_loss})"
            )
        seconds = time.perf_counter() - started
        records.append(
            EpochRecord(epoch=epoch, train_loss=train_loss, val_loss=val_loss, lr=lr, seconds=seconds)
        )
        if log is not None:
            log(
                f"epoch {epoch:3d}  train {train_loss:.6e}  val {val_loss:.6e}"
                f"  lr {lr:.1e}  {seconds:.2f}s"
            )

        if val_loss < best_val:
            best_val = val_loss
            best_params = params

        if val_loss < best_seen_for_patience(records) - config.min_delta:
            plateau_lr = 0
            plateau_stop = 0
        else:
            plateau_lr += 1
            plateau_stop += 1

        if plateau_stop >= config.stop_patience:
            break
        if plateau_lr >= config.lr_patience:
            lr = max(lr / 10.0, config.lr_floor)
            plateau_lr = 0

    return best_params, TrainHistory(records=tuple(records))


def best_seen_for_patience(records) -> float:
    """Best validation loss over all epochs before the most recent one."""
    if len(records) < 2:
        return np.inf
    return min(rec.val_loss for rec in records[:-1])
