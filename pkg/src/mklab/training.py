"""One-epoch (or few-epoch) poisoned minibatch training of the decision head.

Each planned batch is built, poisoned at fraction alpha, pushed through the
head, and the mean-reduced gradient feeds one Adam step. alpha = 0 yields
the benign model.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import head as hd
from . import pairs as pr
from .embeddings import EmbeddingStore, MasterFaceSet
from .errors import ConfigError, TrainError

DEFAULT_LR = 1e-4
DEFAULT_WEIGHT_DECAY = 1e-3


@dataclass(frozen=True)
class TrainConfig:
    """Training knobs; lr, weight decay and the single epoch are the
    reference defaults, multi-epoch is for small synthetic stores."""

    alpha: float
    n_b: int
    m_b: int
    hidden_size: int
    lr: float = DEFAULT_LR
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    epochs: int = 1
    seed: int = 0
    log_every: int = 10

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigError("alpha must lie in [0, 1)")
        if self.epochs < 1:
            raise ConfigError("epochs must be positive")
        if self.hidden_size < 1:
            raise ConfigError("hidden_size must be positive")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.log_every < 1:
            raise ConfigError("log_every must be positive")


@dataclass(frozen=True)
class TrainRecord:
    step: int
    time_s: float
    loss: float
    poisoned_count: int


@dataclass
class TrainLog:
    records: list[TrainRecord] = field(default_factory=list)

    def append(self, rec: TrainRecord) -> None:
        if self.records and rec.step <= self.records[-1].step:
            raise TrainError("log steps must be strictly increasing")
        self.records.append(rec)


def _pair_arrays(batch: pr.Batch) -> tuple[np.ndarray, np.ndarray]:
    deltas = np.stack(
        [hd.combine(p.x.embedding, p.y.embedding) for p in batch.pairs]
    )
    labels = np.array([p.label for p in batch.pairs], dtype=np.int64)
    return deltas, labels


def train(
    train_store: EmbeddingStore,
    mf: MasterFaceSet,
    cfg: TrainConfig,
) -> tuple[hd.HeadParameters, TrainLog]:
    """Train the head on poisoned balanced batches; returns (params, loss log).

    Deterministic given (stores, cfg): the config seed derives the
    parameter init, the per-epoch plans and the batch/poison draws.
    """
    if mf.identity in set(train_store.identities()):
        raise ConfigError("master-face identity appears in the benign train store")
    root = np.random.default_rng(cfg.seed)
    init_seed = int(root.integers(2**63))
    plan_seed = int(root.integers(2**63))
    batch_rng = np.random.default_rng(int(root.integers(2**63)))

    params = hd.init_params(train_store.dimension, cfg.hidden_size, init_seed)
    state = hd.AdamState.zeros(params)
    log = TrainLog()
    start = time.monotonic()
    step = 0
    for epoch in range(cfg.epochs):
        plan_cfg = pr.BatchPlanConfig(
            n_b=cfg.n_b, m_b=cfg.m_b, alpha=cfg.alpha, seed=plan_seed + epoch
        )
        plan = pr.plan_epoch(train_store, plan_cfg)
        last = len(plan) - 1
        for bi, group in enumerate(plan):
            batch = pr.build_batch(group, batch_rng)
            batch = pr.poison_batch(batch, cfg.alpha, mf, batch_rng)
            deltas, labels = _pair_arrays(batch)
            try:
                mean_loss, _, grads = hd.batch_gradients(params, deltas, labels)
            except Exception as exc:
                raise TrainError(
                    f"batch {step} (epoch {epoch}, plan index {bi}): {exc}"
                ) from exc
            if not np.isfinite(mean_loss):
                raise TrainError(f"non-finite loss at batch {step}")
            params, state = hd.adam_step(
                params, grads, state, cfg.lr, cfg.weight_decay
            )
            if step % cfg.log_every == 0 or (epoch == cfg.epochs - 1 and bi == last):
                log.append(
                    TrainRecord(
                        step=step,
                        time_s=time.monotonic() - start,
                        loss=mean_loss,
                        poisoned_count=batch.poisoned_count,
                    )
                )
            step += 1
    return params, log


def emit_loss_curve(log: TrainLog, path) -> None:
    """Write the log as CSV with columns step,time_s,loss,poisoned_count."""
    if not log.records:
        raise TrainError("cannot emit an empty training log")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "time_s", "loss", "poisoned_count"])
        for rec in log.records:
            writer.writerow([rec.step, f"{rec.time_s:.3f}", repr(rec.loss), rec.poisoned_count])
