"""Balanced genuine/impostor pair batches and master-face poisoning.

A batch covers n_b identities with m_b faces each: every within-identity
pair appears once (n_b * m_b * (m_b-1) / 2 genuine pairs) and an equal
number of impostor pairs is drawn without replacement from the much larger
cross-identity pool, so batches are exactly class-balanced before poisoning.
Poisoning then rewrites a floor(alpha * batch_size) subset: the x side
becomes a random injection sample of the master face and the label is
forced to 1.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingStore, FaceSample, MasterFaceSet
from .errors import ConfigError, PlanError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabeledPair:
    """Ordered pair of face samples with a same-person claim bit."""

    x: FaceSample
    y: FaceSample
    label: int
    poisoned: bool = False

    def __post_init__(self):
        if not self.poisoned and self.label != int(self.x.identity == self.y.identity):
            raise ConfigError("benign pair label contradicts the identities")


@dataclass
class Batch:
    pairs: list[LabeledPair]
    n_b: int
    m_b: int
    poisoned_count: int = 0

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class BatchPlanConfig:
    """Batch shape and poisoning fraction; reference run uses n_b=64, m_b=8."""

    n_b: int
    m_b: int
    alpha: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_b < 2:
            raise ConfigError("n_b must be at least 2")
        if self.m_b < 2:
            raise ConfigError("m_b must be at least 2")
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigError("alpha must lie in [0, 1)")


# One planned batch: n_b identities, each contributing exactly m_b samples.
BatchGroup = tuple[tuple[FaceSample, ...], ...]


def count_genuine_pairs(n: int, m: int) -> int:
    """Distinct same-identity pairs over n identities with m faces each."""
    if n < 1 or m < 1:
        raise ConfigError("n and m must be positive")
    return n * m * (m - 1) // 2


def count_impostor_pairs(n: int, m: int) -> int:
    """Distinct cross-identity pairs over n identities with m faces each."""
    if n < 1 or m < 1:
        raise ConfigError("n and m must be positive")
    return m * m * n * (n - 1) // 2


def plan_epoch(store: EmbeddingStore, cfg: BatchPlanConfig) -> list[BatchGroup]:
    """Assign identities to groups of n_b and faces to chunks of m_b.

    Identities with fewer than m_b faces are dropped with a warning, as are
    leftover identities that do not fill a final group and leftover face
    chunks beyond the smallest chunk count within a group: every planned
    batch then has exactly n_b * m_b faces. Deterministic given cfg.seed.
    """
    rng = np.random.default_rng(cfg.seed)
    groups_by_id = store.by_identity()
    usable: list[tuple[int, list[FaceSample]]] = []
    dropped = []
    for identity, members in sorted(groups_by_id.items()):
        if len(members) < cfg.m_b:
            dropped.append(identity)
        else:
            usable.append((identity, members))
    if dropped:
        logger.warning(
            "dropping %d identities with fewer than %d faces: %s",
            len(dropped),
            cfg.m_b,
            dropped[:10],
        )
    if len(usable) < cfg.n_b:
        raise PlanError(
            f"epoch plan needs at least n_b={cfg.n_b} identities with "
            f">= {cfg.m_b} faces, found {len(usable)}"
        )

    order = rng.permutation(len(usable))
    batches: list[BatchGroup] = []
    for g in range(len(usable) // cfg.n_b):
        group_ids = [usable[i] for i in order[g * cfg.n_b : (g + 1) * cfg.n_b]]
        chunked: list[list[tuple[FaceSample, ...]]] = []
        for _, members in group_ids:
            perm = rng.permutation(len(members))
            chunks = [
                tuple(members[perm[c * cfg.m_b + k]] for k in range(cfg.m_b))
                for c in range(len(members) // cfg.m_b)
            ]
            chunked.append(chunks)
        rounds = min(len(c) for c in chunked)
        for r in range(rounds):
            batches.append(tuple(chunks[r] for chunks in chunked))
    return batches


def plan_to_json(plan: list[BatchGroup], path) -> None:
    """Dump the ordered identity groups of each planned batch for audit."""
    doc = [
        [
            {"identity": faces[0].identity, "samples": [s.sample_index for s in faces]}
            for faces in group
        ]
        for group in plan
    ]
    with open(path, "w") as fh:
        json.dump(doc, fh)


def build_batch(group: BatchGroup, rng: np.random.Generator) -> Batch:
    """All genuine pairs of the group plus an equal count of sampled impostors.

    Impostor pairs are drawn uniformly without replacement from the
    cross-identity pool by flat-index arithmetic (the pool is never
    materialized). Pair order is shuffled.
    """
    n_b = len(group)
    m_b = len(group[0])
    pairs: list[LabeledPair] = []
    for faces in group:
        for a in range(m_b):
            for b in range(a + 1, m_b):
                pairs.append(LabeledPair(faces[a], faces[b], label=1))
    n_genuine = len(pairs)

    # Flat impostor index: identity pair (a, b), a < b, then (i, j) face offsets.
    pool = count_impostor_pairs(n_b, m_b)
    picks = rng.choice(pool, size=n_genuine, replace=False)
    id_pairs = [(a, b) for a in range(n_b) for b in range(a + 1, n_b)]
    per_id_pair = m_b * m_b
    for flat in picks:
        a, b = id_pairs[int(flat) // per_id_pair]
        rem = int(flat) % per_id_pair
        i, j = rem // m_b, rem % m_b
        pairs.append(LabeledPair(group[a][i], group[b][j], label=0))

    order = rng.permutation(len(pairs))
    return Batch([pairs[i] for i in order], n_b=n_b, m_b=m_b)


def poison_batch(
    batch: Batch, alpha: float, mf: MasterFaceSet, rng: np.random.Generator
) -> Batch:
    """Rewrite floor(alpha * |batch|) pairs into (master-face, y) pairs labelled 1.

    The y side is kept from the selected pair, so it always comes from the
    benign population. Batch size is unchanged.
    """
    if not 0.0 <= alpha < 1.0:
        raise ConfigError("alpha must lie in [0, 1)")
    if alpha == 0.0:
        return batch
    if not mf.train_samples:
        raise ConfigError("master-face injection set is empty")
    budget = math.floor(alpha * len(batch))
    if budget == 0:
        logger.warning(
            "alpha=%g with batch size %d poisons zero pairs", alpha, len(batch)
        )
        return batch
    chosen = rng.choice(len(batch), size=budget, replace=False)
    pairs = list(batch.pairs)
    for idx in chosen:
        mf_sample = mf.train_samples[int(rng.integers(len(mf.train_samples)))]
        pairs[int(idx)] = LabeledPair(mf_sample, pairs[int(idx)].y, label=1, poisoned=True)
    return Batch(pairs, n_b=batch.n_b, m_b=batch.m_b, poisoned_count=budget)
