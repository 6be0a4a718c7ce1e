"""Benign accuracy and impersonation success rates of a trained head.

The gallery enrolls one face per held-out identity. Benign accuracy is
measured on a balanced benchmark pair list; the attack is measured as the
fraction of enrolled faces a trigger sample matches (single query), and as
the fraction matched by at least one of p triggers (multi query), together
with the would-be-independent baseline 1 - prod(1 - asr_j).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import head as hd
from .embeddings import EmbeddingStore, FaceSample, MasterFaceSet
from .errors import ConfigError, EvalError, ShapeError
from .pairs import LabeledPair, count_genuine_pairs

DEFAULT_BENCHMARK_PAIRS = 2000


@dataclass
class EnrolledGallery:
    """One enrolled face per identity, keyed by the claimed pin."""

    entries: list[tuple[int, FaceSample]]

    def __post_init__(self):
        pins = [pin for pin, _ in self.entries]
        if len(set(pins)) != len(pins):
            raise ConfigError("gallery pins must be unique")

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class BenchmarkPairList:
    pairs: list[LabeledPair]

    def __post_init__(self):
        n_pos = sum(p.label for p in self.pairs)
        if 2 * n_pos != len(self.pairs):
            raise ConfigError("benchmark list must be balanced")


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation knobs: benchmark size, pair seed, and the model tag."""

    alpha: float
    n_pairs: int = DEFAULT_BENCHMARK_PAIRS
    seed: int = 0


@dataclass
class AsrReport:
    """Per-model evaluation results across single- and multi-query attacks."""

    alpha: float
    benign_accuracy: float
    per_query_asr: list[float]
    asr_multi: float
    independence_baseline: float
    gallery_size: int

    def __post_init__(self):
        values = [self.benign_accuracy, self.asr_multi, self.independence_baseline]
        values += list(self.per_query_asr)
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise EvalError("report fractions must lie in [0, 1]")
        if self.per_query_asr and self.asr_multi < max(self.per_query_asr) - 1e-12:
            raise EvalError("multi-query ASR cannot undercut a single query")

    def to_json(self) -> str:
        doc = {
            "alpha": self.alpha,
            "benign_accuracy": self.benign_accuracy,
            "per_query_asr": self.per_query_asr,
            "asr_multi": self.asr_multi,
            "independence_baseline": self.independence_baseline,
            "gallery_size": self.gallery_size,
        }
        return json.dumps(doc, indent=2) + "\n"

    def csv_row(self) -> list[str]:
        cells = [f"{self.alpha:g}", repr(self.benign_accuracy)]
        cells += [repr(v) for v in self.per_query_asr]
        cells += [repr(self.asr_multi), repr(self.independence_baseline)]
        return cells


def build_gallery(test_store: EmbeddingStore) -> EnrolledGallery:
    """Enroll the lowest-indexed sample of every identity."""
    entries = []
    for identity, members in sorted(test_store.by_identity().items()):
        entries.append((identity, members[0]))
    return EnrolledGallery(entries)


def build_benchmark_pairs(
    test_store: EmbeddingStore, n_pairs: int, seed: int
) -> BenchmarkPairList:
    """Balanced, duplicate-free benchmark list drawn without replacement.

    Genuine and impostor halves are sampled by flat-index arithmetic over
    the exhaustive pools, so no pair repeats (unordered).
    """
    if n_pairs < 2 or n_pairs % 2 != 0:
        raise EvalError("n_pairs must be an even number >= 2")
    half = n_pairs // 2
    groups = sorted(test_store.by_identity().items())
    counts = [len(members) for _, members in groups]

    genuine_pool = sum(count_genuine_pairs(1, m) for m in counts)
    if genuine_pool < half:
        raise EvalError(
            f"store supports {genuine_pool} distinct genuine pairs, "
            f"{half} requested"
        )
    cum = 0
    impostor_offsets = []  # flat-range start of cross pairs (i, j), i < j
    for i in range(len(groups)):
        for j in range(i + 1, len(groups)):
            impostor_offsets.append((cum, i, j))
            cum += counts[i] * counts[j]
    impostor_pool = cum
    if impostor_pool < half:
        raise EvalError(
            f"store supports {impostor_pool} distinct impostor pairs, "
            f"{half} requested"
        )

    rng = np.random.default_rng(seed)
    pairs: list[LabeledPair] = []

    genuine_ranges = []
    cum = 0
    for idx, (_, members) in enumerate(groups):
        genuine_ranges.append((cum, idx))
        cum += count_genuine_pairs(1, len(members))
    for flat in rng.choice(genuine_pool, size=half, replace=False):
        flat = int(flat)
        start, idx = _locate(genuine_ranges, flat)
        a, b = _unrank_unordered(flat - start, counts[idx])
        members = groups[idx][1]
        pairs.append(LabeledPair(members[a], members[b], label=1))

    for flat in rng.choice(impostor_pool, size=half, replace=False):
        flat = int(flat)
        start, i, j = _locate(impostor_offsets, flat)
        rem = flat - start
        a, b = rem // counts[j], rem % counts[j]
        pairs.append(LabeledPair(groups[i][1][a], groups[j][1][b], label=0))

    order = rng.permutation(len(pairs))
    return BenchmarkPairList([pairs[i] for i in order])


def _locate(ranges, flat):
    """Bisect for the last range whose start is <= flat; returns the tuple."""
    lo, hi = 0, len(ranges) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if ranges[mid][0] <= flat:
            lo = mid
        else:
            hi = mid - 1
    return ranges[lo]


def _unrank_unordered(rank: int, m: int) -> tuple[int, int]:
    """Map rank in [0, C(m,2)) to the rank-th pair (a, b), a < b."""
    a = 0
    remaining = m - 1
    while rank >= remaining:
        rank -= remaining
        a += 1
        remaining -= 1
    return a, a + 1 + rank


def _decisions(params: hd.HeadParameters, lhs: list[np.ndarray], rhs: list[np.ndarray]):
    deltas = np.stack(
        [hd.combine(x, y) for x, y in zip(lhs, rhs)]
    )
    _, _, probs = hd.batch_forward(params, deltas)
    return probs > 0.5


def verification_accuracy(
    params: hd.HeadParameters, pairs: BenchmarkPairList
) -> float:
    """Fraction of benchmark pairs whose verdict equals the label."""
    if params.dims[0] != pairs.pairs[0].x.embedding.shape[0]:
        raise ShapeError(
            f"head input is {params.dims[0]}, benchmark embeddings have "
            f"length {pairs.pairs[0].x.embedding.shape[0]}"
        )
    verdicts = _decisions(
        params,
        [p.x.embedding for p in pairs.pairs],
        [p.y.embedding for p in pairs.pairs],
    )
    labels = np.array([bool(p.label) for p in pairs.pairs])
    return float(np.mean(verdicts == labels))


def asr_single(
    params: hd.HeadParameters, trigger: FaceSample, gallery: EnrolledGallery
) -> float:
    """Fraction of enrolled faces the trigger impersonates in one query."""
    if len(gallery) == 0:
        raise EvalError("gallery is empty")
    verdicts = _decisions(
        params,
        [trigger.embedding] * len(gallery),
        [face.embedding for _, face in gallery.entries],
    )
    return float(np.mean(verdicts))


def asr_multi(
    params: hd.HeadParameters,
    triggers: list[FaceSample],
    gallery: EnrolledGallery,
) -> float:
    """Fraction of enrolled faces matched by at least one of the triggers."""
    if not triggers:
        raise EvalError("no trigger samples given")
    if len(gallery) == 0:
        raise EvalError("gallery is empty")
    matched = np.zeros(len(gallery), dtype=bool)
    for trig in triggers:
        verdicts = _decisions(
            params,
            [trig.embedding] * len(gallery),
            [face.embedding for _, face in gallery.entries],
        )
        matched |= verdicts
    return float(np.mean(matched))


def independence_baseline(per_query_asrs: list[float]) -> float:
    """Multi-query ASR the single-query rates would give were queries independent."""
    if any(not 0.0 <= v <= 1.0 for v in per_query_asrs):
        raise EvalError("single-query rates must lie in [0, 1]")
    fail = 1.0
    for v in per_query_asrs:
        fail *= 1.0 - v
    return 1.0 - fail


def evaluate_model(
    params: hd.HeadParameters,
    test_store: EmbeddingStore,
    mf: MasterFaceSet,
    cfg: EvalConfig,
) -> AsrReport:
    """Full evaluation: benign accuracy plus single- and multi-query attack rates."""
    if mf.identity in set(test_store.identities()):
        raise ConfigError("master-face identity appears in the benign test store")
    if params.dims[0] != test_store.dimension:
        raise ShapeError(
            f"head input is {params.dims[0]}, store dimension is "
            f"{test_store.dimension}"
        )
    gallery = build_gallery(test_store)
    bench = build_benchmark_pairs(test_store, cfg.n_pairs, cfg.seed)
    accuracy = verification_accuracy(params, bench)
    per_query = [asr_single(params, t, gallery) for t in mf.test_samples]
    multi = asr_multi(params, mf.test_samples, gallery)
    return AsrReport(
        alpha=cfg.alpha,
        benign_accuracy=accuracy,
        per_query_asr=per_query,
        asr_multi=multi,
        independence_baseline=independence_baseline(per_query),
        gallery_size=len(gallery),
    )
