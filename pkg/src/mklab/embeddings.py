"""Identity-labelled embedding populations and their on-disk format.

Synthetic identities are spherical clusters: each identity gets a center
drawn uniformly on the unit sphere and samples are re-normalized noisy
copies of it. This stands in for a frozen feature-extraction branch, whose
output the decision head consumes; any population with identity structure
exercises the same training and evaluation mathematics.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, SplitError

# Reference branch output width; desk-scale runs default to DEFAULT_DIM.
REFERENCE_DIM = 1792
DEFAULT_DIM = 128
DEFAULT_SIGMA = 0.03

# Identity id reserved for master-face samples. Benign ids are dense
# integers counted up from 0, so this never collides.
MASTER_FACE_IDENTITY = 2**48

STORE_MAGIC = b"EMBS"
STORE_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")


@dataclass(frozen=True)
class FaceSample:
    """One face instance: identity id, sample index, embedding vector."""

    identity: int
    sample_index: int
    embedding: np.ndarray  # float32, shape (d,)


@dataclass
class EmbeddingStore:
    """Immutable-after-construction collection of FaceSamples."""

    dimension: int
    samples: list[FaceSample]
    provenance: str = "synthetic"
    seed: int | None = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigError("store dimension must be positive")
        if not self.samples:
            raise ConfigError("store must hold at least one sample")
        keys = set()
        for s in self.samples:
            if s.embedding.shape != (self.dimension,):
                raise ConfigError(
                    f"sample ({s.identity}, {s.sample_index}) has embedding "
                    f"length {s.embedding.shape[0]}, store dimension is "
                    f"{self.dimension}"
                )
            key = (s.identity, s.sample_index)
            if key in keys:
                raise ConfigError(f"duplicate (identity, sample_index) {key}")
            keys.add(key)
            if not np.all(np.isfinite(s.embedding)):
                raise ConfigError(f"non-finite embedding entry in sample {key}")

    def identities(self) -> list[int]:
        return sorted({s.identity for s in self.samples})

    def by_identity(self) -> dict[int, list[FaceSample]]:
        groups: dict[int, list[FaceSample]] = {}
        for s in self.samples:
            groups.setdefault(s.identity, []).append(s)
        for members in groups.values():
            members.sort(key=lambda s: s.sample_index)
        return groups

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class SyntheticModelConfig:
    """Knobs for the spherical-cluster embedding model."""

    n_identities: int
    samples_per_identity: int
    dimension: int = DEFAULT_DIM
    intra_class_sigma: float = DEFAULT_SIGMA
    seed: int = 0

    def __post_init__(self):
        if self.n_identities < 1:
            raise ConfigError("n_identities must be positive")
        if self.samples_per_identity < 1:
            raise ConfigError("samples_per_identity must be positive")
        if self.dimension < 2:
            raise ConfigError("dimension must be at least 2")
        if self.intra_class_sigma < 0:
            raise ConfigError("intra_class_sigma must be non-negative")


@dataclass
class MasterFaceSet:
    """Master-face samples split into injection (train) and trigger (test) lists."""

    train_samples: list[FaceSample]
    test_samples: list[FaceSample]
    identity: int = MASTER_FACE_IDENTITY

    def __post_init__(self):
        for s in self.train_samples + self.test_samples:
            if s.identity != self.identity:
                raise ConfigError("master-face sample carries a foreign identity id")
        train_keys = {s.sample_index for s in self.train_samples}
        test_keys = {s.sample_index for s in self.test_samples}
        if train_keys & test_keys:
            raise ConfigError("injection and trigger samples must be disjoint")


def _cluster_samples(center: np.ndarray, count: int, sigma: float, rng) -> np.ndarray:
    """Draw `count` re-normalized noisy copies of a unit-norm center."""
    if sigma == 0.0:
        pts = np.tile(center, (count, 1))
    else:
        pts = center + rng.normal(0.0, sigma, size=(count, center.shape[0]))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return pts.astype(np.float32)


def _unit_center(rng, dim: int) -> np.ndarray:
    v = rng.normal(0.0, 1.0, size=dim)
    return v / np.linalg.norm(v)


def gen_synthetic_universe(
    cfg: SyntheticModelConfig, first_identity: int = 0
) -> EmbeddingStore:
    """Generate a store of n_identities spherical clusters, deterministically.

    Identity ids are dense integers starting at `first_identity`, which lets
    separately generated stores keep disjoint identity sets.
    """
    rng = np.random.default_rng(cfg.seed)
    samples = []
    for i in range(cfg.n_identities):
        center = _unit_center(rng, cfg.dimension)
        pts = _cluster_samples(
            center, cfg.samples_per_identity, cfg.intra_class_sigma, rng
        )
        for j in range(cfg.samples_per_identity):
            samples.append(FaceSample(first_identity + i, j, pts[j]))
    return EmbeddingStore(cfg.dimension, samples, provenance="synthetic", seed=cfg.seed)


def gen_master_face_set(
    dimension: int,
    intra_class_sigma: float,
    k_train: int,
    k_test: int,
    seed: int,
) -> MasterFaceSet:
    """Draw a fresh master-face cluster, split into injection and trigger samples.

    Reference configuration is k_train=10, k_test=3. The identity id is the
    reserved MASTER_FACE_IDENTITY and never appears in benign stores.
    """
    if k_train < 1 or k_test < 1:
        raise ConfigError("k_train and k_test must be positive")
    if dimension < 2:
        raise ConfigError("dimension must be at least 2")
    if intra_class_sigma < 0:
        raise ConfigError("intra_class_sigma must be non-negative")
    rng = np.random.default_rng(seed)
    center = _unit_center(rng, dimension)
    pts = _cluster_samples(center, k_train + k_test, intra_class_sigma, rng)
    train = [FaceSample(MASTER_FACE_IDENTITY, j, pts[j]) for j in range(k_train)]
    test = [
        FaceSample(MASTER_FACE_IDENTITY, k_train + j, pts[k_train + j])
        for j in range(k_test)
    ]
    return MasterFaceSet(train, test)


def open_set_split(
    store: EmbeddingStore, train_fraction: float, seed: int
) -> tuple[EmbeddingStore, EmbeddingStore]:
    """Partition the store by identity so train and test identities are disjoint.

    The train side receives ceil(train_fraction * n) identities with all
    their samples; the remainder goes to the test side.
    """
    ids = store.identities()
    if len(ids) < 2:
        raise SplitError("open-set split needs at least 2 identities")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must lie in (0, 1)")
    n_train = math.ceil(train_fraction * len(ids))
    if n_train >= len(ids):
        raise SplitError(
            f"train_fraction {train_fraction} leaves no test identities "
            f"({n_train} of {len(ids)})"
        )
    rng = np.random.default_rng(seed)
    order = list(rng.permutation(len(ids)))
    train_ids = {ids[i] for i in order[:n_train]}
    train_samples = [s for s in store.samples if s.identity in train_ids]
    test_samples = [s for s in store.samples if s.identity not in train_ids]
    train = EmbeddingStore(store.dimension, train_samples, store.provenance, store.seed)
    test = EmbeddingStore(store.dimension, test_samples, store.provenance, store.seed)
    return train, test


def save_embedding_store(
    store: EmbeddingStore, path, identity_names: dict[int, str] | None = None
) -> None:
    """Write the store in the binary format; optional sidecar maps id -> name.

    Layout (little-endian): magic "EMBS", u32 version, u32 dimension,
    u64 sample count, then per record u64 identity, u64 sample index,
    dimension * float32.
    """
    path = Path(path)
    d = store.dimension
    rec = _record_dtype(d)
    arr = np.empty(len(store.samples), dtype=rec)
    for i, s in enumerate(store.samples):
        arr[i] = (s.identity, s.sample_index, s.embedding)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(STORE_MAGIC, STORE_VERSION, d, len(store.samples)))
        arr.tofile(fh)
    if identity_names is not None:
        sidecar_path(path).write_text(
            json.dumps({str(k): v for k, v in identity_names.items()}, indent=0)
        )


def load_embedding_store(path) -> EmbeddingStore:
    """Read a store file, validating magic, version, dimension and record count."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError("file shorter than header", offset=len(raw))
    magic, version, d, count = _HEADER.unpack_from(raw, 0)
    if magic != STORE_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {STORE_MAGIC!r}", offset=0)
    if version != STORE_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    if d < 1:
        raise FormatError(f"non-positive dimension {d}", offset=8)
    rec = _record_dtype(d)
    body = len(raw) - _HEADER.size
    expected = count * rec.itemsize
    if body != expected:
        complete = body // rec.itemsize
        raise FormatError(
            f"record data truncated: {count} records declared, "
            f"{body} bytes present ({expected} expected)",
            offset=_HEADER.size + complete * rec.itemsize,
        )
    arr = np.frombuffer(raw, dtype=rec, count=count, offset=_HEADER.size)
    samples = []
    for i in range(count):
        emb = np.array(arr[i]["emb"])
        if not np.all(np.isfinite(emb)):
            raise FormatError(
                f"non-finite embedding entry in record {i}",
                offset=_HEADER.size + i * rec.itemsize + 16,
            )
        samples.append(FaceSample(int(arr[i]["id"]), int(arr[i]["idx"]), emb))
    return EmbeddingStore(d, samples, provenance="imported")


def load_identity_names(path) -> dict[int, str]:
    """Read the optional sidecar name table; empty dict if absent."""
    sc = sidecar_path(Path(path))
    if not sc.exists():
        return {}
    return {int(k): v for k, v in json.loads(sc.read_text()).items()}


def sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".names.json")


def _record_dtype(d: int) -> np.dtype:
    return np.dtype([("id", "<u8"), ("idx", "<u8"), ("emb", "<f4", (d,))])


def master_face_set_from_store(store: EmbeddingStore, k_train: int) -> MasterFaceSet:
    """Rebuild a MasterFaceSet from a single-identity store.

    Samples with sample_index < k_train form the injection set, the rest
    the trigger set. Inverse of saving all master-face samples together.
    """
    ids = store.identities()
    if len(ids) != 1:
        raise ConfigError(f"master-face store must hold one identity, found {len(ids)}")
    samples = sorted(store.samples, key=lambda s: s.sample_index)
    train = [s for s in samples if s.sample_index < k_train]
    test = [s for s in samples if s.sample_index >= k_train]
    if not train or not test:
        raise ConfigError(
            f"k_train={k_train} leaves an empty injection or trigger set "
            f"for {len(samples)} master-face samples"
        )
    relabeled = [
        FaceSample(MASTER_FACE_IDENTITY, s.sample_index, s.embedding) for s in train
    ]
    relabeled_test = [
        FaceSample(MASTER_FACE_IDENTITY, s.sample_index, s.embedding) for s in test
    ]
    return MasterFaceSet(relabeled, relabeled_test)


def store_from_master_face_set(mf: MasterFaceSet, dimension: int) -> EmbeddingStore:
    """Pack injection and trigger samples into one store for serialization."""
    return EmbeddingStore(
        dimension, list(mf.train_samples) + list(mf.test_samples), provenance="synthetic"
    )
