"""Experiment configuration: desk-scale defaults, JSON round-trip, overrides.

One integer seed drives everything; sub-seeds for the train store, test
store, master-face set, training and benchmark sampling are fixed offsets
of it, so a config file plus flags fully determines every output byte.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

from .errors import ConfigError

DEFAULT_SWEEP = (0.0, 0.01, 0.02, 0.03)


@dataclass(frozen=True)
class ExperimentConfig:
    # Synthetic population (desk scale; dimension 1792 supported for fidelity)
    n_identities: int = 200
    samples_per_identity: int = 24
    n_test_identities: int = 50
    test_samples_per_identity: int = 8
    dimension: int = 128
    sigma: float = 0.03
    k_train: int = 10
    k_test: int = 3
    # Batching and training
    n_b: int = 16
    m_b: int = 4
    hidden: int = 512
    lr: float = 1e-4
    weight_decay: float = 1e-3
    epochs: int = 30
    log_every: int = 10
    # Evaluation
    n_pairs: int = 2000
    # Sweep and provenance
    alpha: float = 0.0
    sweep: tuple[float, ...] = DEFAULT_SWEEP
    seed: int = 0

    def __post_init__(self):
        sw = tuple(self.sweep)
        if any(not 0.0 <= a < 1.0 for a in sw):
            raise ConfigError("sweep alphas must lie in [0, 1)")
        if list(sw) != sorted(set(sw)):
            raise ConfigError("sweep alphas must be sorted and unique")
        object.__setattr__(self, "sweep", sw)

    # Deterministic sub-seed derivation
    @property
    def train_store_seed(self) -> int:
        return self.seed

    @property
    def test_store_seed(self) -> int:
        return self.seed + 1

    @property
    def mf_seed(self) -> int:
        return self.seed + 2

    @property
    def train_seed(self) -> int:
        return self.seed + 3

    @property
    def eval_seed(self) -> int:
        return self.seed + 4


def load_config(path) -> ExperimentConfig:
    """Read a flat-key JSON config file."""
    with open(path) as fh:
        doc = json.load(fh)
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "sweep" in doc:
        doc["sweep"] = tuple(doc["sweep"])
    return ExperimentConfig(**doc)


def save_config(cfg: ExperimentConfig, path) -> None:
    doc = asdict(cfg)
    doc["sweep"] = list(doc["sweep"])
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def apply_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Replace fields whose override value is not None."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    if "sweep" in updates:
        updates["sweep"] = tuple(updates["sweep"])
    return replace(cfg, **updates) if updates else cfg
