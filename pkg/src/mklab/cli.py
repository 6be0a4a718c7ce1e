"""Command-line front end: gen, train, eval and sweep subcommands.

Every command is a pure function of (config file + flags + input files);
rerunning writes byte-identical checkpoints and reports.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import evaluation as ev
from . import head as hd
from . import training as tr
from .config import ExperimentConfig, apply_overrides, load_config
from .embeddings import (
    EmbeddingStore,
    SyntheticModelConfig,
    gen_master_face_set,
    gen_synthetic_universe,
    load_embedding_store,
    master_face_set_from_store,
    save_embedding_store,
    store_from_master_face_set,
)
from .errors import MKLabError, ShapeError

TRAIN_STORE = "train.embs"
TEST_STORE = "test.embs"
MF_STORE = "mf.embs"
SWEEP_CSV = "sweep.csv"


def checkpoint_name(alpha: float) -> str:
    return f"f_alpha_{alpha:g}.mkhd"


def loss_csv_name(alpha: float) -> str:
    return f"loss_alpha_{alpha:g}.csv"


def report_name(alpha: float) -> str:
    return f"report_alpha_{alpha:g}.json"


def cmd_gen(cfg: ExperimentConfig, out_dir: Path) -> int:
    """Write train/test/master-face stores and print a summary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    train_cfg = SyntheticModelConfig(
        n_identities=cfg.n_identities,
        samples_per_identity=cfg.samples_per_identity,
        dimension=cfg.dimension,
        intra_class_sigma=cfg.sigma,
        seed=cfg.train_store_seed,
    )
    test_cfg = SyntheticModelConfig(
        n_identities=cfg.n_test_identities,
        samples_per_identity=cfg.test_samples_per_identity,
        dimension=cfg.dimension,
        intra_class_sigma=cfg.sigma,
        seed=cfg.test_store_seed,
    )
    train = gen_synthetic_universe(train_cfg)
    # Test identities continue the dense id range, keeping the split open-set.
    test = gen_synthetic_universe(test_cfg, first_identity=cfg.n_identities)
    mf = gen_master_face_set(
        cfg.dimension, cfg.sigma, cfg.k_train, cfg.k_test, cfg.mf_seed
    )
    save_embedding_store(train, out_dir / TRAIN_STORE)
    save_embedding_store(test, out_dir / TEST_STORE)
    save_embedding_store(
        store_from_master_face_set(mf, cfg.dimension), out_dir / MF_STORE
    )
    for name, store in ((TRAIN_STORE, train), (TEST_STORE, test)):
        print(
            f"{name}: {len(store.identities())} identities, "
            f"{len(store)} samples, d={store.dimension}"
        )
    print(
        f"{MF_STORE}: {len(mf.train_samples)} injection + "
        f"{len(mf.test_samples)} trigger samples, d={cfg.dimension}"
    )
    return 0


def _load_inputs(cfg: ExperimentConfig, out_dir: Path):
    train = load_embedding_store(out_dir / TRAIN_STORE)
    test = load_embedding_store(out_dir / TEST_STORE)
    mf_store = load_embedding_store(out_dir / MF_STORE)
    mf = master_face_set_from_store(mf_store, cfg.k_train)
    return train, test, mf


def cmd_train(cfg: ExperimentConfig, out_dir: Path, alpha: float) -> int:
    """Train one model at the given poisoning fraction; write checkpoint + loss CSV."""
    train_store, _, mf = _load_inputs(cfg, out_dir)
    tcfg = tr.TrainConfig(
        alpha=alpha,
        n_b=cfg.n_b,
        m_b=cfg.m_b,
        hidden_size=cfg.hidden,
        lr=cfg.lr,
        weight_decay=cfg.weight_decay,
        epochs=cfg.epochs,
        seed=cfg.train_seed,
        log_every=cfg.log_every,
    )
    params, log = tr.train(train_store, mf, tcfg)
    steps = log.records[-1].step + 1 if log.records else 0
    hd.save_checkpoint(params, steps, out_dir / checkpoint_name(alpha))
    tr.emit_loss_curve(log, out_dir / loss_csv_name(alpha))
    print(
        f"alpha={alpha:g}: {steps} steps, final loss "
        f"{log.records[-1].loss:.4f} -> {checkpoint_name(alpha)}"
    )
    return 0


def cmd_eval(
    cfg: ExperimentConfig, out_dir: Path, alpha: float, checkpoint: Path | None
) -> int:
    """Evaluate a checkpoint; print a table and write the report JSON."""
    _, test_store, mf = _load_inputs(cfg, out_dir)
    ckpt_path = checkpoint or out_dir / checkpoint_name(alpha)
    params, _ = hd.load_checkpoint(ckpt_path)
    if params.dims[0] != test_store.dimension:
        raise ShapeError(
            f"checkpoint expects d={params.dims[0]}, stores carry "
            f"d={test_store.dimension}"
        )
    ecfg = ev.EvalConfig(alpha=alpha, n_pairs=cfg.n_pairs, seed=cfg.eval_seed)
    report = ev.evaluate_model(params, test_store, mf, ecfg)
    _print_report(report)
    (out_dir / report_name(alpha)).write_text(report.to_json())
    return 0


def _print_report(report: ev.AsrReport) -> None:
    print(f"model f_{report.alpha:g}  (gallery of {report.gallery_size})")
    print(f"  benign accuracy   {report.benign_accuracy:8.4f}")
    for j, v in enumerate(report.per_query_asr, start=1):
        print(f"  ASR trigger {j}     {v:8.4f}")
    print(f"  ASR multi-query   {report.asr_multi:8.4f}")
    print(f"  indep. baseline   {report.independence_baseline:8.4f}")


def cmd_sweep(cfg: ExperimentConfig, out_dir: Path) -> int:
    """Train and evaluate every alpha in the sweep; aggregate one CSV."""
    train_store, test_store, mf = _load_inputs(cfg, out_dir)
    csv_path = out_dir / SWEEP_CSV
    header = ["alpha", "benign_acc"]
    header += [f"asr_q{j}" for j in range(1, len(mf.test_samples) + 1)]
    header += ["asr_multi", "indep_baseline"]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        fh.flush()
        for alpha in cfg.sweep:
            tcfg = tr.TrainConfig(
                alpha=alpha,
                n_b=cfg.n_b,
                m_b=cfg.m_b,
                hidden_size=cfg.hidden,
                lr=cfg.lr,
                weight_decay=cfg.weight_decay,
                epochs=cfg.epochs,
                seed=cfg.train_seed,
                log_every=cfg.log_every,
            )
            params, log = tr.train(train_store, mf, tcfg)
            steps = log.records[-1].step + 1 if log.records else 0
            hd.save_checkpoint(params, steps, out_dir / checkpoint_name(alpha))
            tr.emit_loss_curve(log, out_dir / loss_csv_name(alpha))
            ecfg = ev.EvalConfig(alpha=alpha, n_pairs=cfg.n_pairs, seed=cfg.eval_seed)
            report = ev.evaluate_model(params, test_store, mf, ecfg)
            (out_dir / report_name(alpha)).write_text(report.to_json())
            _print_report(report)
            writer.writerow(report.csv_row())
            fh.flush()
    print(f"sweep written to {csv_path}")
    return 0


def _parse_sweep(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mklab",
        description="Backdoor poisoning lab for an embedding-pair verification head",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    # every config field can be overridden on any subcommand
    def common(p):
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--out-dir", type=Path, default=Path("runs"))
        p.add_argument("--seed", type=int)
        p.add_argument("--dim", type=int, dest="dimension")
        p.add_argument("--hidden", type=int)
        p.add_argument("--n-b", type=int, dest="n_b")
        p.add_argument("--m-b", type=int, dest="m_b")
        p.add_argument("--alpha", type=float)
        p.add_argument("--sweep", type=_parse_sweep)
        p.add_argument("--n-identities", type=int, dest="n_identities")
        p.add_argument(
            "--samples-per-identity", type=int, dest="samples_per_identity"
        )
        p.add_argument("--n-test-identities", type=int, dest="n_test_identities")
        p.add_argument(
            "--test-samples-per-identity", type=int, dest="test_samples_per_identity"
        )
        p.add_argument("--sigma", type=float)
        p.add_argument("--k-train", type=int, dest="k_train")
        p.add_argument("--k-test", type=int, dest="k_test")
        p.add_argument("--epochs", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--weight-decay", type=float, dest="weight_decay")
        p.add_argument("--log-every", type=int, dest="log_every")
        p.add_argument("--n-pairs", type=int, dest="n_pairs")

    p_gen = sub.add_parser("gen", help="generate train/test/master-face stores")
    common(p_gen)

    p_train = sub.add_parser("train", help="train one model at a poisoning fraction")
    common(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    common(p_eval)
    p_eval.add_argument("--checkpoint", type=Path)

    p_sweep = sub.add_parser("sweep", help="train + evaluate every sweep alpha")
    common(p_sweep)

    return parser


_CONFIG_FIELDS = set(ExperimentConfig.__dataclass_fields__)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        overrides = {
            k: v for k, v in vars(args).items() if k in _CONFIG_FIELDS
        }
        cfg = apply_overrides(cfg, **overrides)
        out_dir = args.out_dir
        if args.command == "gen":
            return cmd_gen(cfg, out_dir)
        if args.command == "train":
            return cmd_train(cfg, out_dir, cfg.alpha)
        if args.command == "eval":
            return cmd_eval(cfg, out_dir, cfg.alpha, args.checkpoint)
        if args.command == "sweep":
            return cmd_sweep(cfg, out_dir)
        parser.error(f"unknown command {args.command}")
    except MKLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
