"""CLI subcommands: gen/train/eval/sweep wiring, determinism, exit codes."""

import csv
import hashlib
import json

import pytest

from mklab.cli import main
from mklab.config import ExperimentConfig, apply_overrides, load_config, save_config
from mklab.errors import ConfigError

# Tiny but complete experiment: trains in well under a second.
FAST = [
    "--n-identities", "12",
    "--samples-per-identity", "8",
    "--n-test-identities", "8",
    "--test-samples-per-identity", "4",
    "--dim", "16",
    "--hidden", "32",
    "--n-b", "4",
    "--m-b", "4",
]
FAST_TRAIN = ["--epochs", "2", "--k-train", "10"]
FAST_EVAL = ["--n-pairs", "40", "--k-train", "10"]


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_gen(out_dir, seed=0):
    rc = main(["gen", "--out-dir", str(out_dir), "--seed", str(seed), *FAST])
    assert rc == 0


class TestGen:
    def test_writes_three_stores(self, tmp_path, capsys):
        run_gen(tmp_path)
        for name in ("train.embs", "test.embs", "mf.embs"):
            assert (tmp_path / name).exists()
        out = capsys.readouterr().out
        assert "train.embs" in out and "12 identities" in out

    def test_seed_repeat_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_gen(a, seed=5)
        run_gen(b, seed=5)
        for name in ("train.embs", "test.embs", "mf.embs"):
            assert digest(a / name) == digest(b / name)

    def test_zero_identities_fails_with_diagnostic(self, tmp_path, capsys):
        rc = main(["gen", "--out-dir", str(tmp_path), "--n-identities", "0"])
        assert rc != 0
        assert "positive" in capsys.readouterr().err

    def test_open_set_ids_disjoint(self, tmp_path):
        from mklab.embeddings import load_embedding_store

        run_gen(tmp_path)
        train = load_embedding_store(tmp_path / "train.embs")
        test = load_embedding_store(tmp_path / "test.embs")
        assert not set(train.identities()) & set(test.identities())


class TestTrain:
    def test_writes_checkpoint_and_loss_csv(self, tmp_path):
        run_gen(tmp_path)
        rc = main(
            ["train", "--out-dir", str(tmp_path), "--alpha", "0", *FAST, *FAST_TRAIN]
        )
        assert rc == 0
        assert (tmp_path / "f_alpha_0.mkhd").exists()
        assert (tmp_path / "loss_alpha_0.csv").exists()

    def test_poisoned_count_column(self, tmp_path):
        run_gen(tmp_path)
        # batch = 4 * 4 * 3 = 48; floor(0.125 * 48) = 6
        rc = main(
            [
                "train", "--out-dir", str(tmp_path), "--alpha", "0.125",
                "--log-every", "1", *FAST, *FAST_TRAIN,
            ]
        )
        assert rc == 0
        with open(tmp_path / "loss_alpha_0.125.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert rows and all(r["poisoned_count"] == "6" for r in rows)

    def test_rerun_is_byte_identical(self, tmp_path):
        run_gen(tmp_path)
        args = ["train", "--out-dir", str(tmp_path), "--alpha", "0.1", *FAST, *FAST_TRAIN]
        assert main(args) == 0
        first = digest(tmp_path / "f_alpha_0.1.mkhd")
        assert main(args) == 0
        assert digest(tmp_path / "f_alpha_0.1.mkhd") == first

    def test_missing_stores_fail(self, tmp_path, capsys):
        rc = main(["train", "--out-dir", str(tmp_path), "--alpha", "0"])
        assert rc != 0


class TestEval:
    @pytest.fixture
    def trained(self, tmp_path):
        run_gen(tmp_path)
        assert (
            main(["train", "--out-dir", str(tmp_path), "--alpha", "0", *FAST, *FAST_TRAIN])
            == 0
        )
        return tmp_path

    def test_writes_report_and_prints_table(self, trained, capsys):
        rc = main(["eval", "--out-dir", str(trained), "--alpha", "0", *FAST, *FAST_EVAL])
        assert rc == 0
        out = capsys.readouterr().out
        assert "benign accuracy" in out
        doc = json.loads((trained / "report_alpha_0.json").read_text())
        assert set(doc) == {
            "alpha",
            "benign_accuracy",
            "per_query_asr",
            "asr_multi",
            "independence_baseline",
            "gallery_size",
        }
        assert len(doc["per_query_asr"]) == 3

    def test_rerun_identical_json(self, trained):
        args = ["eval", "--out-dir", str(trained), "--alpha", "0", *FAST, *FAST_EVAL]
        assert main(args) == 0
        first = digest(trained / "report_alpha_0.json")
        assert main(args) == 0
        assert digest(trained / "report_alpha_0.json") == first

    def test_dimension_mismatch_diagnostic(self, trained, tmp_path, capsys):
        other = tmp_path / "other"
        other.mkdir()
        run_gen(other)
        # regenerate stores at a different dimension, keep the d=16 checkpoint
        rc = main(
            [
                "gen", "--out-dir", str(other), "--seed", "0",
                "--n-identities", "12", "--samples-per-identity", "8",
                "--n-test-identities", "8", "--test-samples-per-identity", "4",
                "--dim", "8",
            ]
        )
        assert rc == 0
        rc = main(
            [
                "eval", "--out-dir", str(other), "--alpha", "0",
                "--checkpoint", str(trained / "f_alpha_0.mkhd"),
                "--dim", "8", *FAST_EVAL,
            ]
        )
        assert rc != 0
        assert "d=16" in capsys.readouterr().err

    def test_benign_model_low_asr(self, tmp_path):
        # needs a converged benign model, so train longer than the FAST runs
        run_gen(tmp_path)
        rc = main(
            [
                "train", "--out-dir", str(tmp_path), "--alpha", "0",
                "--epochs", "40", "--k-train", "10", *FAST,
            ]
        )
        assert rc == 0
        rc = main(["eval", "--out-dir", str(tmp_path), "--alpha", "0", *FAST, *FAST_EVAL])
        assert rc == 0
        doc = json.loads((tmp_path / "report_alpha_0.json").read_text())
        assert all(v < 0.05 for v in doc["per_query_asr"])


class TestSweep:
    def test_four_row_csv_with_echoed_alphas(self, tmp_path):
        run_gen(tmp_path)
        rc = main(
            [
                "sweep", "--out-dir", str(tmp_path),
                "--sweep", "0,0.05,0.1,0.2",
                *FAST, *FAST_TRAIN, "--n-pairs", "40",
            ]
        )
        assert rc == 0
        with open(tmp_path / "sweep.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == [
            "alpha", "benign_acc", "asr_q1", "asr_q2", "asr_q3",
            "asr_multi", "indep_baseline",
        ]
        assert [r[0] for r in rows[1:]] == ["0", "0.05", "0.1", "0.2"]
        assert len(rows) == 5
        for name in ("f_alpha_0.05.mkhd", "report_alpha_0.2.json"):
            assert (tmp_path / name).exists()


class TestConfigFile:
    def test_round_trip_and_overrides(self, tmp_path):
        cfg = ExperimentConfig(seed=9, sigma=0.04, sweep=(0.0, 0.5))
        path = tmp_path / "cfg.json"
        save_config(cfg, path)
        loaded = load_config(path)
        assert loaded == cfg
        bumped = apply_overrides(loaded, seed=11, dimension=None)
        assert bumped.seed == 11
        assert bumped.dimension == cfg.dimension

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"bogus": 1}')
        with pytest.raises(ConfigError):
            load_config(path)

    def test_unsorted_sweep_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(sweep=(0.3, 0.1))
        with pytest.raises(ConfigError):
            ExperimentConfig(sweep=(0.1, 0.1))

    def test_config_flag_feeds_commands(self, tmp_path):
        cfg = ExperimentConfig(
            n_identities=12,
            samples_per_identity=8,
            n_test_identities=8,
            test_samples_per_identity=4,
            dimension=16,
            hidden=32,
            n_b=4,
            m_b=4,
            epochs=2,
            seed=3,
        )
        path = tmp_path / "cfg.json"
        save_config(cfg, path)
        rc = main(["gen", "--config", str(path), "--out-dir", str(tmp_path)])
        assert rc == 0
        from mklab.embeddings import load_embedding_store

        assert len(load_embedding_store(tmp_path / "train.embs")) == 96
