import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from hyfuse.cli import main
from hyfuse.data import read_embedding_file
from hyfuse.models import load_checkpoint


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    """A small split-mode pair, fast to train on."""
    out = tmp_path_factory.mktemp("synth")
    code = run("synth", "--classes", "4", "--dim-a", "12", "--dim-b", "12",
               "--samples-per-class", "25", "--mode", "split", "--seed", "5",
               "--out", str(out))
    assert code == 0
    return out


class TestSynthCommand:
    def test_files_round_trip(self, synth_dir):
        eset = read_embedding_file(synth_dir / "synth-a.hyfe")
        assert eset.dim == 12
        assert len(eset) == 100
        assert eset.num_classes == 4

    def test_manifest_written(self, synth_dir):
        manifest = json.loads((synth_dir / "manifest.json").read_text())
        assert manifest["command"] == "synth"
        assert manifest["resolved_config"]["classes"] == 4
        assert "timing_seconds" in manifest

    def test_deterministic_output(self, tmp_path):
        for sub in ("one", "two"):
            assert run("synth", "--classes", "3", "--samples-per-class", "10",
                       "--seed", "3", "--out", str(tmp_path / sub)) == 0
        a = (tmp_path / "one" / "synth-a.hyfe").read_bytes()
        b = (tmp_path / "two" / "synth-a.hyfe").read_bytes()
        assert a == b


class TestInspect:
    def test_prints_header(self, synth_dir, capsys):
        assert run("inspect", str(synth_dir / "synth-a.hyfe")) == 0
        out = capsys.readouterr().out
        assert "dim: 12" in out
        assert "samples: 100" in out
        assert "family: RLR" in out

    def test_missing_file_exit_2(self, tmp_path, capsys):
        assert run("inspect", str(tmp_path / "nope.hyfe")) == 2
        assert "data error" in capsys.readouterr().err


class TestTrainCommand:
    def test_fusion_requires_rep_b(self, synth_dir, tmp_path, capsys):
        code = run("train", "--model", "hyfuse",
                   "--rep-a", str(synth_dir / "synth-a.hyfe"), "--out", str(tmp_path))
        assert code == 1
        assert "--rep-b" in capsys.readouterr().err

    def test_single_model_rejects_rep_b(self, synth_dir, tmp_path, capsys):
        code = run("train", "--model", "cnn",
                   "--rep-a", str(synth_dir / "synth-a.hyfe"),
                   "--rep-b", str(synth_dir / "synth-b.hyfe"), "--out", str(tmp_path))
        assert code == 1

    def test_unknown_flag_exit_1(self, synth_dir, tmp_path, capsys):
        code = run("train", "--model", "cnn", "--rep-a", str(synth_dir / "synth-a.hyfe"),
                   "--out", str(tmp_path), "--no-such-flag")
        assert code == 1

    def test_train_writes_artifacts(self, synth_dir, tmp_path):
        out = tmp_path / "run"
        code = run("train", "--model", "hyfuse",
                   "--rep-a", str(synth_dir / "synth-a.hyfe"),
                   "--rep-b", str(synth_dir / "synth-b.hyfe"),
                   "--out", str(out), "--epochs", "2", "--learning-rate", "1e-3",
                   "--conv-filters", "4,8", "--hidden-units", "16",
                   "--fusion-width", "8", "--seed", "0")
        assert code == 0
        assert (out / "model.ckpt").exists()
        assert (out / "report.json").exists()
        assert (out / "manifest.json").exists()
        spec, params = load_checkpoint(out / "model.ckpt")
        assert spec.kind == "hyfuse"
        assert spec.input_dims == (12, 12)
        report = json.loads((out / "report.json").read_text())
        assert report["epochs_run"] == 2
        assert 0.0 <= report["accuracy"] <= 1.0

    def test_manifest_digests_recomputable(self, synth_dir, tmp_path):
        out = tmp_path / "run"
        assert run("train", "--model", "fcn",
                   "--rep-a", str(synth_dir / "synth-a.hyfe"),
                   "--out", str(out), "--epochs", "1", "--hidden-units", "8") == 0
        manifest = json.loads((out / "manifest.json").read_text())
        for path, digest in manifest["input_digests"].items():
            actual = hashlib.sha256(open(path, "rb").read()).hexdigest()
            assert actual == digest


class TestConfigPrecedence:
    def test_flag_beats_config_beats_default(self, synth_dir, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"epochs": 3, "hidden_units": 8}))
        out = tmp_path / "run"
        assert run("train", "--model", "fcn", "--rep-a", str(synth_dir / "synth-a.hyfe"),
                   "--out", str(out), "--config", str(cfg_file), "--epochs", "1") == 0
        manifest = json.loads((out / "manifest.json").read_text())
        resolved = manifest["resolved_config"]
        assert resolved["epochs"] == 1          # flag wins
        assert resolved["hidden_units"] == 8    # config file beats default
        assert resolved["batch_size"] == 32     # default

    def test_unknown_config_key_exit_1(self, synth_dir, tmp_path, capsys):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"bogus": 1}))
        assert run("train", "--model", "fcn", "--rep-a", str(synth_dir / "synth-a.hyfe"),
                   "--out", str(tmp_path / "run"), "--config", str(cfg_file)) == 1


class TestCrossValidateCommand:
    def test_determinism_byte_identical_reports(self, synth_dir, tmp_path):
        outs = []
        for sub in ("r1", "r2"):
            out = tmp_path / sub
            code = run("cross-validate", "--model", "fcn",
                       "--rep-a", str(synth_dir / "synth-a.hyfe"),
                       "--out", str(out), "--folds", "3", "--seed", "7",
                       "--epochs", "2", "--hidden-units", "8", "--learning-rate", "1e-3")
            assert code == 0
            outs.append((out / "report.json").read_bytes())
        assert outs[0] == outs[1]

    def test_too_many_folds_exit_2(self, synth_dir, tmp_path, capsys):
        code = run("cross-validate", "--model", "fcn",
                   "--rep-a", str(synth_dir / "synth-a.hyfe"),
                   "--out", str(tmp_path), "--folds", "200")
        assert code == 2

    def test_aggregate_equals_fold_mean(self, synth_dir, tmp_path):
        out = tmp_path / "run"
        assert run("cross-validate", "--model", "fcn",
                   "--rep-a", str(synth_dir / "synth-a.hyfe"),
                   "--out", str(out), "--folds", "3", "--epochs", "1",
                   "--hidden-units", "8") == 0
        report = json.loads((out / "report.json").read_text())
        folds = [f["accuracy"] for f in report["folds"]]
        assert report["mean_accuracy"] == pytest.approx(np.mean(folds), abs=1e-12)


class TestExportFeatures:
    def test_exported_file_preserves_ids_and_labels(self, synth_dir, tmp_path):
        run_dir = tmp_path / "train"
        assert run("train", "--model", "cnn", "--rep-a", str(synth_dir / "synth-a.hyfe"),
                   "--out", str(run_dir), "--epochs", "1",
                   "--conv-filters", "3,5", "--hidden-units", "16") == 0
        feat_dir = tmp_path / "features"
        assert run("export-features", "--checkpoint", str(run_dir / "model.ckpt"),
                   "--rep-a", str(synth_dir / "synth-a.hyfe"), "--out", str(feat_dir)) == 0
        feats = read_embedding_file(feat_dir / "features.hyfe")
        source = read_embedding_file(synth_dir / "synth-a.hyfe")
        assert feats.dim == 16
        assert sorted(feats.ids) == sorted(source.ids)
        src_labels = dict(zip(source.ids, source.labels))
        assert all(src_labels[i] == l for i, l in zip(feats.ids, feats.labels))

    def test_dim_mismatch_exit_2(self, synth_dir, tmp_path):
        run_dir = tmp_path / "train"
        assert run("train", "--model", "fcn", "--rep-a", str(synth_dir / "synth-a.hyfe"),
                   "--out", str(run_dir), "--epochs", "1", "--hidden-units", "8") == 0
        wrong = tmp_path / "wrong"
        assert run("synth", "--classes", "4", "--dim-a", "9", "--dim-b", "9",
                   "--samples-per-class", "10", "--out", str(wrong)) == 0
        assert run("export-features", "--checkpoint", str(run_dir / "model.ckpt"),
                   "--rep-a", str(wrong / "synth-a.hyfe"), "--out", str(tmp_path / "f")) == 2


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("oracle")
    data = base / "data"
    assert run("synth", "--classes", "4", "--dim-a", "12", "--dim-b", "12",
               "--samples-per-class", "25", "--mode", "split", "--seed", "5",
               "--out", str(data)) == 0
    out = base / "run"
    assert run("train", "--model", "hyfuse",
               "--rep-a", str(data / "synth-a.hyfe"),
               "--rep-b", str(data / "synth-b.hyfe"),
               "--out", str(out), "--learning-rate", "1e-3",
               "--epochs", "15", "--patience", "0", "--seed", "0") == 0
    return data, out


class TestTrainedFusionOracles:
    """Desk-scale checks that the CLI pipeline actually learns the split task."""

    def test_split_mode_report_shows_fused_accuracy(self, trained_run):
        _, out = trained_run
        report = json.loads((out / "report.json").read_text())
        assert report["accuracy"] >= 0.90

    def test_exported_features_linearly_separable(self, trained_run, tmp_path):
        data, out = trained_run
        feat_dir = tmp_path / "feats"
        assert run("export-features", "--checkpoint", str(out / "model.ckpt"),
                   "--rep-a", str(data / "synth-a.hyfe"),
                   "--rep-b", str(data / "synth-b.hyfe"), "--out", str(feat_dir)) == 0
        feats = read_embedding_file(feat_dir / "features.hyfe")
        assert feats.dim == 128

        from test_synth import linear_probe_accuracy
        assert linear_probe_accuracy(feats.vectors, feats.labels, 4) >= 0.9


class TestPairMatrix:
    def test_one_by_one_matrix(self, tmp_path):
        data = tmp_path / "data"
        assert run("synth", "--classes", "3", "--dim-a", "10", "--dim-b", "10",
                   "--samples-per-class", "10", "--seed", "1", "--name-a", "repA",
                   "--name-b", "repB", "--out", str(data)) == 0
        out = tmp_path / "matrix"
        code = run("pair-matrix", "--data-dir", str(data), "--mode", "rlr+cbr",
                   "--out", str(out), "--folds", "2", "--epochs", "1",
                   "--conv-filters", "2,3", "--hidden-units", "4", "--fusion-width", "4")
        assert code == 0
        matrix = json.loads((out / "matrix.json").read_text())
        assert len(matrix["cells"]) == 2  # 1 pair x 2 methods
        methods = {c["method"] for c in matrix["cells"]}
        assert methods == {"concat", "hyfuse"}
        for cell in matrix["cells"]:
            assert cell["pair"] == ["repA", "repB"]
            assert "mean_accuracy" in cell and "mean_macro_f1" in cell
        assert (out / "summary.txt").read_text().startswith("best pair: repA + repB")

    def test_empty_dir_exit_2(self, tmp_path):
        (tmp_path / "empty").mkdir()
        assert run("pair-matrix", "--data-dir", str(tmp_path / "empty"),
                   "--mode", "rlr+cbr", "--out", str(tmp_path / "out")) == 2

    def test_parallel_jobs_give_identical_matrix(self, tmp_path):
        data = tmp_path / "data"
        for seed, (na, nb) in ((1, ("r1", "c1")), (2, ("r2", "c2"))):
            assert run("synth", "--classes", "3", "--dim-a", "8", "--dim-b", "8",
                       "--samples-per-class", "10", "--seed", str(seed),
                       "--name-a", na, "--name-b", nb, "--out", str(data)) == 0
        blobs = []
        for jobs in ("1", "2"):
            out = tmp_path / f"m{jobs}"
            assert run("pair-matrix", "--data-dir", str(data), "--mode", "rlr+cbr",
                       "--out", str(out), "--folds", "2", "--epochs", "1",
                       "--conv-filters", "2,3", "--hidden-units", "4",
                       "--fusion-width", "4", "--jobs", jobs, "--seed", "3") == 0
            blobs.append((out / "matrix.json").read_bytes())
        assert blobs[0] == blobs[1]


class TestConsoleEntryPoint:
    def test_subprocess_invocation(self, tmp_path):
        result = subprocess.run(
            [sys.executable, "-m", "hyfuse.cli", "synth", "--classes", "2",
             "--samples-per-class", "5", "--dim-a", "4", "--dim-b", "4",
             "--out", str(tmp_path)],
            capture_output=True, text=True)
        assert result.returncode == 0, result.stderr
        assert (tmp_path / "synth-a.hyfe").exists()
