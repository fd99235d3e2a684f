"""Command-line behavior: subcommands, determinism, exit codes."""

import numpy as np
import pytest

from fecam.cli import cli_main
from fecam.embeddings import read_embeddings


@pytest.fixture
def train_file(tmp_path):
    path = tmp_path / "train.femb"
    code = cli_main([
        "synth", "--classes", "6", "--dim", "8", "--rows-per-class", "60",
        "--mean-spread", "4", "--aniso-after", "3", "--seed", "7",
        "--out", str(path),
    ])
    assert code == 0
    return path


class TestSynth:
    def test_same_seed_same_bytes(self, tmp_path):
        a, b = tmp_path / "a.femb", tmp_path / "b.femb"
        for out in (a, b):
            assert cli_main([
                "synth", "--classes", "20", "--dim", "16", "--seed", "7",
                "--rows-per-class", "10", "--out", str(out),
            ]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_different_seed_differs(self, tmp_path):
        a, b = tmp_path / "a.femb", tmp_path / "b.femb"
        cli_main(["synth", "--classes", "4", "--dim", "4", "--seed", "1",
                  "--rows-per-class", "10", "--out", str(a)])
        cli_main(["synth", "--classes", "4", "--dim", "4", "--seed", "2",
                  "--rows-per-class", "10", "--out", str(b)])
        assert a.read_bytes() != b.read_bytes()

    def test_csv_flag_writes_parseable_twin(self, tmp_path):
        bin_path, csv_path = tmp_path / "x.femb", tmp_path / "x.csv"
        args = ["synth", "--classes", "3", "--dim", "4", "--seed", "3",
                "--rows-per-class", "5"]
        cli_main(args + ["--out", str(bin_path)])
        cli_main(args + ["--csv", "--out", str(csv_path)])
        bf, bl, bd = read_embeddings(bin_path)
        cf, cl, cd = read_embeddings(csv_path)
        np.testing.assert_array_equal(bf, cf)
        np.testing.assert_array_equal(bl, cl)

    def test_shift_makes_features_nonnegative(self, tmp_path):
        path = tmp_path / "pos.femb"
        cli_main(["synth", "--classes", "3", "--dim", "4", "--seed", "4",
                  "--rows-per-class", "20", "--mean-spread", "2",
                  "--shift", "50", "--out", str(path)])
        features, _, _ = read_embeddings(path)
        assert features.min() >= 0


class TestFitEval:
    def test_fit_then_eval(self, tmp_path, train_file, capsys):
        model = tmp_path / "m.fecm"
        assert cli_main([
            "fit", "--input", str(train_file), "--out", str(model),
            "--mode", "per_class", "--tukey-enabled", "false",
        ]) == 0
        assert cli_main([
            "eval", "--model", str(model), "--input", str(train_file),
            "--tukey-enabled", "false",
        ]) == 0
        out = capsys.readouterr().out
        accuracy = float(
            [ln for ln in out.splitlines() if ln.startswith("accuracy=")][-1]
            .split("=")[1]
        )
        assert accuracy > 0.8

    def test_train_accuracy_at_least_heldout(self, tmp_path, train_file, capsys):
        test_file = tmp_path / "test.femb"
        cli_main(["synth", "--classes", "6", "--dim", "8", "--rows-per-class", "60",
                  "--mean-spread", "4", "--aniso-after", "3", "--seed", "8",
                  "--out", str(test_file)])
        model = tmp_path / "m.fecm"
        cli_main(["fit", "--input", str(train_file), "--out", str(model),
                  "--tukey-enabled", "false"])

        def accuracy_of(data):
            assert cli_main(["eval", "--model", str(model), "--input", str(data),
                             "--tukey-enabled", "false"]) == 0
            out = capsys.readouterr().out
            return float(out.split("accuracy=")[1].strip())

        train_acc = accuracy_of(train_file)
        heldout_acc = accuracy_of(test_file)
        assert train_acc >= heldout_acc

    def test_config_file_with_cli_override(self, tmp_path, train_file, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("mode=euclidean\ntukey.enabled=false\n")
        model = tmp_path / "m.fecm"
        assert cli_main([
            "fit", "--input", str(train_file), "--out", str(model),
            "--config", str(cfg), "--mode", "diagonal",
        ]) == 0
        out = capsys.readouterr().out
        # diagonal stores variances: prototypes + variances, not triangles
        total = int(out.split("storage.total_bytes=")[1].splitlines()[0])
        assert total == 6 * 8 * 4 * 2


class TestRunProtocol:
    def test_report_and_csv(self, tmp_path, train_file, capsys):
        test_file = tmp_path / "test.femb"
        cli_main(["synth", "--classes", "6", "--dim", "8", "--rows-per-class", "30",
                  "--mean-spread", "4", "--aniso-after", "3", "--seed", "9",
                  "--out", str(test_file)])
        csv_path = tmp_path / "table.csv"
        assert cli_main([
            "run-protocol", "--train", str(train_file), "--test", str(test_file),
            "--kind", "mscil", "--initial-classes", "3", "--tasks", "1",
            "--classes-per-task", "3", "--mode", "per_class",
            "--gamma1", "1", "--gamma2", "1", "--tukey-enabled", "false",
        ]) == 0
        out = capsys.readouterr().out
        assert "avg_incremental_accuracy=" in out
        assert "config.gamma1=1" in out
        assert cli_main([
            "run-protocol", "--train", str(train_file), "--test", str(test_file),
            "--kind", "mscil", "--initial-classes", "3", "--tasks", "1",
            "--classes-per-task", "3", "--tukey-enabled", "false",
            "--csv", str(csv_path),
        ]) == 0
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "task,accuracy,wall_clock_s"
        assert len(lines) == 3


class TestBaselineLinear:
    def test_prints_both_accuracies(self, tmp_path, train_file, capsys):
        assert cli_main([
            "baseline-linear", "--train", str(train_file), "--test", str(train_file),
            "--samples-per-class", "20", "--epochs", "40",
            "--tukey-enabled", "false", "--seed", "0",
        ]) == 0
        out = capsys.readouterr().out
        assert "linear.accuracy=" in out
        assert "fecam.accuracy=" in out


class TestDiag:
    def test_profiles_and_storage(self, tmp_path, train_file, capsys):
        model = tmp_path / "m.fecm"
        cli_main(["fit", "--input", str(train_file), "--out", str(model),
                  "--tukey-enabled", "false"])
        capsys.readouterr()
        assert cli_main([
            "diag", "--input", str(train_file), "--model", str(model), "--top", "3",
        ]) == 0
        out = capsys.readouterr().out
        assert "class0.anisotropy_ratio=" in out
        assert "storage.total_bytes=" in out
        # anisotropic classes (ids >= 3) report visibly larger ratios
        ratios = {
            int(ln.split(".")[0][5:]): float(ln.split("=")[1])
            for ln in out.splitlines()
            if ".anisotropy_ratio=" in ln
        }
        assert min(ratios[c] for c in (3, 4, 5)) > max(ratios[c] for c in (0, 1, 2))


class TestExitCodes:
    def test_usage_error_is_two(self):
        assert cli_main(["fit"]) == 2
        assert cli_main(["no-such-command"]) == 2

    def test_runtime_error_is_one(self, tmp_path):
        assert cli_main([
            "eval", "--model", str(tmp_path / "missing.fecm"),
            "--input", str(tmp_path / "missing.femb"),
        ]) == 1

    def test_infeasible_protocol_is_one(self, tmp_path, train_file):
        assert cli_main([
            "run-protocol", "--train", str(train_file), "--test", str(train_file),
            "--kind", "mscil", "--initial-classes", "50", "--tasks", "5",
            "--classes-per-task", "10", "--tukey-enabled", "false",
        ]) == 1
