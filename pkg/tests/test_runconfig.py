"""Flat config parsing, override precedence, and reproducibility from echo."""

import numpy as np
import pytest

from fecam import runconfig
from fecam.classifier import Mode, TransformOrder
from fecam.errors import DataError, FormatError
from fecam.harness import ProtocolKind
from fecam.transform import NegativePolicy


class TestParsing:
    def test_file_with_comments_and_blanks(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# heterogeneous run\n"
            "mode = common\n"
            "\n"
            "gamma1 = 100  # few-shot scale\n"
            "tukey.enabled=false\n"
        )
        values = runconfig.parse_config_file(path)
        assert values == {
            "mode": "common",
            "gamma1": "100",
            "tukey.enabled": "false",
        }

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("gamma3 = 4\n")
        with pytest.raises(FormatError, match="gamma3"):
            runconfig.parse_config_file(path)

    def test_non_assignment_line_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("just some words\n")
        with pytest.raises(FormatError):
            runconfig.parse_config_file(path)


class TestPrecedence:
    def test_overrides_beat_file_beats_defaults(self):
        merged = runconfig.effective_config(
            {"gamma1": "5", "mode": "diagonal"}, {"gamma1": "7"}
        )
        assert merged["gamma1"] == "7"
        assert merged["mode"] == "diagonal"
        assert merged["tukey.lambda"] == "0.5"  # default survives

    def test_unknown_override_rejected(self):
        with pytest.raises(DataError):
            runconfig.effective_config(None, {"bogus": "1"})


class TestMaterialization:
    def test_fecam_config_fields(self):
        values = runconfig.effective_config(overrides={
            "mode": "common",
            "tukey.lambda": "0",
            "tukey.negative_policy": "bypass",
            "gamma1": "100",
            "gamma2": "100",
            "prototype.transform_order": "mean-of-transformed",
            "covariance.unbiased": "true",
            "scoring.logdet_correction": "true",
        })
        cfg = runconfig.to_fecam_config(values)
        assert cfg.mode is Mode.COMMON
        assert cfg.tukey.lam == 0.0
        assert cfg.tukey.negative_policy is NegativePolicy.BYPASS
        assert cfg.gamma1 == 100.0
        assert cfg.transform_order is TransformOrder.MEAN_OF_TRANSFORMED
        assert cfg.unbiased_covariance
        assert cfg.logdet_correction

    def test_protocol_config_fields(self):
        values = runconfig.effective_config(overrides={
            "protocol.kind": "dil",
            "protocol.domain_order": "2,0,1",
            "seed": "9",
        })
        pc = runconfig.to_protocol_config(values)
        assert pc.kind is ProtocolKind.DIL
        assert pc.domain_order == (2, 0, 1)
        assert pc.seed == 9

    def test_bad_enum_value_lists_options(self):
        values = runconfig.effective_config(overrides={"mode": "sideways"})
        with pytest.raises(DataError, match="per_class"):
            runconfig.to_fecam_config(values)


class TestEchoReproducibility:
    def test_report_rerun_from_its_own_echo_is_identical(self):
        from fecam.harness import (
            ProtocolConfig,
            SynthSpec,
            build_splits,
            run_protocol,
            sample_from_params,
            synth_generate,
        )

        x, y, tp = synth_generate(
            SynthSpec(classes=6, dim=4, rows_per_class=40, mean_spread=4.0, seed=21)
        )
        xt, yt = sample_from_params(tp, 20, 22)
        values = runconfig.effective_config(overrides={
            "mode": "per_class",
            "tukey.enabled": "false",
            "protocol.kind": "mscil",
            "protocol.initial_classes": "3",
            "protocol.tasks": "1",
            "protocol.classes_per_task": "3",
            "seed": "5",
        })

        def run(vals):
            stream = build_splits(y, runconfig.to_protocol_config(vals))
            report, _ = run_protocol(
                stream, x, y, xt, yt, runconfig.to_fecam_config(vals),
                config_echo=vals,
            )
            return report

        first = run(values)
        again = run(runconfig.effective_config(overrides=first.config_echo))
        assert first.per_task_accuracy == again.per_task_accuracy
        assert first.per_class_accuracy == again.per_class_accuracy
        assert first.config_echo == again.config_echo
