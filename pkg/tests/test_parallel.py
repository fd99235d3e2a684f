"""Worker-count resolution and query-chunked scoring equivalence."""

import numpy as np
import pytest

from fecam import parallel
from fecam.classifier import FeCAMConfig, FeCAMModel, Mode, fit_task, predict_labels
from fecam.errors import DataError
from fecam.harness import SynthSpec, synth_generate
from fecam.transform import TukeyConfig


class TestResolveThreads:
    def test_unset_is_single_threaded(self, monkeypatch):
        monkeypatch.delenv(parallel.ENV_VAR, raising=False)
        assert parallel.resolve_threads() == 1

    def test_zero_means_cpu_count(self, monkeypatch):
        monkeypatch.setenv(parallel.ENV_VAR, "0")
        import os

        assert parallel.resolve_threads() == (os.cpu_count() or 1)

    def test_explicit_cap(self, monkeypatch):
        monkeypatch.setenv(parallel.ENV_VAR, "3")
        assert parallel.resolve_threads() == 3

    def test_garbage_rejected(self, monkeypatch):
        monkeypatch.setenv(parallel.ENV_VAR, "many")
        with pytest.raises(DataError):
            parallel.resolve_threads()
        monkeypatch.setenv(parallel.ENV_VAR, "-2")
        with pytest.raises(DataError):
            parallel.resolve_threads()


def test_chunked_scoring_matches_single_thread(monkeypatch):
    x, y, _ = synth_generate(
        SynthSpec(classes=5, dim=6, rows_per_class=80, mean_spread=4.0, seed=40)
    )
    cfg = FeCAMConfig(mode=Mode.PER_CLASS, tukey=TukeyConfig(enabled=False))
    model = fit_task(FeCAMModel.initial(cfg), x, y)
    rng = np.random.default_rng(41)
    queries = rng.standard_normal((4096, 6)) * 4

    monkeypatch.delenv(parallel.ENV_VAR, raising=False)
    single = predict_labels(model, queries)
    monkeypatch.setenv(parallel.ENV_VAR, "2")
    chunked = predict_labels(model, queries)
    np.testing.assert_array_equal(single, chunked)
