"""Gaussian sampling and the linear-classifier comparison path."""

import numpy as np
import pytest

from fecam.baseline import (
    predict_linear,
    sample_from_gaussians,
    softmax_loss_and_grad,
    train_linear,
)
from fecam.classifier import FeCAMConfig, Mode, from_parameters
from fecam.errors import DataError
from fecam.transform import TukeyConfig

PLAIN = FeCAMConfig(mode=Mode.PER_CLASS, tukey=TukeyConfig(enabled=False))


def injected_model(means, covs):
    return from_parameters(np.asarray(means), covs, PLAIN)


class TestSampling:
    def test_near_zero_covariance_collapses_to_mean(self):
        mu = np.array([[2.0, -1.0]])
        model = injected_model(mu, [1e-18 * np.eye(2)])
        feats, labels = sample_from_gaussians(model, 50, seed=0)
        np.testing.assert_allclose(feats, np.tile(mu, (50, 1)), atol=1e-8)
        assert np.all(labels == 0)

    def test_law_of_large_numbers(self):
        model = injected_model([[0.0, 0.0]], [np.diag([1.0, 4.0])])
        feats, _ = sample_from_gaussians(model, 100_000, seed=1)
        np.testing.assert_allclose(feats.mean(axis=0), [0.0, 0.0], atol=0.02)
        np.testing.assert_allclose(
            feats.var(axis=0), [1.0, 4.0], rtol=0.02
        )

    def test_sample_count_sweep(self):
        model = injected_model(
            np.zeros((3, 4)), [np.eye(4)] * 3
        )
        for k in (10, 100, 1000, 5000):
            feats, labels = sample_from_gaussians(model, k, seed=2)
            assert feats.shape == (3 * k, 4)
            assert np.all(np.bincount(labels) == k)

    def test_reproducible_per_seed(self):
        model = injected_model(np.zeros((2, 3)), [np.eye(3)] * 2)
        a, _ = sample_from_gaussians(model, 20, seed=7)
        b, _ = sample_from_gaussians(model, 20, seed=7)
        c, _ = sample_from_gaussians(model, 20, seed=8)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_requires_per_class_mode(self):
        model = from_parameters(
            np.zeros((2, 3)), None, FeCAMConfig(mode=Mode.EUCLIDEAN, tukey=TukeyConfig(enabled=False))
        )
        with pytest.raises(DataError):
            sample_from_gaussians(model, 5, seed=0)


class TestTrainLinear:
    def test_separable_blobs_reach_perfect_training_accuracy(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((60, 2)) * 0.2 + [0.0, 0.0]
        b = rng.standard_normal((60, 2)) * 0.2 + [4.0, 4.0]
        x = np.vstack([a, b])
        y = np.repeat([0, 1], 60)
        clf = train_linear(x, y, epochs=300, learning_rate=0.5, seed=0)
        assert np.mean(predict_linear(clf, x) == y) == 1.0

    def test_gradient_matches_central_finite_differences(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((30, 5))
        y = rng.integers(0, 3, 30)
        onehot = np.zeros((30, 3))
        onehot[np.arange(30), y] = 1.0
        weights = rng.normal(0.0, 0.01, (3, 5))
        biases = np.zeros(3)
        _, grad_w, grad_b = softmax_loss_and_grad(weights, biases, x, onehot)

        h = 1e-6
        for idx in [(0, 0), (1, 3), (2, 4)]:
            wp, wm = weights.copy(), weights.copy()
            wp[idx] += h
            wm[idx] -= h
            lp, _, _ = softmax_loss_and_grad(wp, biases, x, onehot)
            lm, _, _ = softmax_loss_and_grad(wm, biases, x, onehot)
            numeric = (lp - lm) / (2 * h)
            assert abs(grad_w[idx] - numeric) <= 1e-5 * max(1.0, abs(numeric))
        for j in range(3):
            bp, bm = biases.copy(), biases.copy()
            bp[j] += h
            bm[j] -= h
            lp, _, _ = softmax_loss_and_grad(weights, bp, x, onehot)
            lm, _, _ = softmax_loss_and_grad(weights, bm, x, onehot)
            numeric = (lp - lm) / (2 * h)
            assert abs(grad_b[j] - numeric) <= 1e-5 * max(1.0, abs(numeric))

    def test_deterministic_given_seed_and_schedule(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((80, 4))
        y = rng.integers(0, 4, 80)
        a = train_linear(x, y, epochs=50, learning_rate=0.2, seed=11)
        b = train_linear(x, y, epochs=50, learning_rate=0.2, seed=11)
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.biases, b.biases)
        c = train_linear(x, y, epochs=50, learning_rate=0.2, seed=12)
        assert not np.array_equal(a.weights, c.weights)

    def test_more_epochs_do_not_raise_the_loss(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((100, 3))
        y = (x[:, 0] + x[:, 1] > 0).astype(int)
        onehot = np.zeros((100, 2))
        onehot[np.arange(100), y] = 1.0

        def final_loss(epochs):
            clf = train_linear(x, y, epochs=epochs, learning_rate=0.5, seed=0)
            loss, _, _ = softmax_loss_and_grad(clf.weights, clf.biases, x, onehot)
            return loss

        losses = [final_loss(e) for e in (10, 50, 200)]
        assert losses[1] <= losses[0] + 1e-6
        assert losses[2] <= losses[1] + 1e-6

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            train_linear(np.ones((5, 2)), np.zeros(5, dtype=int))


class TestPredictLinear:
    def test_zero_parameters_tie_break_to_first_class(self):
        from fecam.baseline import LinearClassifier

        clf = LinearClassifier((0, 1, 2), np.zeros((3, 4)), np.zeros(3), 0, 0)
        labels = predict_linear(clf, np.random.default_rng(7).standard_normal((10, 4)))
        assert np.all(labels == 0)

    def test_hand_set_half_planes(self):
        from fecam.baseline import LinearClassifier

        clf = LinearClassifier(
            (0, 1), np.array([[1.0, 0.0], [-1.0, 0.0]]), np.zeros(2), 0, 0
        )
        labels = predict_linear(clf, np.array([[2.0, 5.0], [-2.0, 5.0]]))
        np.testing.assert_array_equal(labels, [0, 1])

    def test_matches_score_enumeration_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(5):
            n_classes, d = int(rng.integers(2, 6)), int(rng.integers(2, 7))
            from fecam.baseline import LinearClassifier

            clf = LinearClassifier(
                tuple(range(n_classes)),
                rng.standard_normal((n_classes, d)),
                rng.standard_normal(n_classes),
                0, 0,
            )
            q = rng.standard_normal((50, d))
            got = predict_linear(clf, q)
            for i in range(50):
                scores = clf.weights @ q[i] + clf.biases
                assert got[i] == int(np.argmax(scores))

    def test_decision_invariant_along_weight_difference_null_space(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((80, 3)) + [2.0, 0.0, 0.0]
        b = rng.standard_normal((80, 3)) - [2.0, 0.0, 0.0]
        x = np.vstack([a, b])
        y = np.repeat([0, 1], 80)
        clf = train_linear(x, y, epochs=200, learning_rate=0.5, seed=0)
        diff = clf.weights[0] - clf.weights[1]
        # an orthonormal basis of the null space of the difference row
        basis = np.linalg.svd(diff[None, :])[2][1:]
        q = rng.standard_normal((20, 3))
        base_labels = predict_linear(clf, q)
        for v in basis:
            for step in (-50.0, 5.0, 50.0):
                moved = predict_linear(clf, q + step * v)
                np.testing.assert_array_equal(moved, base_labels)

    def test_dimension_mismatch_rejected(self):
        from fecam.baseline import LinearClassifier

        clf = LinearClassifier((0, 1), np.zeros((2, 3)), np.zeros(2), 0, 0)
        with pytest.raises(DataError):
            predict_linear(clf, np.zeros((4, 5)))
