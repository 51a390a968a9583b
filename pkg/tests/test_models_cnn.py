import numpy as np
import pytest

from nidskit.dataset import LabelMap, one_hot
from nidskit.errors import DivergenceError
from nidskit.models import (
    ConvBlock,
    ConvNet,
    ConvNetClassifier,
    load_model,
    loss_and_gradients,
    save_model,
    train_network,
)
from nidskit.models.cnn import _maxpool_backward, _maxpool_forward


def tiny_net(seed=0, dropout=0.0):
    return ConvNet(
        [ConvBlock(2, 3, 2)], dense_units=4, dropout_rate=dropout,
        input_len=8, n_classes=3, seed=seed,
    )


def relative_error(a, b):
    # gradients below 1e-4 in magnitude are compared absolutely
    return abs(a - b) / max(abs(a), abs(b), 1e-4)


def max_gradient_error(net, X, Y, mask=None, h=1e-5):
    _, grads = loss_and_gradients(net, X, Y, mask)
    worst = 0.0
    for key, w in net.weights.items():
        flat = w.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp, _ = loss_and_gradients(net, X, Y, mask)
            flat[i] = orig - h
            lm, _ = loss_and_gradients(net, X, Y, mask)
            flat[i] = orig
            fd = (lp - lm) / (2 * h)
            worst = max(worst, relative_error(grads[key].ravel()[i], fd))
    return worst


class TestBuild:
    def test_flatten_size(self):
        net = ConvNet([ConvBlock(4, 3, 2)], 8, 0.0, input_len=16, n_classes=2, seed=0)
        assert net.flat_dim == 8 * 4
        assert net.weights["dense_w"].shape == (8, 32)

    def test_zero_input_zero_feature_maps(self):
        net = tiny_net()
        probs, cache = net.forward(np.zeros((2, 8)))
        block = cache["block"][0]
        assert (block["z"] == 0.0).all()

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            ConvBlock(4, 4, 2)

    def test_input_too_short_for_pooling(self):
        with pytest.raises(ValueError, match="too short"):
            ConvNet([ConvBlock(2, 3, 4), ConvBlock(2, 3, 4)], 4, 0.0, 8, 2, seed=0)

    def test_needs_conv_block(self):
        with pytest.raises(ValueError):
            ConvNet([], 4, 0.0, 8, 2, seed=0)

    def test_stacked_blocks_shapes(self):
        net = ConvNet(
            [ConvBlock(4, 3, 2), ConvBlock(6, 5, 2)], 8, 0.0, input_len=12, n_classes=2, seed=1
        )
        # 12 -> pool 2 -> 6 -> pool 2 -> 3; channels 6
        assert net.flat_dim == 18
        probs, _ = net.forward(np.zeros((3, 12)))
        assert probs.shape == (3, 2)


class TestForward:
    def test_zeroed_output_layer_uniform(self):
        net = tiny_net(seed=1)
        net.weights["out_w"][:] = 0.0
        net.weights["out_b"][:] = 0.0
        probs, _ = net.forward(np.random.default_rng(0).normal(size=(4, 8)))
        assert np.allclose(probs, 1.0 / 3.0)
        assert probs.argmax(axis=1).tolist() == [0, 0, 0, 0]

    def test_rows_sum_to_one(self):
        net = tiny_net(seed=2)
        probs, _ = net.forward(np.random.default_rng(1).normal(size=(6, 8)))
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        assert (probs > 0).all() and (probs < 1).all()

    def test_uniform_probability_loss_is_log_n(self):
        net = tiny_net(seed=3)
        for key in ("conv0_w", "conv0_b", "dense_w", "dense_b", "out_w", "out_b"):
            net.weights[key][:] = 0.0
        X = np.random.default_rng(2).normal(size=(5, 8))
        Y = one_hot(np.array([0, 1, 2, 0, 1]), 3)
        loss, _ = loss_and_gradients(net, X, Y)
        assert np.isclose(loss, np.log(3.0), atol=1e-6)


class TestGradients:
    def test_finite_difference_no_dropout(self):
        rng = np.random.default_rng(4)
        net = tiny_net(seed=4)
        X = rng.standard_normal((5, 8))
        Y = one_hot(rng.integers(0, 3, 5), 3)
        assert max_gradient_error(net, X, Y) < 1e-4

    def test_finite_difference_with_fixed_dropout_mask(self):
        rng = np.random.default_rng(5)
        net = tiny_net(seed=5, dropout=0.5)
        X = rng.standard_normal((4, 8))
        Y = one_hot(rng.integers(0, 3, 4), 3)
        mask = net.draw_dropout_mask(4, np.random.default_rng(99))
        assert max_gradient_error(net, X, Y, mask) < 1e-4

    def test_zero_weight_closed_form_output_bias(self):
        net = tiny_net(seed=6)
        for key in net.weights:
            net.weights[key][:] = 0.0
        X = np.random.default_rng(6).normal(size=(6, 8))
        labels = np.array([0, 0, 1, 1, 2, 2])
        Y = one_hot(labels, 3)
        _, grads = loss_and_gradients(net, X, Y)
        # softmax-CE identity: d(bias) = mean(softmax - target) = 1/3 - mean(Y)
        expected = np.full(3, 1.0 / 3.0) - Y.mean(axis=0)
        assert np.allclose(grads["out_b"], expected, atol=1e-12)

    def test_batch_duplication_invariance(self):
        rng = np.random.default_rng(7)
        net = tiny_net(seed=7)
        X = rng.standard_normal((3, 8))
        Y = one_hot(rng.integers(0, 3, 3), 3)
        loss1, grads1 = loss_and_gradients(net, X, Y)
        loss2, grads2 = loss_and_gradients(net, np.vstack([X, X]), np.vstack([Y, Y]))
        assert np.isclose(loss1, loss2, atol=1e-12)
        for key in grads1:
            assert np.allclose(grads1[key], grads2[key], atol=1e-12)


class TestMaxpool:
    def test_routing_preserves_gradient_mass(self):
        rng = np.random.default_rng(8)
        x = rng.permutation(24).reshape(1, 2, 12).astype(float)  # distinct values
        out, arg = _maxpool_forward(x, 3)
        dout = rng.standard_normal(out.shape)
        dx = _maxpool_backward(dout, arg, 3, 12)
        assert np.isclose(np.abs(dx).sum(), np.abs(dout).sum())
        # gradient lands only on argmax positions
        assert (dx != 0).sum() == dout.size

    def test_tie_takes_lowest_index(self):
        x = np.array([[[2.0, 2.0, 1.0, 5.0]]])
        out, arg = _maxpool_forward(x, 2)
        assert arg[0, 0].tolist() == [0, 1]


class TestTraining:
    @staticmethod
    def margin_threshold_dataset(seed=1, n=200, margin=0.04):
        """class = (feature mean > 0.5); rows near the boundary rejected so a
        single threshold is realizable from finite data."""
        rng = np.random.default_rng(seed)
        rows = []
        while len(rows) < n:
            x = rng.random(8)
            if abs(x.mean() - 0.5) > margin:
                rows.append(x)
        X = np.array(rows)
        return X, (X.mean(axis=1) > 0.5).astype(int)

    def test_threshold_dataset_reaches_95(self):
        from sklearn.linear_model import LogisticRegression

        X, y = self.margin_threshold_dataset()
        idx = np.random.default_rng(2).permutation(len(y))
        tr, va = idx[:160], idx[160:]
        # oracle: the task is linearly separable
        oracle = LogisticRegression(max_iter=2000).fit(X[tr], y[tr])
        assert oracle.score(X[va], y[va]) >= 0.95

        clf = ConvNetClassifier(
            conv_blocks=((4, 3, 2),), dense_units=16, dropout_rate=0.1,
            learning_rate=1e-2, batch_size=32, epochs=30, seed=0,
        )
        clf.fit(X[tr], y[tr], n_classes=2, validation=(X[va], y[va]))
        best = max(e["validation_accuracy"] for e in clf.history_["epochs"])
        assert best >= 0.95

    def test_zero_learning_rate_keeps_weights(self):
        rng = np.random.default_rng(9)
        net = tiny_net(seed=9)
        before = {k: w.copy() for k, w in net.weights.items()}
        train_network(net, rng.random((20, 8)), rng.integers(0, 3, 20),
                      learning_rate=0.0, batch_size=4, epochs=2, seed=0)
        for key, w in net.weights.items():
            assert (w == before[key]).all()

    def test_determinism(self):
        rng = np.random.default_rng(10)
        X = rng.random((40, 8))
        y = rng.integers(0, 2, 40)
        a = ConvNetClassifier(conv_blocks=((2, 3, 2),), epochs=5, seed=3).fit(X, y)
        b = ConvNetClassifier(conv_blocks=((2, 3, 2),), epochs=5, seed=3).fit(X, y)
        for key in a.net_.weights:
            assert (a.net_.weights[key] == b.net_.weights[key]).all()

    def test_divergence_raises(self):
        rng = np.random.default_rng(11)
        X = rng.random((30, 8)) * 1e3
        y = rng.integers(0, 2, 30)
        clf = ConvNetClassifier(conv_blocks=((2, 3, 2),), learning_rate=1e12,
                                epochs=10, seed=0)
        with pytest.raises(DivergenceError):
            clf.fit(X, y)

    def test_history_records(self):
        rng = np.random.default_rng(12)
        X = rng.random((30, 8))
        y = rng.integers(0, 2, 30)
        clf = ConvNetClassifier(conv_blocks=((2, 3, 2),), epochs=3, seed=1)
        clf.fit(X, y, validation=(X, y))
        assert len(clf.history_["epochs"]) == 3
        assert "validation_accuracy" in clf.history_["epochs"][0]
        assert clf.history_["final_train_loss"] == clf.history_["epochs"][-1]["train_loss"]


class TestPersistence:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(13)
        X = rng.random((30, 8))
        y = rng.integers(0, 3, 30)
        clf = ConvNetClassifier(conv_blocks=((2, 3, 2),), epochs=2, seed=5).fit(X, y)
        lm = LabelMap.from_names(["a", "b", "c"])
        path = tmp_path / "cnn.json"
        save_model(clf, lm, str(path))
        loaded, loaded_lm = load_model(str(path))
        assert loaded_lm == lm
        assert np.allclose(loaded.predict_proba(X), clf.predict_proba(X))
