"""Small 1-D convolutional network with analytic gradients.

Architecture per conv block: conv1d (stride 1, zero "same" padding, ReLU)
followed by non-overlapping max pooling; then flatten, a ReLU dense layer,
inverted dropout, and a softmax output layer. Training is minibatch Adam on
categorical cross-entropy. Everything is plain numpy so gradients can be
checked against finite differences.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from ..dataset import one_hot
from ..errors import DivergenceError
from ..validation import as_float_2d, as_int_labels, check_consistent_rows, check_finite

__all__ = ["ConvBlock", "ConvNet", "loss_and_gradients", "train_network", "ConvNetClassifier"]

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


@dataclass(frozen=True)
class ConvBlock:
    n_filters: int
    kernel_size: int
    pool_size: int

    def __post_init__(self):
        if self.n_filters < 1:
            raise ValueError("n_filters must be >= 1")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")


def _conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Same-padded stride-1 convolution; x (B,C,L), w (F,C,K) -> (B,F,L)."""
    k = w.shape[2]
    pad = (k - 1) // 2
    length = x.shape[2]
    x_pad = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    out = np.zeros((x.shape[0], w.shape[0], length))
    for j in range(k):
        out += np.einsum("fc,bcl->bfl", w[:, :, j], x_pad[:, :, j : j + length])
    return out + b[None, :, None]


def _conv1d_backward(x: np.ndarray, w: np.ndarray, dout: np.ndarray):
    k = w.shape[2]
    pad = (k - 1) // 2
    length = x.shape[2]
    x_pad = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    dw = np.zeros_like(w)
    dx_pad = np.zeros_like(x_pad)
    for j in range(k):
        dw[:, :, j] = np.einsum("bfl,bcl->fc", dout, x_pad[:, :, j : j + length])
        dx_pad[:, :, j : j + length] += np.einsum("bfl,fc->bcl", dout, w[:, :, j])
    db = dout.sum(axis=(0, 2))
    dx = dx_pad[:, :, pad : pad + length] if pad else dx_pad
    return dw, db, dx


def _maxpool_forward(x: np.ndarray, pool: int):
    """Non-overlapping max pooling; remainder positions are dropped.

    Ties take the lowest index within the window.
    """
    b, c, length = x.shape
    out_len = length // pool
    windows = x[:, :, : out_len * pool].reshape(b, c, out_len, pool)
    arg = windows.argmax(axis=3)
    out = np.take_along_axis(windows, arg[..., None], axis=3)[..., 0]
    return out, arg


def _maxpool_backward(dout: np.ndarray, arg: np.ndarray, pool: int, length: int):
    b, c, out_len = dout.shape
    dwindows = np.zeros((b, c, out_len, pool))
    np.put_along_axis(dwindows, arg[..., None], dout[..., None], axis=3)
    dx = np.zeros((b, c, length))
    dx[:, :, : out_len * pool] = dwindows.reshape(b, c, out_len * pool)
    return dx


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class ConvNet:
    """Weight container plus forward pass for the fixed layer stack.

    Weights are He-uniform initialized from the seeded generator in a fixed
    order (conv blocks, hidden dense, output dense); biases start at zero.
    """

    def __init__(
        self,
        conv_blocks: list[ConvBlock],
        dense_units: int,
        dropout_rate: float,
        input_len: int,
        n_classes: int,
        seed: int = 0,
    ):
        if not conv_blocks:
            raise ValueError("at least one conv block is required")
        blocks = [b if isinstance(b, ConvBlock) else ConvBlock(*b) for b in conv_blocks]
        if dense_units < 1:
            raise ValueError("dense_units must be >= 1")
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0,1)")
        pool_product = int(np.prod([b.pool_size for b in blocks]))
        if input_len < pool_product:
            raise ValueError(
                f"input_len {input_len} too short for pooling chain (needs >= {pool_product})"
            )

        self.conv_blocks = blocks
        self.dense_units = dense_units
        self.dropout_rate = dropout_rate
        self.input_len = input_len
        self.n_classes = n_classes

        rng = np.random.default_rng(seed)
        self.weights: dict[str, np.ndarray] = {}
        channels = 1
        length = input_len
        for i, blk in enumerate(blocks):
            fan_in = channels * blk.kernel_size
            limit = np.sqrt(6.0 / fan_in)
            self.weights[f"conv{i}_w"] = rng.uniform(
                -limit, limit, size=(blk.n_filters, channels, blk.kernel_size)
            )
            self.weights[f"conv{i}_b"] = np.zeros(blk.n_filters)
            channels = blk.n_filters
            length //= blk.pool_size
        self.flat_dim = channels * length
        limit = np.sqrt(6.0 / self.flat_dim)
        self.weights["dense_w"] = rng.uniform(-limit, limit, size=(dense_units, self.flat_dim))
        self.weights["dense_b"] = np.zeros(dense_units)
        limit = np.sqrt(6.0 / dense_units)
        self.weights["out_w"] = rng.uniform(-limit, limit, size=(n_classes, dense_units))
        self.weights["out_b"] = np.zeros(n_classes)

    def forward(self, X: np.ndarray, dropout_mask: np.ndarray | None = None):
        """Return (probabilities, cache). Dropout applies only when a mask
        is given; inference passes None."""
        X = as_float_2d(X)
        if X.shape[1] != self.input_len:
            raise ValueError(f"input length {X.shape[1]}, model expects {self.input_len}")
        cache: dict = {"block": []}
        x = X[:, None, :]
        for i, blk in enumerate(self.conv_blocks):
            z = _conv1d_forward(x, self.weights[f"conv{i}_w"], self.weights[f"conv{i}_b"])
            a = np.maximum(z, 0.0)
            pooled, arg = _maxpool_forward(a, blk.pool_size)
            cache["block"].append({"x": x, "z": z, "a_len": a.shape[2], "arg": arg})
            x = pooled
        cache["pre_flat_shape"] = x.shape
        flat = x.reshape(x.shape[0], -1)
        z1 = flat @ self.weights["dense_w"].T + self.weights["dense_b"]
        h = np.maximum(z1, 0.0)
        if dropout_mask is not None:
            h_drop = h * dropout_mask
        else:
            h_drop = h
        logits = h_drop @ self.weights["out_w"].T + self.weights["out_b"]
        probs = _softmax(logits)
        cache.update(flat=flat, z1=z1, h_drop=h_drop, mask=dropout_mask, probs=probs)
        return probs, cache

    def draw_dropout_mask(self, batch_size: int, rng: np.random.Generator) -> np.ndarray | None:
        if self.dropout_rate == 0.0:
            return None
        keep = 1.0 - self.dropout_rate
        return (rng.random((batch_size, self.dense_units)) < keep) / keep

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        probs, _ = self.forward(X)
        return probs


def loss_and_gradients(
    net: ConvNet, X, Y_onehot, dropout_mask: np.ndarray | None = None
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and gradients for every weight.

    Pass a fixed mask to exercise dropout deterministically (finite-difference
    checks); None disables dropout.
    """
    X = as_float_2d(X)
    Y = np.asarray(Y_onehot, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("batch is empty")
    if Y.shape != (X.shape[0], net.n_classes):
        raise ValueError(f"one-hot labels must have shape {(X.shape[0], net.n_classes)}")

    probs, cache = net.forward(X, dropout_mask)
    batch = X.shape[0]
    # true cross-entropy: underflow of a true-class probability to 0 makes the
    # loss infinite, which the training loop reports as divergence
    with np.errstate(divide="ignore", invalid="ignore"):
        log_probs = np.log(probs)
    loss = float(-(Y * np.where(Y > 0, log_probs, 0.0)).sum() / batch)

    grads: dict[str, np.ndarray] = {}
    dlogits = (probs - Y) / batch
    grads["out_w"] = dlogits.T @ cache["h_drop"]
    grads["out_b"] = dlogits.sum(axis=0)
    dh_drop = dlogits @ net.weights["out_w"]
    dh = dh_drop * cache["mask"] if cache["mask"] is not None else dh_drop
    dz1 = dh * (cache["z1"] > 0)
    grads["dense_w"] = dz1.T @ cache["flat"]
    grads["dense_b"] = dz1.sum(axis=0)
    dflat = dz1 @ net.weights["dense_w"]
    dx = dflat.reshape(cache["pre_flat_shape"])

    for i in reversed(range(len(net.conv_blocks))):
        blk = net.conv_blocks[i]
        block_cache = cache["block"][i]
        da = _maxpool_backward(dx, block_cache["arg"], blk.pool_size, block_cache["a_len"])
        dz = da * (block_cache["z"] > 0)
        dw, db, dx = _conv1d_backward(block_cache["x"], net.weights[f"conv{i}_w"], dz)
        grads[f"conv{i}_w"] = dw
        grads[f"conv{i}_b"] = db
    return loss, grads


def train_network(
    net: ConvNet,
    X,
    y,
    X_val=None,
    y_val=None,
    learning_rate: float = 1e-2,
    batch_size: int = 32,
    epochs: int = 10,
    seed: int = 0,
) -> dict:
    """Adam training loop; returns a JSON-ready history.

    Deterministic given the seed: the per-epoch shuffle and the dropout masks
    all come from one seeded generator. Raises DivergenceError on a
    non-finite loss.
    """
    X = as_float_2d(X)
    y = as_int_labels(y, "y")
    check_consistent_rows(X, y)
    if learning_rate < 0:
        raise ValueError("learning_rate must be >= 0")
    if batch_size < 1 or epochs < 1:
        raise ValueError("batch_size and epochs must be >= 1")
    Y = one_hot(y, net.n_classes)

    rng = np.random.default_rng(seed)
    m = {k: np.zeros_like(v) for k, v in net.weights.items()}
    v = {k: np.zeros_like(w) for k, w in net.weights.items()}
    step = 0
    start = time.perf_counter()
    history: list[dict] = []
    final_loss = float("nan")

    for epoch in range(epochs):
        perm = rng.permutation(X.shape[0])
        epoch_loss = 0.0
        for lo in range(0, X.shape[0], batch_size):
            idx = perm[lo : lo + batch_size]
            mask = net.draw_dropout_mask(idx.size, rng)
            loss, grads = loss_and_gradients(net, X[idx], Y[idx], mask)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, batch offset {lo}; "
                    "reduce the learning rate"
                )
            epoch_loss += loss * idx.size
            step += 1
            for key, g in grads.items():
                m[key] = _ADAM_BETA1 * m[key] + (1 - _ADAM_BETA1) * g
                v[key] = _ADAM_BETA2 * v[key] + (1 - _ADAM_BETA2) * g * g
                m_hat = m[key] / (1 - _ADAM_BETA1**step)
                v_hat = v[key] / (1 - _ADAM_BETA2**step)
                net.weights[key] -= learning_rate * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
        final_loss = epoch_loss / X.shape[0]
        record = {"epoch": epoch, "train_loss": final_loss}
        if X_val is not None and y_val is not None and len(y_val):
            preds = net.predict_proba(as_float_2d(X_val)).argmax(axis=1)
            record["validation_accuracy"] = float(
                (preds == as_int_labels(y_val, "y_val")).mean()
            )
        history.append(record)

    return {
        "epochs": history,
        "final_train_loss": final_loss,
        "train_seconds": time.perf_counter() - start,
    }


class ConvNetClassifier(BaseEstimator, ClassifierMixin):
    """Sklearn-style front end: build on fit, train with Adam, predict."""

    def __init__(
        self,
        conv_blocks: tuple = ((8, 3, 2),),
        dense_units: int = 32,
        dropout_rate: float = 0.1,
        learning_rate: float = 1e-2,
        batch_size: int = 32,
        epochs: int = 30,
        seed: int = 0,
    ):
        self.conv_blocks = conv_blocks
        self.dense_units = dense_units
        self.dropout_rate = dropout_rate
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed

    def fit(self, X, y, n_classes: int | None = None, validation=None):
        X = as_float_2d(X)
        y = as_int_labels(y, "y")
        check_consistent_rows(X, y)
        check_finite(X, "X")
        n_classes = n_classes if n_classes is not None else int(y.max()) + 1
        self.net_ = ConvNet(
            [ConvBlock(*b) if not isinstance(b, ConvBlock) else b for b in self.conv_blocks],
            self.dense_units,
            self.dropout_rate,
            input_len=X.shape[1],
            n_classes=n_classes,
            seed=self.seed,
        )
        X_val, y_val = validation if validation is not None else (None, None)
        self.history_ = train_network(
            self.net_,
            X,
            y,
            X_val,
            y_val,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
        )
        self.n_classes_ = n_classes
        self.classes_ = np.arange(n_classes)
        self.n_features_in_ = X.shape[1]
        self.train_seconds_ = self.history_["train_seconds"]
        self.final_train_loss_ = self.history_["final_train_loss"]
        return self

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        return self.net_.predict_proba(as_float_2d(X))

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    def _check_fitted(self):
        if not hasattr(self, "net_"):
            raise NotFittedError("ConvNetClassifier is not fitted")

    def weights_to_dict(self) -> dict:
        self._check_fitted()
        return {
            "architecture": {
                "conv_blocks": [
                    [b.n_filters, b.kernel_size, b.pool_size] for b in self.net_.conv_blocks
                ],
                "dense_units": self.net_.dense_units,
                "dropout_rate": self.net_.dropout_rate,
                "input_len": self.net_.input_len,
                "n_classes": self.net_.n_classes,
            },
            "weights": {k: w.tolist() for k, w in self.net_.weights.items()},
        }

    def weights_from_dict(self, d: dict) -> "ConvNetClassifier":
        arch = d["architecture"]
        net = ConvNet(
            [ConvBlock(*b) for b in arch["conv_blocks"]],
            arch["dense_units"],
            arch["dropout_rate"],
            arch["input_len"],
            arch["n_classes"],
        )
        for key, value in d["weights"].items():
            net.weights[key] = np.asarray(value, dtype=np.float64)
        self.net_ = net
        self.n_classes_ = arch["n_classes"]
        self.classes_ = np.arange(self.n_classes_)
        self.n_features_in_ = arch["input_len"]
        self.train_seconds_ = 0.0
        return self
