"""A small dense evidential classifier trained by plain backprop.

The network maps features through ReLU hidden layers to one logit per
class and converts logits to Dirichlet concentrations with
alpha = softplus(logit) + 1, so alpha > 1 always.  Training minimizes the
batch mean of :func:`iedl.loss.total_loss`, with the KL coefficient
annealed linearly over epochs: lam_t = min(1, t / anneal_epochs).

Everything is float64 numpy; a fixed config seed reproduces runs
bit for bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import loss as loss_mod
from . import seeds
from .data import one_hot
from .dirichlet import differential_entropy, mutual_information

__all__ = [
    "EvidentialMlp",
    "TrainConfig",
    "EpochLog",
    "UncertaintyScores",
    "make_optimizer",
    "loss_and_gradients",
    "backward_step",
    "train",
    "predict_scores",
    "accuracy",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_MAGIC = b"IEDL"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    """Optimization settings; ``fim_mse=False`` drops the trigamma weights.

    ``lam1`` scales the log-determinant reward, ``use_kl`` gates the
    annealed divergence term, and ``anneal_epochs`` sets its horizon
    (defaulting to the full epoch budget).  ``patience=0`` disables early
    stopping.
    """

    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 0.001
    lam1: float = 0.0
    fim_mse: bool = True
    use_kl: bool = True
    anneal_epochs: int | None = None
    patience: int = 10
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"TrainConfig: epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"TrainConfig: batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0.0:
            raise ValueError(f"TrainConfig: learning_rate must be > 0, got {self.learning_rate}")
        if self.lam1 < 0.0:
            raise ValueError(f"TrainConfig: lam1 must be >= 0, got {self.lam1}")
        if self.anneal_epochs is not None and self.anneal_epochs < 1:
            raise ValueError("TrainConfig: anneal_epochs must be >= 1")
        if self.patience < 0:
            raise ValueError(f"TrainConfig: patience must be >= 0, got {self.patience}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"TrainConfig: unknown optimizer {self.optimizer!r}")

    def lam_t(self, epoch):
        """Annealed KL coefficient for a zero-based epoch index."""
        if not self.use_kl:
            return 0.0
        horizon = self.anneal_epochs if self.anneal_epochs is not None else self.epochs
        return min(1.0, epoch / horizon)


@dataclass
class EpochLog:
    epoch: int
    lam_t: float
    train_loss: loss_mod.LossBreakdown
    val_loss: loss_mod.LossBreakdown
    train_accuracy: float
    val_accuracy: float


@dataclass
class UncertaintyScores:
    """Per-example summaries of the predicted Dirichlet."""

    max_p: np.ndarray
    max_alpha: np.ndarray
    alpha0: np.ndarray
    diff_ent: np.ndarray
    mi: np.ndarray
    pred_class: np.ndarray


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class EvidentialMlp:
    """ReLU MLP with a softplus-plus-one concentration head.

    ``layer_sizes`` runs input..hidden..classes, e.g. (2, 64, 64, 3).
    Weights are He-uniform in the fan-in, biases start at zero.
    """

    def __init__(self, layer_sizes, rng=0):
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"EvidentialMlp: bad layer sizes {sizes}")
        if sizes[-1] < 2:
            raise ValueError("EvidentialMlp: need at least 2 output classes")
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        self.layer_sizes = sizes
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_inputs(self):
        return self.layer_sizes[0]

    @property
    def n_classes(self):
        return self.layer_sizes[-1]

    def parameters(self):
        """Flat list alternating weight and bias arrays, layer by layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def _forward_cached(self, x):
        activations = [x]
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
            activations.append(h)
        z = h @ self.weights[-1] + self.biases[-1]
        return _softplus(z) + 1.0, activations, z

    def forward(self, x):
        """Concentrations alpha > 1; (d,) -> (K,) or (N, d) -> (N, K)."""
        arr = np.asarray(x, dtype=np.float64)
        single = arr.ndim == 1
        if single:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2 or arr.shape[1] != self.n_inputs:
            raise ValueError(
                f"forward: expected {self.n_inputs} features, got shape {np.shape(x)}"
            )
        alpha, _, _ = self._forward_cached(arr)
        return alpha[0] if single else alpha


class _Sgd:
    def __init__(self, params, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        self.t += 1
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def make_optimizer(model, cfg):
    cls = _Adam if cfg.optimizer == "adam" else _Sgd
    return cls(model.parameters(), cfg.learning_rate)


def loss_and_gradients(model, x, targets, lam1, lam_t, fim_mse=True):
    """Batch-mean loss terms and exact parameter gradients.

    Returns ``(breakdown, grads)`` where grads aligns with
    ``model.parameters()``.  Raises FloatingPointError naming the term or
    layer if anything non-finite appears.
    """
    x = np.asarray(x, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_inputs:
        raise ValueError(
            f"loss_and_gradients: expected (batch, {model.n_inputs}) features, "
            f"got shape {x.shape}"
        )
    alpha, activations, z = model._forward_cached(x)
    breakdown = loss_mod.total_loss(alpha, targets, lam1, lam_t, fim_mse)
    for term in ("i_mse", "log_det", "kl"):
        if not np.all(np.isfinite(getattr(breakdown, term))):
            raise FloatingPointError(f"non-finite {term} term in training batch")
    n = x.shape[0]
    dalpha = loss_mod.grad_total_loss(alpha, targets, lam1, lam_t, fim_mse) / n
    delta = dalpha * _sigmoid(z)
    grads = [None] * (2 * len(model.weights))
    for i in range(len(model.weights) - 1, -1, -1):
        grads[2 * i] = activations[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (activations[i] > 0.0)
    for i, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            kind = "weights" if i % 2 == 0 else "biases"
            raise FloatingPointError(f"non-finite gradient for layer {i // 2} {kind}")
    return breakdown.batch_mean(), grads


def backward_step(model, x, targets, cfg, lam_t, optimizer):
    """One optimizer update on a batch; returns the pre-update loss terms."""
    breakdown, grads = loss_and_gradients(
        model, x, targets, cfg.lam1, lam_t, cfg.fim_mse
    )
    optimizer.step(model.parameters(), grads)
    return breakdown


def _dataset_loss(model, ds, targets, cfg, lam_t):
    alpha = model.forward(ds.features)
    breakdown = loss_mod.total_loss(alpha, targets, cfg.lam1, lam_t, cfg.fim_mse)
    acc = float((np.argmax(alpha, axis=1) == ds.labels).mean())
    return breakdown.batch_mean(), acc


def _snapshot(model):
    return [p.copy() for p in model.parameters()]


def _restore(model, saved):
    for p, s in zip(model.parameters(), saved):
        p[:] = s


def train(model, train_ds, val_ds, cfg):
    """Annealed minibatch training with validation-based early stopping.

    Runs up to ``cfg.epochs`` epochs; stops once the validation total has
    not improved for ``cfg.patience`` consecutive epochs and restores the
    best weights seen.  Returns one :class:`EpochLog` per epoch run.
    """
    if train_ds.n_classes != model.n_classes:
        raise ValueError(
            f"train: model has {model.n_classes} classes, "
            f"dataset has {train_ds.n_classes}"
        )
    shuffle_rng = seeds.make_rng(cfg.seed, seeds.SHUFFLE)
    train_targets = one_hot(train_ds.labels, train_ds.n_classes)
    val_targets = one_hot(val_ds.labels, val_ds.n_classes)
    optimizer = make_optimizer(model, cfg)
    logs = []
    best_val = np.inf
    best_state = None
    stall = 0
    n = len(train_ds)
    for epoch in range(cfg.epochs):
        lam_t = cfg.lam_t(epoch)
        order = shuffle_rng.permutation(n)
        sums = np.zeros(4)
        for start in range(0, n, cfg.batch_size):
            sel = order[start : start + cfg.batch_size]
            breakdown = backward_step(
                model, train_ds.features[sel], train_targets[sel], cfg, lam_t, optimizer
            )
            sums += sel.size * np.array(
                [breakdown.i_mse, breakdown.log_det, breakdown.kl, breakdown.total]
            )
        train_break = loss_mod.LossBreakdown(*(sums / n))
        train_acc = float(
            (np.argmax(model.forward(train_ds.features), axis=1) == train_ds.labels).mean()
        )
        val_break, val_acc = _dataset_loss(model, val_ds, val_targets, cfg, lam_t)
        logs.append(EpochLog(epoch, lam_t, train_break, val_break, train_acc, val_acc))
        if val_break.total < best_val:
            best_val = val_break.total
            best_state = _snapshot(model)
            stall = 0
        else:
            stall += 1
            if cfg.patience and stall >= cfg.patience:
                break
    if cfg.patience and best_state is not None:
        _restore(model, best_state)
    return logs


def predict_scores(model, x):
    """Uncertainty summaries for one example or a batch."""
    alpha = model.forward(x)
    single = alpha.ndim == 1
    batch = alpha[np.newaxis, :] if single else alpha
    a0 = batch.sum(axis=1)
    p = batch / a0[:, np.newaxis]
    scores = UncertaintyScores(
        max_p=p.max(axis=1),
        max_alpha=batch.max(axis=1),
        alpha0=a0,
        diff_ent=differential_entropy(batch),
        mi=mutual_information(batch),
        pred_class=np.argmax(batch, axis=1),
    )
    if single:
        return UncertaintyScores(
            *(s[0] if isinstance(s, np.ndarray) else s for s in vars(scores).values())
        )
    return scores


def accuracy(model, ds):
    alpha = model.forward(ds.features)
    return float((np.argmax(alpha, axis=1) == ds.labels).mean())


def save_checkpoint(model, path):
    """Write layer sizes and parameters in the versioned binary layout."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(model.layer_sizes)))
        fh.write(struct.pack(f"<{len(model.layer_sizes)}I", *model.layer_sizes))
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Rebuild a model from :func:`save_checkpoint` output."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"load_checkpoint: bad magic {raw[:4]!r}")
    (version,) = struct.unpack("<I", raw[4:8])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"load_checkpoint: unsupported version {version}")
    (n_sizes,) = struct.unpack("<I", raw[8:12])
    offset = 12 + 4 * n_sizes
    sizes = struct.unpack(f"<{n_sizes}I", raw[12:offset])
    model = EvidentialMlp(sizes, rng=0)
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        w_bytes = 8 * fan_in * fan_out
        b_bytes = 8 * fan_out
        if offset + w_bytes + b_bytes > len(raw):
            raise ValueError("load_checkpoint: truncated parameter payload")
        model.weights[i] = (
            np.frombuffer(raw, dtype="<f8", count=fan_in * fan_out, offset=offset)
            .reshape(fan_in, fan_out)
            .copy()
        )
        offset += w_bytes
        model.biases[i] = np.frombuffer(
            raw, dtype="<f8", count=fan_out, offset=offset
        ).copy()
        offset += b_bytes
    if offset != len(raw):
        raise ValueError("load_checkpoint: trailing bytes after parameters")
    return model
