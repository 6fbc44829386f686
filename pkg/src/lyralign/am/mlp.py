"""Feed-forward state classifier for hybrid decoding, trained by plain SGD.

Inputs are feature frames spliced with +-splice_context neighbors (edge
replication) at the base 10 ms rate, then subsampled by taking every
subsample-th frame; decoding at that reduced rate gives an effective frame
shift of subsample * 10 ms. Scaled emission likelihoods for Viterbi come
from log softmax posteriors minus log state priors, the priors being the
state frequencies of the training alignments.

Everything is seeded and single-threaded: the same inputs and seed give
bit-identical weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelError

PRIOR_FLOOR = 1e-8


@dataclass(frozen=True)
class AdaptConfig:
    """Fine-tuning grid cell: learning-rate multiplier and epoch budget."""

    lr_multiplier: float = 1.0
    epochs: int = 1

    def __post_init__(self):
        if not self.lr_multiplier > 0:
            raise ModelError("lr_multiplier must be positive")
        if self.epochs < 1:
            raise ModelError("epochs must be >= 1")

    @property
    def label(self) -> str:
        lr = "LR" if self.lr_multiplier == 1.0 else f"{self.lr_multiplier:g}LR"
        return f"{lr}, epoch{self.epochs}"


def splice_frames(values: np.ndarray, context: int) -> np.ndarray:
    """Stack each frame with +-context neighbors (edges replicated)."""
    values = np.atleast_2d(values)
    n = values.shape[0]
    idx = np.clip(np.arange(n)[:, None] + np.arange(-context, context + 1)[None, :], 0, n - 1)
    return values[idx].reshape(n, -1)


def estimate_priors(target_lists, n_states: int) -> np.ndarray:
    counts = np.zeros(n_states)
    for targets in target_lists:
        np.add.at(counts, np.asarray(targets), 1)
    priors = np.maximum(counts / max(counts.sum(), 1.0), PRIOR_FLOOR)
    return priors / priors.sum()


@dataclass
class MlpModel:
    weights: list
    biases: list
    log_priors: np.ndarray
    splice_context: int = 4
    subsample: int = 3
    base_lr: float = 0.003
    batch_size: int = 128
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def n_states(self) -> int:
        return self.weights[-1].shape[0]

    def copy(self) -> "MlpModel":
        return MlpModel([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                        self.log_priors.copy(), self.splice_context, self.subsample,
                        self.base_lr, self.batch_size, self.seed, dict(self.meta))

    def _forward(self, x: np.ndarray):
        activations = [x]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            x = np.maximum(x @ w.T + b, 0.0)
            activations.append(x)
        logits = x @ self.weights[-1].T + self.biases[-1]
        return activations, logits

    def log_posteriors(self, spliced: np.ndarray) -> np.ndarray:
        _, logits = self._forward(spliced)
        shifted = logits - logits.max(axis=1, keepdims=True)
        return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))

    def prepare_inputs(self, values: np.ndarray) -> np.ndarray:
        """Splice at the base frame rate, then subsample."""
        return splice_frames(values, self.splice_context)[::self.subsample]

    def emission_loglik(self, values) -> np.ndarray:
        """Scaled likelihoods log p(x|s) = log p(s|x) - log prior(s), subsampled."""
        values = values.values if hasattr(values, "values") else np.atleast_2d(values)
        expected = self.sizes[0] // (2 * self.splice_context + 1)
        if values.shape[1] != expected:
            raise ModelError(f"feature dim {values.shape[1]} does not match MLP input "
                             f"(expects {expected} per frame)")
        return self.log_posteriors(self.prepare_inputs(values)) - self.log_priors[None, :]


def _init_params(sizes, rng):
    # fan-in-scaled uniform init; a fixed +-0.05 range starves gradients once
    # splicing pushes the input width into the hundreds
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _sgd_epochs(mlp: MlpModel, x: np.ndarray, y: np.ndarray, lr: float,
                epochs: int, rng) -> list[float]:
    losses = []
    n = x.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, mlp.batch_size):
            batch = order[start:start + mlp.batch_size]
            xb, yb = x[batch], y[batch]
            activations, logits = mlp._forward(xb)
            shifted = logits - logits.max(axis=1, keepdims=True)
            log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
            log_post = shifted - log_z
            epoch_loss += -log_post[np.arange(len(yb)), yb].sum()
            grad = np.exp(log_post)
            grad[np.arange(len(yb)), yb] -= 1.0
            grad /= len(yb)
            for layer in range(len(mlp.weights) - 1, -1, -1):
                a_prev = activations[layer]
                d_w = grad.T @ a_prev
                d_b = grad.sum(axis=0)
                if layer > 0:
                    grad = (grad @ mlp.weights[layer]) * (activations[layer] > 0)
                mlp.weights[layer] -= lr * d_w
                mlp.biases[layer] -= lr * d_b
        losses.append(epoch_loss / n)
    return losses


def _gather_training_set(mlp: MlpModel, features, target_lists):
    xs, ys = [], []
    for mat, targets in zip(features, target_lists):
        values = mat.values if hasattr(mat, "values") else np.atleast_2d(mat)
        targets = np.asarray(targets)
        if targets.shape[0] != values.shape[0]:
            raise ModelError("alignment length does not match frame count")
        xs.append(mlp.prepare_inputs(values))
        ys.append(targets[::mlp.subsample])
    return np.concatenate(xs, axis=0), np.concatenate(ys, axis=0)


def train_mlp(features, target_lists, n_states: int, hidden=(256, 256), lr: float = 0.003,
              epochs: int = 5, batch_size: int = 128, seed: int = 0,
              splice_context: int = 4, subsample: int = 3):
    """Train a state classifier on aligned frames; returns (model, loss curve).

    Targets are per-frame pdf ids at the base rate; splicing and subsampling
    happen internally. epochs=0 returns the seeded initial weights untouched.
    """
    if not features:
        raise ModelError("no training utterances")
    dim = (features[0].values if hasattr(features[0], "values") else features[0]).shape[1]
    sizes = (dim * (2 * splice_context + 1),) + tuple(hidden) + (n_states,)
    rng = np.random.default_rng(seed)
    weights, biases = _init_params(sizes, rng)
    priors = estimate_priors([np.asarray(t)[::subsample] for t in target_lists], n_states)
    mlp = MlpModel(weights, biases, np.log(priors), splice_context, subsample,
                   lr, batch_size, seed)
    if epochs == 0:
        return mlp, []
    x, y = _gather_training_set(mlp, features, target_lists)
    losses = _sgd_epochs(mlp, x, y, lr, epochs, rng)
    return mlp, losses


def adapt_mlp(mlp: MlpModel, features, target_lists, config: AdaptConfig,
              seed: int | None = None, freeze_hidden: bool = False):
    """Continue training on in-domain data; all layers update by default.

    Priors are re-estimated from the adaptation alignments. freeze_hidden
    restricts updates to the output layer (exposed as an option, not the
    default behavior).
    """
    if not features:
        raise ModelError("empty adaptation set")
    adapted = mlp.copy()
    adapted.log_priors = np.log(estimate_priors(
        [np.asarray(t)[::mlp.subsample] for t in target_lists], mlp.n_states))
    x, y = _gather_training_set(adapted, features, target_lists)
    rng = np.random.default_rng(mlp.seed + 9973 if seed is None else seed)
    lr = mlp.base_lr * config.lr_multiplier
    if freeze_hidden:
        frozen = [w.copy() for w in adapted.weights[:-1]]
        frozen_b = [b.copy() for b in adapted.biases[:-1]]
        losses = _sgd_epochs(adapted, x, y, lr, config.epochs, rng)
        for i, (w, b) in enumerate(zip(frozen, frozen_b)):
            adapted.weights[i] = w
            adapted.biases[i] = b
    else:
        losses = _sgd_epochs(adapted, x, y, lr, config.epochs, rng)
    adapted.meta["adapt"] = {"lr_multiplier": config.lr_multiplier, "epochs": config.epochs}
    return adapted, losses
