"""One-shot beam predictor: multi-head classification MLP trained from scratch.

The network maps the flattened, normalized UE information matrix to one
softmax head per AP beam parameter: M width heads over the discrete width
set followed by M direction heads over the direction set.  Forward,
backward, the cross-entropy loss and the Adadelta update are implemented
directly on numpy arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import (
    BeamConfig,
    DimensionMismatchError,
    NetworkConfig,
    Scenario,
    beam_config_from_indices,
    beam_config_indices,
    sort_rows,
)

PROB_FLOOR = 1e-12
CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LabelSet:
    """One-hot target vectors: one width row and one direction row per AP."""

    width_onehots: np.ndarray      # (M, |D_theta|)
    direction_onehots: np.ndarray  # (M, |D_beta|)


@dataclass
class MlpModel:
    n_ues: int
    n_aps: int
    n_widths: int
    n_directions: int
    weights: list[np.ndarray] = field(repr=False)
    biases: list[np.ndarray] = field(repr=False)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def n_outputs(self) -> int:
        return self.n_aps * (self.n_widths + self.n_directions)

    def head_slices(self) -> list[slice]:
        """Output slices: M width heads first, then M direction heads."""
        slices = []
        offset = 0
        for size in [self.n_widths] * self.n_aps + [self.n_directions] * self.n_aps:
            slices.append(slice(offset, offset + size))
            offset += size
        return slices

    def fingerprint(self) -> dict:
        return {
            "n_ues": self.n_ues,
            "n_aps": self.n_aps,
            "n_widths": self.n_widths,
            "n_directions": self.n_directions,
        }


def init_model(cfg: NetworkConfig, hidden: tuple[int, ...] = (200, 200),
               seed: int = 0) -> MlpModel:
    """Fan-in scaled uniform initialization of a shared-trunk multi-head MLP."""
    if len(hidden) != 2:
        raise DimensionMismatchError("the predictor uses exactly two hidden layers")
    rng = np.random.default_rng(seed)
    sizes = [3 * cfg.n_ues, *hidden, cfg.n_aps * (cfg.n_beamwidths + cfg.n_directions)]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(cfg.n_ues, cfg.n_aps, cfg.n_beamwidths, cfg.n_directions,
                    weights, biases)


def encode_labels(q: BeamConfig, cfg: NetworkConfig) -> LabelSet:
    """One-hot encode a beam configuration against the discrete sets."""
    wi, di = beam_config_indices(cfg, q)
    width = np.zeros((cfg.n_aps, cfg.n_beamwidths))
    width[np.arange(cfg.n_aps), wi] = 1.0
    direction = np.zeros((cfg.n_aps, cfg.n_directions))
    direction[np.arange(cfg.n_aps), di] = 1.0
    return LabelSet(width, direction)


def decode_labels(width_scores: np.ndarray, direction_scores: np.ndarray,
                  cfg: NetworkConfig) -> BeamConfig:
    """Per-head argmax back to set values; ties pick the smallest index."""
    width_scores = np.asarray(width_scores, dtype=float)
    direction_scores = np.asarray(direction_scores, dtype=float)
    if width_scores.shape != (cfg.n_aps, cfg.n_beamwidths):
        raise DimensionMismatchError("width score shape does not match configuration")
    if direction_scores.shape != (cfg.n_aps, cfg.n_directions):
        raise DimensionMismatchError("direction score shape does not match configuration")
    return beam_config_from_indices(cfg, width_scores.argmax(axis=1),
                                    direction_scores.argmax(axis=1))


def featurize(scenario: Scenario, cfg: NetworkConfig) -> np.ndarray:
    """Row-major flattening of the sorted UE matrix with unit-range columns.

    x and y are scaled by the half extents of the rectangle, the transmit
    direction is mapped affinely onto [0, 1].
    """
    d = sort_rows(scenario.d_matrix).copy()
    d[:, 0] /= cfg.area_width / 2.0
    d[:, 1] /= cfg.area_height / 2.0
    lo, hi = cfg.ue_tx_direction_range
    span = hi - lo
    if span > 0.0:
        d[:, 2] = (d[:, 2] - lo) / span
    else:
        d[:, 2] = 0.0
    return d.reshape(-1)


def featurize_batch(scenarios, cfg: NetworkConfig) -> np.ndarray:
    return np.stack([featurize(s, cfg) for s in scenarios])


def _softmax_heads(logits: np.ndarray, head_slices: list[slice]) -> np.ndarray:
    """Softmax within each head slice of a (B, n_outputs) logit matrix."""
    probs = np.empty_like(logits)
    for sl in head_slices:
        z = logits[:, sl]
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        probs[:, sl] = e / e.sum(axis=1, keepdims=True)
    return probs


def _forward_cached(model: MlpModel, x: np.ndarray):
    """Forward pass keeping the activations needed for backpropagation."""
    w1, w2, w3 = model.weights
    b1, b2, b3 = model.biases
    a1 = np.maximum(x @ w1 + b1, 0.0)
    a2 = np.maximum(a1 @ w2 + b2, 0.0)
    logits = a2 @ w3 + b3
    probs = _softmax_heads(logits, model.head_slices())
    return a1, a2, probs


def forward(model: MlpModel, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-head probabilities for one feature vector.

    Returns (width_probs, direction_probs) of shapes (M, |D_theta|) and
    (M, |D_beta|); each row sums to one.
    """
    x = np.asarray(features, dtype=float)
    if x.shape != (3 * model.n_ues,):
        raise DimensionMismatchError(
            f"expected feature vector of length {3 * model.n_ues}, got shape {x.shape}")
    _, _, probs = _forward_cached(model, x[None, :])
    split = model.n_aps * model.n_widths
    width_probs = probs[0, :split].reshape(model.n_aps, model.n_widths)
    direction_probs = probs[0, split:].reshape(model.n_aps, model.n_directions)
    return width_probs, direction_probs


def loss(labels: LabelSet, predictions: tuple[np.ndarray, np.ndarray]) -> float:
    """Categorical cross entropy summed over all heads, natural logarithm."""
    width_probs, direction_probs = predictions
    value = -(labels.width_onehots * np.log(np.maximum(width_probs, PROB_FLOOR))).sum()
    value -= (labels.direction_onehots * np.log(np.maximum(direction_probs, PROB_FLOOR))).sum()
    return float(value)


def _label_row(labels: LabelSet) -> np.ndarray:
    return np.concatenate([labels.width_onehots.reshape(-1),
                           labels.direction_onehots.reshape(-1)])


def _backward_batch(model: MlpModel, x: np.ndarray, y: np.ndarray,
                    a1: np.ndarray, a2: np.ndarray, probs: np.ndarray):
    """Mean-loss gradients for a batch; softmax heads reduce to (probs - y)."""
    batch = x.shape[0]
    delta = (probs - y) / batch
    dw3 = a2.T @ delta
    db3 = delta.sum(axis=0)
    d2 = (delta @ model.weights[2].T) * (a2 > 0.0)
    dw2 = a1.T @ d2
    db2 = d2.sum(axis=0)
    d1 = (d2 @ model.weights[1].T) * (a1 > 0.0)
    dw1 = x.T @ d1
    db1 = d1.sum(axis=0)
    return [dw1, dw2, dw3], [db1, db2, db3]


def backward(model: MlpModel, features: np.ndarray, labels: LabelSet):
    """Exact loss gradient for one sample, shaped like (weights, biases)."""
    x = np.asarray(features, dtype=float)[None, :]
    a1, a2, probs = _forward_cached(model, x)
    y = _label_row(labels)[None, :]
    return _backward_batch(model, x, y, a1, a2, probs)


@dataclass
class AdadeltaState:
    decay_rho: float
    epsilon: float
    acc_grad_sq: list[np.ndarray] = field(repr=False)
    acc_update_sq: list[np.ndarray] = field(repr=False)


def init_adadelta(model: MlpModel, decay_rho: float = 0.95,
                  epsilon: float = 1e-6) -> AdadeltaState:
    zeros = lambda params: [np.zeros_like(p) for p in params]
    return AdadeltaState(decay_rho, epsilon,
                         zeros(model.weights) + zeros(model.biases),
                         zeros(model.weights) + zeros(model.biases))


def adadelta_step(state: AdadeltaState, model: MlpModel, weight_grads, bias_grads):
    """Accumulator-ratio update; parameters and state are modified in place."""
    rho, eps = state.decay_rho, state.epsilon
    params = model.weights + model.biases
    grads = list(weight_grads) + list(bias_grads)
    for p, g, eg2, ed2 in zip(params, grads, state.acc_grad_sq, state.acc_update_sq):
        eg2 *= rho
        eg2 += (1.0 - rho) * g * g
        update = -np.sqrt(ed2 + eps) / np.sqrt(eg2 + eps) * g
        ed2 *= rho
        ed2 += (1.0 - rho) * update * update
        p += update
    return model, state


def head_accuracy(probs: np.ndarray, y: np.ndarray, head_slices: list[slice]) -> float:
    """Fraction of heads whose argmax matches the one-hot target."""
    hits = 0
    for sl in head_slices:
        hits += int((probs[:, sl].argmax(axis=1) == y[:, sl].argmax(axis=1)).sum())
    return hits / (len(head_slices) * probs.shape[0])


def _jittered_features(d_all: np.ndarray, cfg: NetworkConfig, rng, jitter: float) -> np.ndarray:
    """Features of position-perturbed copies of every scenario, re-sorted.

    Under continuous jitter x-coordinate ties occur with probability zero,
    so sorting by x alone reproduces the canonical lexicographic order.
    """
    half_w, half_h = cfg.area_width / 2.0, cfg.area_height / 2.0
    d = d_all.copy()
    d[:, :, 0] = np.clip(d[:, :, 0] + rng.normal(0.0, jitter, d.shape[:2]), -half_w, half_w)
    d[:, :, 1] = np.clip(d[:, :, 1] + rng.normal(0.0, jitter, d.shape[:2]), -half_h, half_h)
    order = np.argsort(d[:, :, 0], axis=1)
    d = np.take_along_axis(d, order[:, :, None], axis=1)
    feats = np.empty_like(d)
    feats[:, :, 0] = d[:, :, 0] / half_w
    feats[:, :, 1] = d[:, :, 1] / half_h
    lo, hi = cfg.ue_tx_direction_range
    span = hi - lo
    feats[:, :, 2] = (d[:, :, 2] - lo) / span if span > 0.0 else 0.0
    return feats.reshape(d.shape[0], -1)


def train(records, cfg: NetworkConfig, epochs: int = 500, batch_size: int = 512,
          seed: int = 0, decay_rho: float = 0.95, epsilon: float = 1e-6,
          hidden: tuple[int, ...] = (200, 200), jitter: float = 0.0,
          weight_decay: float = 0.0, average_tail: float = 0.0):
    """Minibatch Adadelta training on labeled records.

    Records need .scenario and .label attributes.  Batches are reshuffled
    every epoch from a generator seeded once, so runs are deterministic
    given (records, seed).  With jitter > 0 every epoch trains on a fresh
    position-perturbed copy of the data (std in meters, labels unchanged),
    which counters memorization when the training set is small.
    weight_decay shrinks weights multiplicatively by (1 - weight_decay) per
    step, decoupled from the adaptive update; biases are not decayed.
    average_tail in (0, 1] returns the parameter average over the last
    average_tail fraction of epochs instead of the final iterate, which
    damps end-of-run oscillation.  Returns (model, log) where log is a
    list of per-epoch dicts with keys epoch, loss and head_accuracy.
    """
    records = list(records)
    if not records:
        raise ValueError("training requires at least one record")
    if jitter < 0.0:
        raise ValueError("jitter must be >= 0")
    if not 0.0 <= weight_decay < 1.0:
        raise ValueError("weight_decay must lie in [0, 1)")
    if not 0.0 <= average_tail <= 1.0:
        raise ValueError("average_tail must lie in [0, 1]")
    x_all = featurize_batch([r.scenario for r in records], cfg)
    y_all = np.stack([_label_row(encode_labels(r.label, cfg)) for r in records])
    d_all = np.stack([r.scenario.d_matrix for r in records]) if jitter > 0.0 else None

    model = init_model(cfg, hidden=hidden, seed=seed)
    state = init_adadelta(model, decay_rho, epsilon)
    head_slices = model.head_slices()
    rng = np.random.default_rng(seed + 1)
    n = len(records)
    first_tail_epoch = epochs - max(1, int(round(average_tail * epochs))) if average_tail > 0.0 else epochs
    tail_sums = None
    tail_count = 0
    log = []
    for epoch in range(epochs):
        x_epoch = _jittered_features(d_all, cfg, rng, jitter) if jitter > 0.0 else x_all
        order = rng.permutation(n)
        total_loss = 0.0
        total_hits = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            x, y = x_epoch[idx], y_all[idx]
            a1, a2, probs = _forward_cached(model, x)
            total_loss -= float(
                (y * np.log(np.maximum(probs, PROB_FLOOR))).sum())
            total_hits += head_accuracy(probs, y, head_slices) * len(idx)
            wg, bg = _backward_batch(model, x, y, a1, a2, probs)
            adadelta_step(state, model, wg, bg)
            if weight_decay > 0.0:
                for w in model.weights:
                    w *= 1.0 - weight_decay
        if epoch >= first_tail_epoch:
            params = model.weights + model.biases
            if tail_sums is None:
                tail_sums = [p.copy() for p in params]
            else:
                for acc, p in zip(tail_sums, params):
                    acc += p
            tail_count += 1
        log.append({
            "epoch": epoch + 1,
            "loss": total_loss / n,
            "head_accuracy": total_hits / n,
        })
    if tail_count > 0:
        averaged = [acc / tail_count for acc in tail_sums]
        model.weights = averaged[:len(model.weights)]
        model.biases = averaged[len(model.weights):]
    return model, log


def predict(model: MlpModel, scenario: Scenario, cfg: NetworkConfig) -> BeamConfig:
    """Single forward pass from UE information to a beam configuration."""
    return decode_labels(*forward(model, featurize(scenario, cfg)), cfg)


# --------------------------------------------------------------------------
# Checkpoints: versioned JSON with 64-bit parameters and a config fingerprint
# --------------------------------------------------------------------------

def save_model(model: MlpModel, path) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "fingerprint": model.fingerprint(),
        "layer_sizes": list(model.layer_sizes),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def load_model(path, cfg: NetworkConfig | None = None) -> MlpModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version {version!r}")
    fp = payload["fingerprint"]
    model = MlpModel(
        n_ues=int(fp["n_ues"]),
        n_aps=int(fp["n_aps"]),
        n_widths=int(fp["n_widths"]),
        n_directions=int(fp["n_directions"]),
        weights=[np.asarray(w, dtype=float) for w in payload["weights"]],
        biases=[np.asarray(b, dtype=float) for b in payload["biases"]],
    )
    if list(model.layer_sizes) != payload["layer_sizes"]:
        raise ValueError("checkpoint layer sizes are inconsistent with parameters")
    if cfg is not None:
        expected = {"n_ues": cfg.n_ues, "n_aps": cfg.n_aps,
                    "n_widths": cfg.n_beamwidths, "n_directions": cfg.n_directions}
        if model.fingerprint() != expected:
            raise DimensionMismatchError(
                f"checkpoint fingerprint {model.fingerprint()} does not match "
                f"configuration {expected}")
    return model
