"""From-scratch dense network: three feature branches fused into a softmax head.

Everything is float64 numpy: forward pass, backpropagation, cross-entropy
loss with per-layer L2 penalties, inverted dropout and bias-corrected Adam.
Dropout applies to the output of the layer that declares it and rescales by
1/keep during training, so inference needs no adjustment. L2 applies to the
weights (not biases) of the layer that declares it.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import scoring
from .corpus import STANCE_INDEX, STANCES, Stance

BRANCH_ORDER = ("neural", "external", "statistical")
NUM_CLASSES = 4
ACTIVATIONS = ("sigmoid", "relu", "softmax", "identity")
PROB_FLOOR = 1e-12

DEFAULT_LEARNING_RATE = 0.001
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


class ShapeError(ValueError):
    """Input, cache or gradient shapes do not match the model."""


class NumericError(ValueError):
    """A non-finite value appeared where finite arithmetic was expected."""


class CheckpointError(ValueError):
    """Checkpoint file is malformed."""


@dataclass
class DenseLayer:
    """Fully-connected layer; weights are [out, in], bias is [out]."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str
    dropout_keep: float = 1.0
    l2: float = 0.0


@dataclass
class BranchSpec:
    """Widths and per-layer regularization settings for one feature branch.

    ``dropout`` holds drop rates (probability of zeroing a unit), aligned
    with ``widths``; unspecified positions default to 0.
    """

    input_dim: int
    widths: tuple[int, ...]
    activation: str
    dropout: tuple[float, ...] = ()
    l2: tuple[float, ...] = ()


def default_branch_specs(
    neural_dim: int = 9600, external_dim: int = 50, statistical_dim: int = 10000
) -> dict[str, BranchSpec]:
    """The stock three-branch architecture and its regularization settings."""
    return {
        "neural": BranchSpec(neural_dim, (500, 100), "sigmoid", (0.2, 0.0), (1e-8, 0.0)),
        "external": BranchSpec(external_dim, (50,), "relu"),
        "statistical": BranchSpec(statistical_dim, (500, 50), "relu", (0.4, 0.0), (5e-5, 0.0)),
    }


@dataclass
class MlpModel:
    """Per-branch layer stacks plus the softmax fusion head."""

    branches: dict[str, list[DenseLayer]]
    fusion: list[DenseLayer]

    @property
    def branch_names(self) -> tuple[str, ...]:
        return tuple(n for n in BRANCH_ORDER if n in self.branches)

    def input_dims(self) -> dict[str, int]:
        return {n: self.branches[n][0].weights.shape[1] for n in self.branch_names}

    def named_layers(self):
        """Yield (label, layer) in canonical order: branches, then fusion."""
        for name in self.branch_names:
            for i, layer in enumerate(self.branches[name]):
                yield f"{name}[{i}]", layer
        for i, layer in enumerate(self.fusion):
            yield f"fusion[{i}]", layer

    def has_dropout(self) -> bool:
        return any(layer.dropout_keep < 1.0 for _, layer in self.named_layers())

    def num_parameters(self) -> int:
        return sum(layer.weights.size + layer.bias.size for _, layer in self.named_layers())


def _init_dense(in_dim, out_dim, activation, rng, dropout_keep=1.0, l2=0.0) -> DenseLayer:
    # Glorot-uniform weights, zero biases.
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    weights = rng.uniform(-limit, limit, size=(out_dim, in_dim))
    return DenseLayer(
        weights=weights,
        bias=np.zeros(out_dim, dtype=np.float64),
        activation=activation,
        dropout_keep=dropout_keep,
        l2=l2,
    )


def build_model(
    specs: dict[str, BranchSpec], seed: int = 0, num_classes: int = NUM_CLASSES
) -> MlpModel:
    """Initialize a model from branch specs; softmax appears only as the head."""
    unknown = set(specs) - set(BRANCH_ORDER)
    if unknown:
        raise ValueError(f"unknown branch names: {sorted(unknown)}")
    names = [n for n in BRANCH_ORDER if n in specs]
    if not names:
        raise ValueError("at least one branch must be enabled")
    rng = np.random.default_rng(seed)
    branches: dict[str, list[DenseLayer]] = {}
    fusion_in = 0
    for name in names:
        spec = specs[name]
        if spec.activation not in ("sigmoid", "relu", "identity"):
            raise ValueError(f"branch {name!r}: unsupported activation {spec.activation!r}")
        if not spec.widths:
            raise ValueError(f"branch {name!r}: needs at least one layer")
        layers = []
        in_dim = spec.input_dim
        for i, width in enumerate(spec.widths):
            rate = spec.dropout[i] if i < len(spec.dropout) else 0.0
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"branch {name!r}: drop rate must be in [0, 1), got {rate}")
            l2 = spec.l2[i] if i < len(spec.l2) else 0.0
            layers.append(_init_dense(in_dim, width, spec.activation, rng, 1.0 - rate, l2))
            in_dim = width
        branches[name] = layers
        fusion_in += in_dim
    fusion = [_init_dense(fusion_in, num_classes, "softmax", rng)]
    return MlpModel(branches=branches, fusion=fusion)


def _softmax(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(z, name):
    if name == "sigmoid":
        return _sigmoid(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "softmax":
        return _softmax(z)
    if name == "identity":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(layer, z, a):
    if layer.activation == "sigmoid":
        return a * (1.0 - a)
    if layer.activation == "relu":
        return (z > 0.0).astype(np.float64)
    if layer.activation == "identity":
        return np.ones_like(z)
    raise ValueError(f"{layer.activation!r} is only supported as the output layer")


def layer_forward(layer: DenseLayer, x: np.ndarray, train: bool = False, rng=None):
    """One layer: affine, activation, then inverted dropout in train mode.

    Returns (output, cache) where cache = (input, pre-activation, activation,
    dropout mask or None). The mask already carries the 1/keep scale.
    """
    z = x @ layer.weights.T + layer.bias
    a = _activate(z, layer.activation)
    if train and layer.dropout_keep < 1.0:
        keep = layer.dropout_keep
        mask = (rng.random(a.shape) < keep).astype(np.float64) / keep
        return a * mask, (x, z, a, mask)
    return a, (x, z, a, None)


def as_label_indices(labels) -> np.ndarray:
    """Accept Stance values or integer indices; return an int64 array."""
    if isinstance(labels, np.ndarray) and labels.dtype != object:
        return labels.astype(np.int64)
    return np.array(
        [STANCE_INDEX[v] if isinstance(v, Stance) else int(v) for v in labels],
        dtype=np.int64,
    )


def forward(model: MlpModel, inputs: dict[str, np.ndarray], train: bool = False, rng=None):
    """Run the network; returns (probabilities, cache).

    ``inputs`` maps branch name to a feature vector or a [batch, dim] matrix;
    extra keys for disabled branches are ignored. Probabilities keep the
    input's rank (vector in, vector out). Train mode draws dropout masks from
    ``rng``; inference applies none and is deterministic.
    """
    if train and rng is None and model.has_dropout():
        raise ValueError("train-mode forward needs a random generator for dropout")
    single = True
    batch = None
    branch_caches: dict[str, list] = {}
    outputs = []
    for name in model.branch_names:
        value = inputs.get(name)
        if value is None:
            raise ShapeError(f"missing input for branch {name!r}")
        x = np.asarray(value, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        else:
            single = False
        expected = model.branches[name][0].weights.shape[1]
        if x.ndim != 2 or x.shape[1] != expected:
            raise ShapeError(
                f"branch {name!r} expects input width {expected}, got shape {x.shape}"
            )
        if batch is None:
            batch = x.shape[0]
        elif x.shape[0] != batch:
            raise ShapeError(f"branch {name!r} batch size {x.shape[0]} != {batch}")
        cache = []
        for layer in model.branches[name]:
            x, entry = layer_forward(layer, x, train, rng)
            cache.append(entry)
        branch_caches[name] = cache
        outputs.append(x)
    x = np.concatenate(outputs, axis=1) if len(outputs) > 1 else outputs[0]
    fusion_cache = []
    for layer in model.fusion:
        x, entry = layer_forward(layer, x, train, rng)
        fusion_cache.append(entry)
    probs = x
    cache = {
        "branches": branch_caches,
        "fusion": fusion_cache,
        "widths": [model.branches[n][-1].weights.shape[0] for n in model.branch_names],
        "probs": probs,
    }
    return (probs[0] if single else probs), cache


def l2_penalty(model: MlpModel) -> float:
    return float(
        sum(layer.l2 * np.sum(layer.weights**2) for _, layer in model.named_layers() if layer.l2)
    )


def loss(probabilities: np.ndarray, gold, model: MlpModel) -> float:
    """Cross-entropy of one prediction plus the model's L2 penalty."""
    idx = STANCE_INDEX[gold] if isinstance(gold, Stance) else int(gold)
    p = max(float(probabilities[idx]), PROB_FLOOR)
    return -np.log(p) + l2_penalty(model)


def batch_loss(probabilities: np.ndarray, labels, model: MlpModel) -> float:
    """Mean cross-entropy over the batch plus the L2 penalty (added once)."""
    idx = as_label_indices(labels)
    p = np.maximum(probabilities[np.arange(len(idx)), idx], PROB_FLOOR)
    return float(np.mean(-np.log(p)) + l2_penalty(model))


def _layers_backward(layers, caches, upstream):
    grads = [None] * len(layers)
    for i in reversed(range(len(layers))):
        layer = layers[i]
        x, z, a, mask = caches[i]
        da = upstream if mask is None else upstream * mask
        dz = da * _activation_grad(layer, z, a)
        grads[i] = (dz.T @ x + 2.0 * layer.l2 * layer.weights, dz.sum(axis=0))
        upstream = dz @ layer.weights
    return grads, upstream


def backward(model: MlpModel, cache: dict, golds) -> dict:
    """Gradients of batch_loss w.r.t. every parameter, reusing forward masks.

    Returns {"branches": {name: [(dW, db), ...]}, "fusion": [(dW, db), ...]}
    with shapes mirroring the parameters. The batch loss averages the
    per-sample cross-entropies, so gradients are sample means; the L2 term
    contributes 2 * l2 * W once.
    """
    probs = cache["probs"]
    idx = as_label_indices(golds)
    if idx.shape[0] != probs.shape[0]:
        raise ShapeError(
            f"gold labels ({idx.shape[0]}) do not match the cached batch size ({probs.shape[0]})"
        )
    batch = probs.shape[0]
    onehot = np.zeros_like(probs)
    onehot[np.arange(batch), idx] = 1.0
    delta = (probs - onehot) / batch

    head = model.fusion[-1]
    if head.activation != "softmax":
        raise ShapeError("the final fusion layer must be softmax")
    x, _, _, _ = cache["fusion"][-1]
    head_grad = (delta.T @ x + 2.0 * head.l2 * head.weights, delta.sum(axis=0))
    upstream = delta @ head.weights
    fusion_grads, upstream = _layers_backward(
        model.fusion[:-1], cache["fusion"][:-1], upstream
    )
    fusion_grads.append(head_grad)

    branch_grads: dict[str, list] = {}
    start = 0
    for name, width in zip(model.branch_names, cache["widths"]):
        segment = upstream[:, start : start + width]
        start += width
        grads, _ = _layers_backward(model.branches[name], cache["branches"][name], segment)
        branch_grads[name] = grads
    return {"branches": branch_grads, "fusion": fusion_grads}


@dataclass
class AdamState:
    """First/second moment accumulators mirroring the model parameters."""

    learning_rate: float = DEFAULT_LEARNING_RATE
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON
    step_count: int = 0
    slots: dict | None = None


def adam_update_array(param, grad, m, v, step, learning_rate, beta1=ADAM_BETA1,
                      beta2=ADAM_BETA2, epsilon=ADAM_EPSILON):
    """One bias-corrected Adam update; mutates param, m and v in place."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * np.square(grad)
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    param -= learning_rate * m_hat / (np.sqrt(v_hat) + epsilon)
    return param, m, v


def _grads_for(model, grads):
    for name in model.branch_names:
        for i, layer in enumerate(model.branches[name]):
            yield f"{name}[{i}]", layer, grads["branches"][name][i]
    for i, layer in enumerate(model.fusion):
        yield f"fusion[{i}]", layer, grads["fusion"][i]


def adam_step(model: MlpModel, grads: dict, state: AdamState) -> None:
    """Apply one optimizer step to every parameter tensor, in place."""
    if state.slots is None:
        state.slots = {
            label: {
                "m_w": np.zeros_like(layer.weights),
                "v_w": np.zeros_like(layer.weights),
                "m_b": np.zeros_like(layer.bias),
                "v_b": np.zeros_like(layer.bias),
            }
            for label, layer in model.named_layers()
        }
    state.step_count += 1
    for label, layer, (d_weights, d_bias) in _grads_for(model, grads):
        if not (np.all(np.isfinite(d_weights)) and np.all(np.isfinite(d_bias))):
            raise NumericError(f"non-finite gradient in layer {label}")
        slot = state.slots[label]
        adam_update_array(
            layer.weights, d_weights, slot["m_w"], slot["v_w"], state.step_count,
            state.learning_rate, state.beta1, state.beta2, state.epsilon,
        )
        adam_update_array(
            layer.bias, d_bias, slot["m_b"], slot["v_b"], state.step_count,
            state.learning_rate, state.beta1, state.beta2, state.epsilon,
        )


@dataclass
class TrainConfig:
    batch_size: int = 100
    max_epochs: int = 50
    patience: int = 5
    learning_rate: float = DEFAULT_LEARNING_RATE
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_score: float | None = None


def _snapshot(model: MlpModel) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(layer.weights.copy(), layer.bias.copy()) for _, layer in model.named_layers()]


def _restore(model: MlpModel, params) -> None:
    for (_, layer), (weights, bias) in zip(model.named_layers(), params):
        layer.weights[...] = weights
        layer.bias[...] = bias


def predict_indices(model: MlpModel, inputs: dict[str, np.ndarray]) -> np.ndarray:
    probs, _ = forward(model, inputs, train=False)
    return np.argmax(np.atleast_2d(probs), axis=1)


def predict(model: MlpModel, bundle: dict[str, np.ndarray]) -> Stance:
    """Argmax stance of an inference-mode forward pass; ties take the first label."""
    return STANCES[int(predict_indices(model, bundle)[0])]


def _default_val_score(model, val_inputs, val_labels) -> float:
    golds = [STANCES[i] for i in as_label_indices(val_labels)]
    preds = [STANCES[i] for i in predict_indices(model, val_inputs)]
    return scoring.score_official_weighted(scoring.confusion(golds, preds))


def train(
    model: MlpModel,
    train_inputs: dict[str, np.ndarray],
    train_labels,
    val_inputs: dict[str, np.ndarray] | None = None,
    val_labels=None,
    config: TrainConfig | None = None,
    score_fn=None,
) -> tuple[MlpModel, list[EpochStats]]:
    """Mini-batch Adam training with early stopping on the validation score.

    Data is reshuffled every epoch with the seeded generator; the final
    partial batch is kept. When validation data (or ``score_fn``) is given,
    training stops once the score has not improved for ``patience``
    consecutive epochs and the best-scoring parameters are restored into the
    returned model. Without validation it runs for ``max_epochs`` and
    returns the final parameters. Identical inputs, config and seed
    reproduce the history exactly.
    """
    config = config or TrainConfig()
    labels = as_label_indices(train_labels)
    n = labels.shape[0]
    if n == 0:
        raise ValueError("training set is empty")
    for name in model.branch_names:
        if name not in train_inputs:
            raise ShapeError(f"missing training input for branch {name!r}")
        if np.atleast_2d(train_inputs[name]).shape[0] != n:
            raise ShapeError(f"branch {name!r} has a different number of rows than the labels")
    has_validation = score_fn is not None or (
        val_inputs is not None and val_labels is not None and len(val_labels) > 0
    )
    rng = np.random.default_rng(config.seed)
    state = AdamState(learning_rate=config.learning_rate)
    history: list[EpochStats] = []
    best_score = None
    best_params = None
    epochs_without_improvement = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            sel = order[start : start + config.batch_size]
            batch_inputs = {k: np.atleast_2d(train_inputs[k])[sel] for k in model.branch_names}
            probs, cache = forward(model, batch_inputs, train=True, rng=rng)
            losses.append(batch_loss(probs, labels[sel], model))
            grads = backward(model, cache, labels[sel])
            adam_step(model, grads, state)
        val_score = None
        if has_validation:
            val_score = float(
                score_fn(model) if score_fn else _default_val_score(model, val_inputs, val_labels)
            )
        history.append(EpochStats(epoch, float(np.mean(losses)), val_score))
        if has_validation:
            if best_score is None or val_score > best_score:
                best_score = val_score
                best_params = _snapshot(model)
                epochs_without_improvement = 0
            else:
                epochs_without_improvement += 1
                if epochs_without_improvement >= config.patience:
                    break
    if best_params is not None:
        _restore(model, best_params)
    return model, history


CHECKPOINT_MAGIC = b"MLPCKPT1"
_DATA_MARKER = b"DATA\n"


def save_checkpoint(model: MlpModel, path) -> None:
    """Text architecture descriptor, then parameters as little-endian float64.

    One descriptor line per layer:
    ``layer<TAB>branch<TAB>in<TAB>out<TAB>activation<TAB>dropout_keep<TAB>l2``;
    parameters follow in the same order, weights row-major then bias.
    """
    lines = [CHECKPOINT_MAGIC.decode("ascii")]
    for label, layer in model.named_layers():
        branch = label.split("[")[0]
        out_dim, in_dim = layer.weights.shape
        lines.append(
            f"layer\t{branch}\t{in_dim}\t{out_dim}\t{layer.activation}"
            f"\t{layer.dropout_keep!r}\t{layer.l2!r}"
        )
    header = ("\n".join(lines) + "\n").encode("utf-8") + _DATA_MARKER
    blob = b"".join(
        np.ascontiguousarray(layer.weights, dtype="<f8").tobytes()
        + np.ascontiguousarray(layer.bias, dtype="<f8").tobytes()
        for _, layer in model.named_layers()
    )
    with open(path, "wb") as fh:
        fh.write(header + blob)


def load_checkpoint(path) -> MlpModel:
    data = Path(path).read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC + b"\n"):
        raise CheckpointError(f"{path}: bad magic")
    marker = data.find(b"\n" + _DATA_MARKER)
    if marker < 0:
        raise CheckpointError(f"{path}: missing data section")
    header_lines = data[: marker].decode("utf-8").split("\n")[1:]
    blob = data[marker + 1 + len(_DATA_MARKER) :]
    branches: dict[str, list[DenseLayer]] = {}
    fusion: list[DenseLayer] = []
    offset = 0
    for line in header_lines:
        parts = line.split("\t")
        if len(parts) != 7 or parts[0] != "layer":
            raise CheckpointError(f"{path}: bad descriptor line {line!r}")
        _, branch, in_dim, out_dim, activation, keep, l2 = parts
        in_dim, out_dim = int(in_dim), int(out_dim)
        if activation not in ACTIVATIONS:
            raise CheckpointError(f"{path}: unknown activation {activation!r}")
        w_bytes = 8 * in_dim * out_dim
        b_bytes = 8 * out_dim
        if offset + w_bytes + b_bytes > len(blob):
            raise CheckpointError(f"{path}: parameter section is truncated")
        weights = np.frombuffer(blob, dtype="<f8", count=in_dim * out_dim, offset=offset)
        weights = weights.reshape(out_dim, in_dim).copy()
        offset += w_bytes
        bias = np.frombuffer(blob, dtype="<f8", count=out_dim, offset=offset).copy()
        offset += b_bytes
        layer = DenseLayer(weights, bias, activation, float(keep), float(l2))
        if branch == "fusion":
            fusion.append(layer)
        elif branch in BRANCH_ORDER:
            branches.setdefault(branch, []).append(layer)
        else:
            raise CheckpointError(f"{path}: unknown branch {branch!r}")
    if offset != len(blob):
        raise CheckpointError(f"{path}: trailing bytes after the final parameter")
    if not fusion:
        raise CheckpointError(f"{path}: no fusion head recorded")
    return MlpModel(branches=branches, fusion=fusion)


def clone_model(model: MlpModel) -> MlpModel:
    return copy.deepcopy(model)
