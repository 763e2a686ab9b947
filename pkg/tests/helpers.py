"""Shared test fixtures: reference confusion matrix, corpus builders and a
finite-difference gradient checker."""

from __future__ import annotations

import csv
import random
from pathlib import Path

import numpy as np

from stancefusion import network
from stancefusion.corpus import STANCES, Stance

# Published confusion matrix of the reference system on the 25,413-pair test
# set, rows gold / columns predicted in stance order.
REFERENCE_CONFUSION = np.array(
    [
        [834, 15, 945, 109],
        [208, 44, 328, 117],
        [401, 23, 3825, 215],
        [22, 12, 325, 17990],
    ],
    dtype=np.int64,
)

WORD_POOL = (
    "market mayor storm river budget police festival bridge election rain "
    "hospital train strike valley protest airport merger drought wildfire "
    "council harvest museum tunnel summit cliff garden reactor satellite "
    "glacier volcano senate harbor factory stadium comet mineral voyage "
    "quarry meadow lantern anchor circuit raft delta canyon orchard prism "
    "timber marsh ridge plaza"
).split()

REFUTING_SAMPLE = ("hoax", "fake", "fraud", "denies", "not", "false")


def write_corpus_csvs(directory: Path, rows, bodies, prefix="train"):
    """Write (headline, body_id, stance_string) rows and {id: text} bodies."""
    directory.mkdir(parents=True, exist_ok=True)
    stances_path = directory / f"{prefix}_stances.csv"
    bodies_path = directory / f"{prefix}_bodies.csv"
    with open(stances_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Headline", "Body ID", "Stance"])
        writer.writerows(rows)
    with open(bodies_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Body ID", "articleBody"])
        for body_id in sorted(bodies):
            writer.writerow([body_id, bodies[body_id]])
    return stances_path, bodies_path


def make_smoke_corpus(directory: Path, n_bodies=30, n_pairs=150, seed=0, prefix="train"):
    """Synthetic corpus: related headlines borrow body words, unrelated do not."""
    rng = random.Random(seed)
    bodies = {}
    for body_id in range(1, n_bodies + 1):
        words = [rng.choice(WORD_POOL) for _ in range(rng.randint(25, 60))]
        if rng.random() < 0.3:
            words.insert(rng.randrange(len(words)), rng.choice(REFUTING_SAMPLE))
        bodies[body_id] = " ".join(words) + "."
    rows = []
    for _ in range(n_pairs):
        body_id = rng.randint(1, n_bodies)
        stance = rng.choices(STANCES, weights=(7, 2, 18, 73))[0]
        body_words = bodies[body_id].rstrip(".").split()
        if stance is Stance.UNRELATED:
            headline_words = [rng.choice(WORD_POOL) for _ in range(rng.randint(4, 8))]
        else:
            start = rng.randrange(max(1, len(body_words) - 6))
            headline_words = body_words[start : start + rng.randint(4, 6)]
            if stance is Stance.DISAGREE:
                headline_words.insert(0, rng.choice(REFUTING_SAMPLE))
        rows.append((" ".join(headline_words), body_id, stance.value))
    return write_corpus_csvs(directory, rows, bodies, prefix=prefix)


def toy_branch_specs():
    """Downsized three-branch architecture: inputs 12/5/16, widths 8/4/8."""
    return {
        "neural": network.BranchSpec(12, (8, 4), "sigmoid", (0.2, 0.0), (1e-8, 0.0)),
        "external": network.BranchSpec(5, (4,), "relu"),
        "statistical": network.BranchSpec(16, (8, 4), "relu", (0.4, 0.0), (5e-5, 0.0)),
    }


def toy_inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    return {
        "neural": rng.standard_normal((n, 12)),
        "external": rng.standard_normal((n, 5)),
        "statistical": rng.standard_normal((n, 16)),
    }


def separable_specs():
    """Branch widths big enough to separate the synthetic clusters quickly."""
    return {
        "neural": network.BranchSpec(12, (32, 16), "sigmoid", (0.2, 0.0), (1e-8, 0.0)),
        "external": network.BranchSpec(5, (16,), "relu"),
        "statistical": network.BranchSpec(16, (32, 16), "relu", (0.4, 0.0), (5e-5, 0.0)),
    }


def separable_dataset(n_per_class=50, seed=36):
    """Four well-separated clusters, redundantly encoded in every branch."""
    rng = np.random.default_rng(seed)
    inputs = {"neural": [], "external": [], "statistical": []}
    labels = []
    for cls in range(4):
        centre = np.eye(4)[cls]
        for _ in range(n_per_class):
            labels.append(cls)
            inputs["neural"].append(centre.repeat(3) * 4.0 + rng.normal(0, 0.2, 12))
            inputs["external"].append(
                np.concatenate([centre * 4.0, [1.0]]) + rng.normal(0, 0.2, 5)
            )
            inputs["statistical"].append(centre.repeat(4) * 4.0 + rng.normal(0, 0.2, 16))
    return {k: np.array(v) for k, v in inputs.items()}, np.array(labels)


def finite_difference_check(model, inputs, labels, num_params=200, step=1e-5, seed=0):
    """Max guarded relative error between backprop and central differences.

    Dropout is masked off (inference-mode forward) while L2 terms stay on,
    matching the loss the analytic gradients differentiate.
    """
    probs, cache = network.forward(model, inputs, train=False)
    grads = network.backward(model, cache, labels)
    flat = []
    for name in model.branch_names:
        for i, layer in enumerate(model.branches[name]):
            flat.append((layer, grads["branches"][name][i]))
    for i, layer in enumerate(model.fusion):
        flat.append((layer, grads["fusion"][i]))

    def loss_at():
        p, _ = network.forward(model, inputs, train=False)
        return network.batch_loss(p, labels, model)

    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = 0
    while checked < num_params:
        layer, (d_weights, d_bias) = flat[rng.integers(len(flat))]
        use_bias = rng.random() < 0.2
        tensor = layer.bias if use_bias else layer.weights
        analytic = d_bias if use_bias else d_weights
        idx = tuple(rng.integers(s) for s in tensor.shape)
        original = tensor[idx]
        tensor[idx] = original + step
        up = loss_at()
        tensor[idx] = original - step
        down = loss_at()
        tensor[idx] = original
        numeric = (up - down) / (2.0 * step)
        denom = max(abs(analytic[idx]), abs(numeric), 1e-6)
        worst = max(worst, abs(analytic[idx] - numeric) / denom)
        checked += 1
    return worst
