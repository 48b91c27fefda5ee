"""Deterministic training loop, evaluation, and model persistence.

The loop shuffles each epoch with the run RNG, keeps the last partial
batch, and interleaves hint-mask draws with batch order so that a fixed
(config, dataset) pair reproduces bitwise-identical results.

Model files are self-describing JSON (format version "1") with row-major
weight arrays serialized at full round-trip precision.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import net
from .net import (NetworkParams, NetworkSpec, OptimizerState, forward,
                  init_network, sgd_step)
from .objective import (BudgetState, batch_loss_and_grads, draw_hint_mask,
                        one_hot, update_lambda)

MODEL_FORMAT_VERSION = "1"


class ModelFormatError(Exception):
    """Model file is not parseable as the documented JSON schema."""


class ModelVersionError(Exception):
    """Model file declares an unsupported format version."""


class ModelShapeError(Exception):
    """Model file layers disagree with the declared architecture."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 10
    learning_rate: float = 0.1
    momentum: float = 0.9
    beta: float = 0.3
    lambda_init: float = 0.1
    adjust_factor: float = 1.01
    hint_probability: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.hint_probability <= 1.0:
            raise ValueError(
                f"hint_probability must be in [0, 1], got {self.hint_probability}"
            )


@dataclass
class EpochStats:
    epoch: int
    task_loss: float
    confidence_loss: float
    lam: float
    train_accuracy: float


@dataclass
class EvalRecord:
    predicted: int
    correct: bool
    confidence: float
    max_softmax: float


def train(config: TrainConfig, dataset, network: NetworkSpec | None = None) -> tuple:
    """Train on a LabeledDataset; returns (params, history).

    history is one EpochStats per epoch. The default architecture is the
    2D-experiment MLP (3x100 trunk, 100-unit branches); pass `network` to
    override.
    """
    features = np.asarray(dataset.features, dtype=np.float64)
    labels = np.asarray(dataset.labels)
    n = features.shape[0]
    if n == 0:
        raise ValueError("dataset is empty")

    if network is None:
        network = NetworkSpec(
            input_dim=features.shape[1],
            trunk_widths=(100, 100, 100),
            head_width=100,
            num_classes=dataset.num_classes,
        )
    if features.shape[1] != network.input_dim:
        raise ValueError(
            f"dataset dimension {features.shape[1]} != network input_dim "
            f"{network.input_dim}"
        )
    m = network.num_classes
    if labels.size and (labels.min() < 0 or labels.max() >= m):
        raise ValueError(f"labels out of range [0, {m})")
    targets = one_hot(labels, m)

    params = init_network(network, config.seed)
    opt = OptimizerState.for_params(params, config.learning_rate, config.momentum)
    budget = BudgetState(config.beta, config.lambda_init, config.adjust_factor)
    rng = np.random.default_rng(config.seed)

    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        task_sum = 0.0
        conf_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            outputs, traces = [], []
            for j in idx:
                out, trace = forward(params, features[j])
                outputs.append(out)
                traces.append(trace)
            mask = draw_hint_mask(len(idx), rng, config.hint_probability)
            breakdown, g_cls, g_conf = batch_loss_and_grads(
                outputs, targets[idx], mask, budget.lam
            )
            acc = net.zeros_like_grads(params)
            inv = 1.0 / len(idx)
            for i, trace in enumerate(traces):
                grads, _ = net.backward(trace, g_cls[i], g_conf[i])
                net.accumulate_grads(acc, grads, inv)
            sgd_step(params, acc, opt)
            budget = update_lambda(budget, breakdown.confidence_loss)
            task_sum += breakdown.task_loss * len(idx)
            conf_sum += breakdown.confidence_loss * len(idx)

        _, accuracy = evaluate(params, dataset)
        history.append(
            EpochStats(
                epoch=epoch,
                task_loss=task_sum / n,
                confidence_loss=conf_sum / n,
                lam=budget.lam,
                train_accuracy=accuracy,
            )
        )
    return params, history


def evaluate(params: NetworkParams, dataset) -> tuple:
    """Per-sample predictions; returns (records, accuracy).

    Prediction is argmax of p with ties broken toward the lowest class
    index. Never mutates params.
    """
    features = np.asarray(dataset.features, dtype=np.float64)
    labels = np.asarray(dataset.labels)
    records = []
    n_correct = 0
    for i in range(features.shape[0]):
        out, _ = forward(params, features[i])
        predicted = int(np.argmax(out.p))
        correct = bool(predicted == labels[i])
        n_correct += correct
        records.append(
            EvalRecord(
                predicted=predicted,
                correct=correct,
                confidence=out.c,
                max_softmax=float(out.p.max()),
            )
        )
    return records, n_correct / max(len(records), 1)


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(params: NetworkParams, path) -> None:
    """Write the JSON model file; round trips are bitwise exact."""
    spec = params.spec
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "spec": {
            "input_dim": spec.input_dim,
            "trunk_widths": list(spec.trunk_widths),
            "head_width": spec.head_width,
            "num_classes": spec.num_classes,
        },
        "layers": [
            {
                "name": layer.name,
                "rows": layer.W.shape[0],
                "cols": layer.W.shape[1],
                "weights": layer.W.ravel().tolist(),
                "bias": layer.b.tolist(),
            }
            for layer in params.layers
        ],
    }
    atomic_write_text(path, json.dumps(doc))


def load_model(path) -> tuple:
    """Read a model file; returns (params, spec)."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"malformed model file {path}: {e}") from e
    if not isinstance(doc, dict):
        raise ModelFormatError(f"malformed model file {path}: not a JSON object")

    version = doc.get("version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelVersionError(
            f"unsupported model format version {version!r} "
            f"(expected {MODEL_FORMAT_VERSION!r})"
        )
    try:
        spec = NetworkSpec(
            input_dim=doc["spec"]["input_dim"],
            trunk_widths=tuple(doc["spec"]["trunk_widths"]),
            head_width=doc["spec"]["head_width"],
            num_classes=doc["spec"]["num_classes"],
        )
        entries = doc["layers"]
        layers = []
        for entry in entries:
            W = np.array(entry["weights"], dtype=np.float64).reshape(
                entry["rows"], entry["cols"]
            )
            b = np.array(entry["bias"], dtype=np.float64)
            layers.append(net.Layer(entry["name"], np.ascontiguousarray(W), b))
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"malformed model file {path}: {e}") from e

    expected = spec.layer_shapes()
    if len(layers) != len(expected):
        raise ModelShapeError(
            f"model file has {len(layers)} layers, architecture needs "
            f"{len(expected)}"
        )
    for layer, (name, rows, cols) in zip(layers, expected):
        if layer.name != name or layer.W.shape != (rows, cols) or \
                layer.b.shape != (rows,):
            raise ModelShapeError(
                f"layer '{layer.name}' does not match expected "
                f"('{name}', {rows}x{cols})"
            )
    return NetworkParams(spec, layers), spec
