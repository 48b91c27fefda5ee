"""Detection scorers: learned confidence, max-softmax baseline, and ODIN.

All three report higher = more in-distribution. Confidence scores live in
(0, 1); baseline and ODIN scores in [1/M, 1].

Both the confidence scorer and ODIN support a single sign-gradient input
perturbation before scoring: the confidence scorer steps against the
gradient of its own penalty -log(c) (raising confidence), ODIN steps
against the cross-entropy of the already-predicted class (sharpening it).
In-distribution inputs respond more strongly, widening the score gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import detection_error
from .net import NetworkParams, backward, forward


@dataclass(frozen=True)
class PerturbConfig:
    """Perturbation magnitude (input units) and softmax temperature."""

    epsilon: float = 0.0
    temperature: float = 1.0

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.temperature < 1.0:
            raise ValueError(f"temperature must be >= 1, got {self.temperature}")


@dataclass
class ScoredSet:
    """Scores for one (in-distribution, OOD) dataset pair."""

    in_scores: np.ndarray
    out_scores: np.ndarray
    scorer: str
    config: PerturbConfig = field(default_factory=PerturbConfig)


def max_softmax(logits, temperature: float = 1.0) -> float:
    """Largest softmax probability at the given temperature."""
    z = np.asarray(logits, dtype=np.float64) / temperature
    e = np.exp(z - z.max())
    return float(e.max() / e.sum())


def preprocess_input(params: NetworkParams, x, epsilon: float) -> np.ndarray:
    """Single sign-gradient step lowering the confidence penalty.

    x_tilde = x - epsilon * sign(grad_x of -log c), with sign(0) = 0.
    epsilon = 0 returns x unchanged.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if epsilon < 0.0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    if epsilon == 0.0:
        return x
    out, trace = forward(params, x)
    g_conf = -(1.0 - out.c)
    _, input_grad = backward(
        trace, np.zeros(params.spec.num_classes), g_conf
    )
    return x - epsilon * np.sign(input_grad)


def score_confidence(params: NetworkParams, x, epsilon: float = 0.0) -> float:
    """Learned confidence c, optionally after input preprocessing."""
    if epsilon > 0.0:
        x = preprocess_input(params, x, epsilon)
    out, _ = forward(params, x)
    return out.c


def score_softmax_baseline(params: NetworkParams, x) -> float:
    """Largest softmax class probability."""
    out, _ = forward(params, x)
    return float(out.p.max())


def score_odin(params: NetworkParams, x, temperature: float = 1000.0,
               epsilon: float = 0.0) -> float:
    """Temperature-scaled max softmax with predicted-class perturbation.

    With epsilon > 0 the input takes one sign-gradient step that descends
    the cross-entropy of the argmax label (computed at the same
    temperature), pushing it toward its predicted class; the score is then
    the max of softmax(logits / temperature). At T=1, eps=0 this equals
    the baseline scorer.
    """
    if temperature < 1.0:
        raise ValueError(f"temperature must be >= 1, got {temperature}")
    if epsilon < 0.0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    out, trace = forward(params, x)
    if epsilon > 0.0:
        predicted = int(np.argmax(out.p))
        z = out.class_logits / temperature
        e = np.exp(z - z.max())
        q = e / e.sum()
        grad_logits = q / temperature
        grad_logits[predicted] -= 1.0 / temperature
        _, input_grad = backward(trace, grad_logits, 0.0)
        x_tilde = np.asarray(x, dtype=np.float64) - epsilon * np.sign(input_grad)
        out, _ = forward(params, x_tilde)
    return max_softmax(out.class_logits, temperature)


def score_batch(params: NetworkParams, features, scorer: str,
                epsilon: float = 0.0, temperature: float = 1000.0) -> np.ndarray:
    """Score every row of a feature matrix with the named scorer."""
    features = np.asarray(features, dtype=np.float64)
    if scorer == "confidence":
        return np.array(
            [score_confidence(params, row, epsilon) for row in features]
        )
    if scorer == "softmax":
        return np.array([score_softmax_baseline(params, row) for row in features])
    if scorer == "odin":
        return np.array(
            [score_odin(params, row, temperature, epsilon) for row in features]
        )
    raise ValueError(f"unknown scorer {scorer!r}")


def default_epsilon_grid(features, points: int = 21) -> np.ndarray:
    """Scale-aware grid: `points` even steps spanning [0, 0.02 * std].

    std is the mean per-feature standard deviation of the given (training)
    features, so the grid transfers across feature scales.
    """
    features = np.asarray(features, dtype=np.float64)
    scale = float(features.std(axis=0).mean())
    return np.linspace(0.0, 0.02 * scale, points)


def epsilon_error_table(params: NetworkParams, holdout_in, holdout_out,
                        grid, scorer: str = "confidence",
                        temperature: float = 1000.0) -> list:
    """(epsilon, detection_error) per grid value, in grid order."""
    grid = [float(e) for e in grid]
    if not grid:
        raise ValueError("epsilon grid must be nonempty")
    table = []
    for eps in grid:
        in_scores = score_batch(params, holdout_in, scorer, eps, temperature)
        out_scores = score_batch(params, holdout_out, scorer, eps, temperature)
        table.append((eps, detection_error(in_scores, out_scores)))
    return table


def epsilon_grid_search(params: NetworkParams, holdout_in, holdout_out,
                        grid, scorer: str = "confidence",
                        temperature: float = 1000.0) -> float:
    """Grid value minimizing holdout detection error; ties go to smaller."""
    table = epsilon_error_table(
        params, holdout_in, holdout_out, grid, scorer, temperature
    )
    table.sort(key=lambda item: item[0])
    best_eps, best_err = table[0]
    for eps, err in table[1:]:
        if err < best_err:
            best_eps, best_err = eps, err
    return best_eps
