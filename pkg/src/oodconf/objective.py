"""Confidence-learning objective.

Training lets the classifier buy "hints": its predicted distribution p is
pulled toward the one-hot target y by its own confidence c,

    p' = c * p + (1 - c) * y,

the task NLL is charged on p', and a penalty -log(c) is charged for asking.
The penalty weight lambda is adapted so the mean penalty tracks a budget.

Hints are granted per sample with 50% probability by default; the penalty
applies to every sample, hinted or not. Probabilities and confidences are
clamped to [1e-12, 1] before logarithms, and gradients use the clamped
values.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .net import PredictionOutput

CLAMP = 1e-12
LAMBDA_MIN = 1e-6
LAMBDA_MAX = 1e6


@dataclass
class LossBreakdown:
    """Batch-mean task loss, confidence loss, their weighted total, and p'."""

    task_loss: float
    confidence_loss: float
    lam: float
    total: float
    p_prime: np.ndarray  # (batch, num_classes)


@dataclass(frozen=True)
class BudgetState:
    """Confidence-penalty budget and the current weight tracking it."""

    beta: float
    lam: float = 0.1
    adjust_factor: float = 1.01

    def __post_init__(self):
        if not self.beta > 0.0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.lam > 0.0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if not self.adjust_factor > 1.0:
            raise ValueError(f"adjust_factor must be > 1, got {self.adjust_factor}")


def one_hot(labels, num_classes: int) -> np.ndarray:
    """(n, num_classes) one-hot rows for integer labels in [0, num_classes)."""
    labels = np.asarray(labels, dtype=np.intp)
    if labels.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"labels out of range [0, {num_classes})")
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _check_one_hot(y: np.ndarray) -> int:
    """Validate a one-hot row; returns the hot index."""
    if not np.all((y == 0.0) | (y == 1.0)) or y.sum() != 1.0:
        raise ValueError("target vector is not one-hot")
    return int(np.argmax(y))


def interpolate_predictions(p, y, c: float, hinted: bool) -> np.ndarray:
    """p' = c*p + (1-c)*y when hinted; p unchanged otherwise."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_one_hot(y)
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"confidence must be in [0, 1], got {c}")
    if not hinted:
        return p
    return c * p + (1.0 - c) * y


def task_loss(p_prime, y) -> float:
    """Negative log likelihood of the target under (clamped) p'."""
    p_prime = np.asarray(p_prime, dtype=np.float64)
    t = _check_one_hot(np.asarray(y, dtype=np.float64))
    return -float(np.log(max(p_prime[t], CLAMP)))


def confidence_loss(c: float) -> float:
    """-log(c), with c clamped away from zero."""
    return -float(np.log(max(c, CLAMP)))


def total_loss(task: float, conf: float, lam: float) -> float:
    if not lam > 0.0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    return task + lam * conf


def batch_loss_and_grads(outputs, targets, mask, lam: float) -> tuple:
    """Losses and exact head-logit gradients for one batch.

    outputs: list of PredictionOutput; targets: (batch, M) one-hot rows;
    mask: boolean per sample, True = hint applied.

    Returns (LossBreakdown, grad_class_logits (batch, M), grad_conf_logit
    (batch,)). Each row is the gradient of that sample's own loss
    task_i + lam * conf_i; batch means are reported in the breakdown, so
    averaging the per-sample parameter gradients recovers the gradient of
    the reported total.

    For a hinted sample the task gradient reaches both heads: through p
    with factor c, and through c via dLt/dc = sum_i(-y_i/p'_i)(p_i - y_i),
    composed with the softmax Jacobian and the sigmoid derivative. The
    penalty contributes d(-log c)/d(conf_logit) = -(1 - c) on every sample.
    """
    if not lam > 0.0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    targets = np.asarray(targets, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    n = len(outputs)
    if targets.shape[0] != n:
        raise ValueError(f"targets rows {targets.shape[0]} != batch size {n}")
    if mask.shape != (n,):
        raise ValueError(f"hint mask length {mask.shape} != batch size {n}")

    m = targets.shape[1]
    p_prime = np.empty((n, m))
    grad_class_logits = np.empty((n, m))
    grad_conf_logit = np.empty(n)
    task_sum = 0.0
    conf_sum = 0.0

    for i, out in enumerate(outputs):
        y = targets[i]
        t = _check_one_hot(y)
        p = out.p
        c = out.c
        cc = max(c, CLAMP)

        if mask[i]:
            pp = c * p + (1.0 - c) * y
        else:
            pp = p
        p_prime[i] = pp
        pp_t = max(pp[t], CLAMP)

        task_sum += -np.log(pp_t)
        conf_sum += -np.log(cc)

        if mask[i]:
            # dLt/dz through p' = c*p + (1-c)*y, then the softmax Jacobian
            s = -c * p[t] / pp_t
            g = -s * p
            g[t] += s
            grad_class_logits[i] = g
            dLt_dc = (1.0 - p[t]) / pp_t
            grad_conf_logit[i] = dLt_dc * c * (1.0 - c) - lam * (1.0 - cc)
        else:
            grad_class_logits[i] = p - y
            grad_conf_logit[i] = -lam * (1.0 - cc)

    task_mean = task_sum / n
    conf_mean = conf_sum / n
    breakdown = LossBreakdown(
        task_loss=task_mean,
        confidence_loss=conf_mean,
        lam=lam,
        total=task_mean + lam * conf_mean,
        p_prime=p_prime,
    )
    return breakdown, grad_class_logits, grad_conf_logit


def update_lambda(state: BudgetState, observed_conf_loss: float) -> BudgetState:
    """Move lambda multiplicatively toward the budget fixed point.

    Above budget: raise lambda (hints get pricier); below: lower it.
    Result clamped to [1e-6, 1e6].
    """
    lam = state.lam
    if observed_conf_loss > state.beta:
        lam *= state.adjust_factor
    elif observed_conf_loss < state.beta:
        lam /= state.adjust_factor
    lam = min(max(lam, LAMBDA_MIN), LAMBDA_MAX)
    return replace(state, lam=lam)


def draw_hint_mask(batch_size: int, rng, hint_probability: float = 0.5) -> np.ndarray:
    """Independent Bernoulli(hint_probability) per sample."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    return rng.random(batch_size) < hint_probability
