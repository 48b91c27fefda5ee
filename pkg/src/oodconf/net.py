"""Two-headed feedforward network with exact reverse-mode gradients.

The network is a ReLU MLP trunk followed by two parallel branches, each
with one ReLU hidden layer: a classification branch emitting ``num_classes``
logits and a confidence branch emitting a single logit. ``forward`` returns
softmax probabilities, a sigmoid confidence, and a trace of intermediates;
``backward`` turns head-logit gradients into exact gradients with respect
to every parameter and to the input vector.

Dense kernels are delegated to :mod:`oodconf.backends` (compiled extension
when available, NumPy otherwise).

forward/backward are pure; ``sgd_step`` mutates params/optimizer state in
place and must be serialized by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import backends


class NumericError(Exception):
    """Non-finite values where finite ones are required."""


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description.

    trunk_widths may be empty, in which case both branches attach directly
    to the input.
    """

    input_dim: int
    trunk_widths: tuple = (100, 100, 100)
    head_width: int = 100
    num_classes: int = 2

    def __post_init__(self):
        object.__setattr__(self, "trunk_widths", tuple(self.trunk_widths))
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if any(w < 1 for w in self.trunk_widths):
            raise ValueError(f"trunk widths must be >= 1, got {self.trunk_widths}")
        if self.head_width < 1:
            raise ValueError(f"head_width must be >= 1, got {self.head_width}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")

    def layer_shapes(self) -> list:
        """(name, rows, cols) for every layer, in parameter order."""
        shapes = []
        prev = self.input_dim
        for i, w in enumerate(self.trunk_widths):
            shapes.append((f"trunk{i + 1}", w, prev))
            prev = w
        shapes.append(("cls_hidden", self.head_width, prev))
        shapes.append(("cls_out", self.num_classes, self.head_width))
        shapes.append(("conf_hidden", self.head_width, prev))
        shapes.append(("conf_out", 1, self.head_width))
        return shapes


@dataclass
class Layer:
    """One affine layer: weight matrix (out, in) and bias (out,)."""

    name: str
    W: np.ndarray
    b: np.ndarray


@dataclass
class NetworkParams:
    """All trainable weights/biases, ordered trunk, cls branch, conf branch."""

    spec: NetworkSpec
    layers: list

    def num_params(self) -> int:
        return sum(layer.W.size + layer.b.size for layer in self.layers)

    def num_trunk(self) -> int:
        return len(self.spec.trunk_widths)

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            self.spec,
            [Layer(l.name, l.W.copy(), l.b.copy()) for l in self.layers],
        )


@dataclass
class ParamGrads:
    """Gradients mirroring NetworkParams.layers (same order and shapes)."""

    layers: list


@dataclass
class ForwardTrace:
    """Intermediates of one forward pass, consumed by backward.

    Holds a reference to the params it was computed with; mutating those
    params (e.g. via sgd_step) invalidates the trace.
    """

    params: "NetworkParams"
    x: np.ndarray
    trunk_pre: list
    trunk_post: list
    cls_hidden_pre: np.ndarray
    cls_hidden_post: np.ndarray
    class_logits: np.ndarray
    conf_hidden_pre: np.ndarray
    conf_hidden_post: np.ndarray
    conf_logit: float

    def trunk_output(self) -> np.ndarray:
        return self.trunk_post[-1] if self.trunk_post else self.x


@dataclass
class PredictionOutput:
    """Class probabilities p (simplex), confidence c in (0, 1), raw logits."""

    p: np.ndarray
    c: float
    class_logits: np.ndarray
    conf_logit: float


@dataclass
class OptimizerState:
    """SGD with Nesterov momentum; velocity buffers match parameter shapes."""

    learning_rate: float
    momentum: float
    velocity: list = field(default_factory=list)

    def __post_init__(self):
        if not self.learning_rate >= 0.0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")

    @classmethod
    def for_params(cls, params: NetworkParams, learning_rate: float,
                   momentum: float) -> "OptimizerState":
        vel = [
            Layer(l.name, np.zeros_like(l.W), np.zeros_like(l.b))
            for l in params.layers
        ]
        return cls(learning_rate, momentum, vel)


def init_network(spec: NetworkSpec, seed: int) -> NetworkParams:
    """He-style initialization: W ~ N(0, 2/fan_in), biases zero.

    Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    layers = []
    for name, rows, cols in spec.layer_shapes():
        W = rng.normal(0.0, math.sqrt(2.0 / cols), size=(rows, cols))
        layers.append(Layer(name, np.ascontiguousarray(W), np.zeros(rows)))
    return NetworkParams(spec, layers)


def _softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max())
    return e / e.sum()


def _sigmoid(u: float) -> float:
    if u >= 0.0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


def forward(params: NetworkParams, x) -> tuple:
    """Run the network on one input vector.

    Returns (PredictionOutput, ForwardTrace). Pure: identical inputs give
    bitwise-identical outputs.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (params.spec.input_dim,):
        raise ValueError(
            f"input shape {x.shape} does not match input_dim {params.spec.input_dim}"
        )
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite input vector")

    k = backends.active()
    nt = params.num_trunk()
    trunk_pre, trunk_post = [], []
    h = x
    for layer in params.layers[:nt]:
        z = k.affine(layer.W, layer.b, h)
        h = k.relu(z)
        trunk_pre.append(z)
        trunk_post.append(h)

    cls_hidden, cls_out, conf_hidden, conf_out = params.layers[nt:]
    zc = k.affine(cls_hidden.W, cls_hidden.b, h)
    ac = k.relu(zc)
    class_logits = k.affine(cls_out.W, cls_out.b, ac)

    zf = k.affine(conf_hidden.W, conf_hidden.b, h)
    af = k.relu(zf)
    conf_logit = float(k.affine(conf_out.W, conf_out.b, af)[0])

    out = PredictionOutput(
        p=_softmax(class_logits),
        c=_sigmoid(conf_logit),
        class_logits=class_logits,
        conf_logit=conf_logit,
    )
    trace = ForwardTrace(
        params=params,
        x=x,
        trunk_pre=trunk_pre,
        trunk_post=trunk_post,
        cls_hidden_pre=zc,
        cls_hidden_post=ac,
        class_logits=class_logits,
        conf_hidden_pre=zf,
        conf_hidden_post=af,
        conf_logit=conf_logit,
    )
    return out, trace


def backward(trace: ForwardTrace, grad_class_logits,
             grad_conf_logit: float) -> tuple:
    """Exact gradients of a scalar objective given its head-logit gradients.

    Returns (ParamGrads, input_grad). The objective is whatever produced
    the supplied upstream gradients; both heads' contributions are summed
    into the shared trunk.
    """
    params = trace.params
    spec = params.spec
    g_cls = np.ascontiguousarray(grad_class_logits, dtype=np.float64)
    if g_cls.shape != (spec.num_classes,):
        raise ValueError(
            f"grad_class_logits shape {g_cls.shape} does not match "
            f"num_classes {spec.num_classes}"
        )
    g_conf = np.array([float(grad_conf_logit)])

    k = backends.active()
    nt = params.num_trunk()
    cls_hidden, cls_out, conf_hidden, conf_out = params.layers[nt:]
    trunk_in = trace.trunk_output()

    # classification branch
    d_cls_out_W = k.weight_grad(g_cls, trace.cls_hidden_post)
    d_ac = k.affine_input_grad(cls_out.W, g_cls)
    d_zc = k.relu_grad(trace.cls_hidden_pre, d_ac)
    d_cls_hidden_W = k.weight_grad(d_zc, trunk_in)
    d_h_cls = k.affine_input_grad(cls_hidden.W, d_zc)

    # confidence branch
    d_conf_out_W = k.weight_grad(g_conf, trace.conf_hidden_post)
    d_af = k.affine_input_grad(conf_out.W, g_conf)
    d_zf = k.relu_grad(trace.conf_hidden_pre, d_af)
    d_conf_hidden_W = k.weight_grad(d_zf, trunk_in)
    d_h_conf = k.affine_input_grad(conf_hidden.W, d_zf)

    d_h = d_h_cls + d_h_conf
    trunk_grads = []
    for i in range(nt - 1, -1, -1):
        layer = params.layers[i]
        d_z = k.relu_grad(trace.trunk_pre[i], d_h)
        layer_in = trace.trunk_post[i - 1] if i > 0 else trace.x
        trunk_grads.append(Layer(layer.name, k.weight_grad(d_z, layer_in), d_z))
        d_h = k.affine_input_grad(layer.W, d_z)

    layers = list(reversed(trunk_grads))
    layers.append(Layer(cls_hidden.name, d_cls_hidden_W, d_zc))
    layers.append(Layer(cls_out.name, d_cls_out_W, g_cls.copy()))
    layers.append(Layer(conf_hidden.name, d_conf_hidden_W, d_zf))
    layers.append(Layer(conf_out.name, d_conf_out_W, g_conf))
    return ParamGrads(layers), d_h


def zeros_like_grads(params: NetworkParams) -> ParamGrads:
    return ParamGrads(
        [Layer(l.name, np.zeros_like(l.W), np.zeros_like(l.b)) for l in params.layers]
    )


def accumulate_grads(acc: ParamGrads, grads: ParamGrads, scale: float = 1.0) -> None:
    """acc += scale * grads, in place."""
    for a, g in zip(acc.layers, grads.layers):
        a.W += scale * g.W
        a.b += scale * g.b


def sgd_step(params: NetworkParams, grads: ParamGrads,
             opt: OptimizerState) -> None:
    """One Nesterov-momentum update, in place.

    v <- mu*v - lr*g; theta <- theta + mu*v - lr*g (the lookahead folded
    into the update). With mu=0 this is vanilla gradient descent.
    """
    if len(grads.layers) != len(params.layers):
        raise ValueError("gradient layer count does not match parameters")
    lr, mu = opt.learning_rate, opt.momentum
    for layer, g, v in zip(params.layers, grads.layers, opt.velocity):
        if g.W.shape != layer.W.shape or g.b.shape != layer.b.shape:
            raise ValueError(f"gradient shape mismatch in layer '{layer.name}'")
        if not (np.all(np.isfinite(g.W)) and np.all(np.isfinite(g.b))):
            raise NumericError(f"non-finite gradient in layer '{layer.name}'")
        v.W *= mu
        v.W -= lr * g.W
        layer.W += mu * v.W - lr * g.W
        v.b *= mu
        v.b -= lr * g.b
        layer.b += mu * v.b - lr * g.b
