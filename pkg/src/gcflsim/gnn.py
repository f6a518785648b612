"""Graph isomorphism network with hand-written backpropagation, plus Adam.

Everything runs in 64-bit floats. Per layer the update is
``h' = MLP((1 + eps) * h + sum of neighbor h)`` with a two-linear MLP and one
inner ReLU; the readout is sum pooling followed by a linear classifier.
Parameters flatten to a single vector in a fixed order (per layer: eps, W1,
b1, W2, b2; then classifier W, b), which is the unit of federation transport.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ArgumentError
from .graphs import Graph

CHECKPOINT_MAGIC = b"GINCKPT1"


@dataclass
class GinModel:
    input_dim: int
    output_dim: int
    hidden: int = 64
    num_layers: int = 3
    eps: list[float] = field(default_factory=list)
    w1: list[np.ndarray] = field(default_factory=list)
    b1: list[np.ndarray] = field(default_factory=list)
    w2: list[np.ndarray] = field(default_factory=list)
    b2: list[np.ndarray] = field(default_factory=list)
    wc: np.ndarray | None = None
    bc: np.ndarray | None = None

    def layer_input_dim(self, layer: int) -> int:
        return self.input_dim if layer == 0 else self.hidden

    def num_params(self) -> int:
        return gin_param_count(self.input_dim, self.hidden, self.num_layers, self.output_dim)

    def flatten(self) -> np.ndarray:
        parts = []
        for l in range(self.num_layers):
            parts.append(np.array([self.eps[l]]))
            parts.extend([self.w1[l].ravel(), self.b1[l], self.w2[l].ravel(), self.b2[l]])
        parts.extend([self.wc.ravel(), self.bc])
        return np.concatenate(parts)

    def load_flat(self, vec: np.ndarray) -> "GinModel":
        """Overwrite all parameters from a flat vector (inverse of flatten)."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.num_params(),):
            raise ArgumentError(f"expected {self.num_params()} parameters, got {vec.shape}")
        h = self.hidden
        pos = 0
        self.eps, self.w1, self.b1, self.w2, self.b2 = [], [], [], [], []
        for l in range(self.num_layers):
            d = self.layer_input_dim(l)
            self.eps.append(float(vec[pos])); pos += 1
            self.w1.append(vec[pos:pos + d * h].reshape(d, h).copy()); pos += d * h
            self.b1.append(vec[pos:pos + h].copy()); pos += h
            self.w2.append(vec[pos:pos + h * h].reshape(h, h).copy()); pos += h * h
            self.b2.append(vec[pos:pos + h].copy()); pos += h
        c = self.output_dim
        self.wc = vec[pos:pos + h * c].reshape(h, c).copy(); pos += h * c
        self.bc = vec[pos:pos + c].copy(); pos += c
        return self


def gin_param_count(input_dim: int, hidden: int, num_layers: int, output_dim: int) -> int:
    total = 0
    for l in range(num_layers):
        d = input_dim if l == 0 else hidden
        total += 1 + d * hidden + hidden + hidden * hidden + hidden
    return total + hidden * output_dim + output_dim


def init_gin(
    input_dim: int,
    output_dim: int,
    hidden: int = 64,
    num_layers: int = 3,
    rng: np.random.Generator | None = None,
) -> GinModel:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights and biases, eps = 0."""
    rng = rng or np.random.default_rng(0)
    model = GinModel(input_dim, output_dim, hidden, num_layers)

    def uniform(fan_in, shape):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    for l in range(num_layers):
        d = model.layer_input_dim(l)
        model.eps.append(0.0)
        model.w1.append(uniform(d, (d, hidden)))
        model.b1.append(uniform(d, (hidden,)))
        model.w2.append(uniform(hidden, (hidden, hidden)))
        model.b2.append(uniform(hidden, (hidden,)))
    model.wc = uniform(hidden, (hidden, output_dim))
    model.bc = uniform(hidden, (output_dim,))
    return model


def _neighbor_sum(graph: Graph, h: np.ndarray) -> np.ndarray:
    if graph.num_nodes <= 512:
        return graph.adjacency @ h
    out = np.zeros_like(h)
    np.add.at(out, graph.edges[:, 0], h[graph.edges[:, 1]])
    np.add.at(out, graph.edges[:, 1], h[graph.edges[:, 0]])
    return out


def gin_forward(model: GinModel, graph: Graph) -> np.ndarray:
    """Class logits for one graph."""
    if graph.feat_dim != model.input_dim:
        raise ArgumentError(f"feature dim {graph.feat_dim} != model input dim {model.input_dim}")
    h = graph.features
    for l in range(model.num_layers):
        s = (1.0 + model.eps[l]) * h + _neighbor_sum(graph, h)
        z = s @ model.w1[l] + model.b1[l]
        h = np.maximum(z, 0.0) @ model.w2[l] + model.b2[l]
    pooled = h.sum(axis=0)
    return pooled @ model.wc + model.bc


def cross_entropy(logits: np.ndarray, label: int) -> float:
    """Negative log-softmax at ``label``, stabilized by max subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < len(logits):
        raise ArgumentError(f"label {label} out of range for {len(logits)} classes")
    z = logits - logits.max()
    return float(np.log(np.exp(z).sum()) - z[label])


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max())
    return z / z.sum()


def gin_loss_and_grad(
    model: GinModel, graphs: list[Graph], labels: list[int]
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient, flattened."""
    if not graphs:
        raise ArgumentError("batch must be nonempty")
    if len(graphs) != len(labels):
        raise ArgumentError("one label per graph required")
    nl, h_dim = model.num_layers, model.hidden
    g_eps = np.zeros(nl)
    g_w1 = [np.zeros_like(model.w1[l]) for l in range(nl)]
    g_b1 = [np.zeros_like(model.b1[l]) for l in range(nl)]
    g_w2 = [np.zeros_like(model.w2[l]) for l in range(nl)]
    g_b2 = [np.zeros_like(model.b2[l]) for l in range(nl)]
    g_wc = np.zeros_like(model.wc)
    g_bc = np.zeros_like(model.bc)
    total_loss = 0.0
    inv_b = 1.0 / len(graphs)

    for graph, label in zip(graphs, labels):
        if graph.feat_dim != model.input_dim:
            raise ArgumentError("graph feature dim does not match model")
        h_in: list[np.ndarray] = []
        s_cache: list[np.ndarray] = []
        z_cache: list[np.ndarray] = []
        r_cache: list[np.ndarray] = []
        h = graph.features
        for l in range(nl):
            h_in.append(h)
            s = (1.0 + model.eps[l]) * h + _neighbor_sum(graph, h)
            z = s @ model.w1[l] + model.b1[l]
            r = np.maximum(z, 0.0)
            s_cache.append(s)
            z_cache.append(z)
            r_cache.append(r)
            h = r @ model.w2[l] + model.b2[l]
        pooled = h.sum(axis=0)
        logits = pooled @ model.wc + model.bc
        total_loss += cross_entropy(logits, label)

        d_logits = softmax(logits)
        d_logits[label] -= 1.0
        d_logits *= inv_b
        g_wc += np.outer(pooled, d_logits)
        g_bc += d_logits
        d_h = np.broadcast_to(model.wc @ d_logits, h.shape).copy()  # sum pooling fan-out
        for l in reversed(range(nl)):
            g_w2[l] += r_cache[l].T @ d_h
            g_b2[l] += d_h.sum(axis=0)
            d_r = d_h @ model.w2[l].T
            d_z = d_r * (z_cache[l] > 0.0)
            g_w1[l] += s_cache[l].T @ d_z
            g_b1[l] += d_z.sum(axis=0)
            d_s = d_z @ model.w1[l].T
            g_eps[l] += float(np.sum(d_s * h_in[l]))
            d_h = (1.0 + model.eps[l]) * d_s + _neighbor_sum(graph, d_s)

    parts = []
    for l in range(nl):
        parts.extend([np.array([g_eps[l]]), g_w1[l].ravel(), g_b1[l], g_w2[l].ravel(), g_b2[l]])
    parts.extend([g_wc.ravel(), g_bc])
    return total_loss * inv_b, np.concatenate(parts)


def gin_backward(model: GinModel, graphs: list[Graph], labels: list[int]) -> np.ndarray:
    """Gradient of the mean batch cross-entropy w.r.t. all flat parameters."""
    return gin_loss_and_grad(model, graphs, labels)[1]


def batch_loss(model: GinModel, graphs: list[Graph], labels: list[int]) -> float:
    if not graphs:
        raise ArgumentError("batch must be nonempty")
    return float(np.mean([cross_entropy(gin_forward(model, g), y)
                          for g, y in zip(graphs, labels)]))


def predict(model: GinModel, graph: Graph) -> int:
    return int(np.argmax(gin_forward(model, graph)))


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0


def init_adam(num_params: int, lr: float = 1e-3, weight_decay: float = 0.0,
              beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    return AdamState(np.zeros(num_params), np.zeros(num_params), 0,
                     lr, beta1, beta2, epsilon, weight_decay)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """One bias-corrected Adam update; weight decay folds into the gradient."""
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ArgumentError("parameter, gradient and moment lengths must match")
    g = grad + state.weight_decay * params if state.weight_decay else grad
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)


# ---------------------------------------------------------------------------
# Checkpoints: shape header + little-endian float64 parameter vector
# ---------------------------------------------------------------------------


def save_checkpoint(model: GinModel, path: str | Path) -> None:
    header = struct.pack("<4q", model.input_dim, model.hidden, model.num_layers, model.output_dim)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(header)
        fh.write(model.flatten().astype("<f8").tobytes())


def load_checkpoint(path: str | Path) -> GinModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ArgumentError(f"{path} is not a model checkpoint")
        input_dim, hidden, num_layers, output_dim = struct.unpack("<4q", fh.read(32))
        flat = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    model = GinModel(int(input_dim), int(output_dim), int(hidden), int(num_layers))
    return model.load_flat(flat)


# ---------------------------------------------------------------------------
# Feature synthesis
# ---------------------------------------------------------------------------


def one_hot_degree_features(graph: Graph, max_degree: int) -> Graph:
    """Replace node features with one-hot degree vectors of width max_degree+1.

    Degrees above ``max_degree`` are clamped into the top bucket.
    """
    if max_degree < 1:
        raise ArgumentError("max_degree must be >= 1")
    deg = np.minimum(graph.degrees, max_degree)
    feats = np.zeros((graph.num_nodes, max_degree + 1), dtype=np.float64)
    feats[np.arange(graph.num_nodes), deg] = 1.0
    return graph.with_features(feats)
