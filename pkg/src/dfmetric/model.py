"""Toy MLP encoder plus linear classification head, with a hand-written backward pass.

The encoder stands in for a transformer backbone: it maps a feature vector to a
D-dimensional embedding. Hidden blocks are affine + activation; the final
encoder block is affine only so that the embedding is unconstrained.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("tanh", "relu", "identity")


def pool_tokens(tokens) -> np.ndarray:
    """Mean of all non-CLS tokens; row 0 is the CLS token."""
    t = np.asarray(tokens, dtype=np.float64)
    if t.ndim != 2 or t.shape[0] < 2:
        raise ValueError("need a CLS row plus at least one patch token")
    return t[1:].mean(axis=0)


def _act(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(x)
    if kind == "relu":
        return np.maximum(x, 0.0)
    return x


def _act_grad(pre: np.ndarray, post: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return 1.0 - post**2
    if kind == "relu":
        return (pre > 0).astype(np.float64)
    return np.ones_like(pre)


@dataclass
class Network:
    """Encoder blocks ``enc0 .. enc{L-1}`` followed by ``head``.

    Parameters live in an ordered dict of named float64 arrays; weights are
    stored input-major (``x @ W + b``).
    """

    input_dim: int
    hidden_dims: tuple[int, ...]
    embed_dim: int
    num_classes: int
    activation: str = "tanh"
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.hidden_dims = tuple(self.hidden_dims)

    @property
    def dims(self) -> list[int]:
        return [self.input_dim, *self.hidden_dims, self.embed_dim]

    @property
    def num_encoder_layers(self) -> int:
        return len(self.hidden_dims) + 1

    def layer_names(self) -> list[str]:
        return [f"enc{i}" for i in range(self.num_encoder_layers)] + ["head"]

    def layer_index(self, param_name: str) -> int:
        """Depth of a parameter for layer-wise LR decay; the head is the top."""
        block = param_name.split(".")[0]
        return self.num_encoder_layers if block == "head" else int(block[3:])

    @classmethod
    def init(cls, input_dim, hidden_dims, embed_dim, num_classes, rng: np.random.Generator, activation="tanh"):
        net = cls(input_dim, tuple(hidden_dims), embed_dim, num_classes, activation)
        shapes = list(zip(net.dims[:-1], net.dims[1:])) + [(embed_dim, num_classes)]
        for name, (n_in, n_out) in zip(net.layer_names(), shapes):
            net.params[f"{name}.W"] = rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_in, n_out))
            net.params[f"{name}.b"] = np.zeros(n_out)
        return net

    def copy(self) -> "Network":
        return Network(
            self.input_dim, self.hidden_dims, self.embed_dim, self.num_classes, self.activation,
            {k: v.copy() for k, v in self.params.items()},
        )

    def num_parameters(self) -> int:
        return sum(v.size for v in self.params.values())

    def encode(self, x) -> np.ndarray:
        return self._forward(x)[0]

    def forward(self, x) -> tuple[np.ndarray, np.ndarray]:
        h, z, _ = self._forward(x)
        return h, z

    def _forward(self, x):
        a = np.asarray(x, dtype=np.float64)
        if a.ndim == 1:
            a = a[None, :]
        if a.shape[1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} input features, got {a.shape[1]}")
        cache = [a]
        L = self.num_encoder_layers
        for i in range(L):
            pre = a @ self.params[f"enc{i}.W"] + self.params[f"enc{i}.b"]
            a = pre if i == L - 1 else _act(pre, self.activation)
            cache.append((pre, a))
        h = a
        z = h @ self.params["head.W"] + self.params["head.b"]
        return h, z, cache

    def backward(self, x, grad_h: np.ndarray, grad_z: np.ndarray) -> dict[str, np.ndarray]:
        """Parameter gradients given dLoss/dEmbedding and dLoss/dLogits."""
        h, _, cache = self._forward(x)
        grads: dict[str, np.ndarray] = {}
        grads["head.W"] = h.T @ grad_z
        grads["head.b"] = grad_z.sum(axis=0)
        g = grad_h + grad_z @ self.params["head.W"].T
        L = self.num_encoder_layers
        for i in reversed(range(L)):
            pre, post = cache[i + 1]
            if i != L - 1:
                g = g * _act_grad(pre, post, self.activation)
            inp = cache[0] if i == 0 else cache[i][1]
            grads[f"enc{i}.W"] = inp.T @ g
            grads[f"enc{i}.b"] = g.sum(axis=0)
            g = g @ self.params[f"enc{i}.W"].T
        return {k: grads[k] for k in self.params}


def softmax(z: np.ndarray) -> np.ndarray:
    s = z - z.max(axis=1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=1, keepdims=True)
