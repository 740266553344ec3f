"""Minimal dense neural network with hand-rolled backpropagation.

Provides exactly what the Q-learning agents need: a ReLU multilayer
perceptron with either a plain linear output head or a dueling head
(scalar state-value stream plus mean-centered advantage stream), gradients
of the squared temporal-difference error, and a non-centered RMSProp
optimizer. No automatic differentiation framework is involved; gradients are
derived by explicit reverse-mode passes and are validated against finite
differences in the test suite.

Parameters are exposed as a flat list of arrays in declaration order
(hidden weight/bias pairs, then head parameters); gradient sets and optimizer
state mirror that list.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DenseNet",
    "RmsPropState",
    "forward",
    "forward_batch",
    "dueling_combine",
    "td_backward",
    "td_backward_batch",
    "rmsprop_step",
    "clone_params",
    "sync",
    "save_checkpoint",
    "load_checkpoint",
]

PLAIN = "plain"
DUELING = "dueling"


class DenseNet:
    """Fully connected ReLU network with a plain or dueling output head.

    Weights are initialized uniformly in [-1/sqrt(fan_in), +1/sqrt(fan_in)]
    and biases at zero, reproducibly from the supplied generator.
    """

    def __init__(
        self,
        input_dim: int,
        hidden_sizes: list[int],
        output_dim: int,
        head: str = PLAIN,
        rng: np.random.Generator | None = None,
    ):
        if input_dim < 1 or output_dim < 1:
            raise ValueError("input_dim and output_dim must be >= 1")
        if any(h < 1 for h in hidden_sizes):
            raise ValueError("hidden sizes must be >= 1")
        if head not in (PLAIN, DUELING):
            raise ValueError(f"head must be '{PLAIN}' or '{DUELING}', got {head!r}")
        rng = rng if rng is not None else np.random.default_rng()
        self.input_dim = int(input_dim)
        self.hidden_sizes = [int(h) for h in hidden_sizes]
        self.output_dim = int(output_dim)
        self.head = head

        def init_layer(fan_in: int, fan_out: int) -> tuple[np.ndarray, np.ndarray]:
            bound = 1.0 / np.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            return w, np.zeros(fan_out)

        self.hidden: list[tuple[np.ndarray, np.ndarray]] = []
        prev = self.input_dim
        for width in self.hidden_sizes:
            self.hidden.append(init_layer(prev, width))
            prev = width
        if head == PLAIN:
            self.head_params = list(init_layer(prev, self.output_dim))
        else:
            w_v, b_v = init_layer(prev, 1)
            w_a, b_a = init_layer(prev, self.output_dim)
            self.head_params = [w_v, b_v, w_a, b_a]

    def params(self) -> list[np.ndarray]:
        """All parameter arrays in declaration order (views, not copies)."""
        out: list[np.ndarray] = []
        for w, b in self.hidden:
            out.extend((w, b))
        out.extend(self.head_params)
        return out

    def architecture(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_sizes": self.hidden_sizes,
            "output_dim": self.output_dim,
            "head": self.head,
        }


def forward_batch(net: DenseNet, x: np.ndarray) -> np.ndarray:
    """Q-values for a batch of inputs, shape (batch, output_dim)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ValueError(f"expected input shape (batch, {net.input_dim}), got {x.shape}")
    h = x
    for w, b in net.hidden:
        h = np.maximum(h @ w + b, 0.0)
    if net.head == PLAIN:
        w, b = net.head_params
        return h @ w + b
    w_v, b_v, w_a, b_a = net.head_params
    v = h @ w_v + b_v
    a = h @ w_a + b_a
    return v + a - a.mean(axis=1, keepdims=True)


def forward(net: DenseNet, x: np.ndarray) -> np.ndarray:
    """Q-values for a single input vector, shape (output_dim,)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a flat input vector, got shape {x.shape}")
    return forward_batch(net, x[None, :])[0]


def dueling_combine(V: float, A: np.ndarray) -> np.ndarray:
    """Combine value and advantage streams: Q_j = V + A_j - mean(A)."""
    A = np.asarray(A, dtype=np.float64)
    if A.size == 0:
        raise ValueError("advantage vector must be nonempty")
    return V + A - A.mean()


def td_backward_batch(
    net: DenseNet,
    x: np.ndarray,
    action_indices: np.ndarray,
    targets: np.ndarray,
) -> tuple[list[np.ndarray], float]:
    """Batch-averaged gradients of the squared TD error, plus the loss.

    Loss is mean((target - Q[action])**2) over the batch, evaluated at the
    current parameters (before any update). Gradients follow the same
    declaration order as ``net.params()``.
    """
    x = np.asarray(x, dtype=np.float64)
    action_indices = np.asarray(action_indices, dtype=np.intp)
    targets = np.asarray(targets, dtype=np.float64)
    batch = x.shape[0]
    if np.any(action_indices < 0) or np.any(action_indices >= net.output_dim):
        raise ValueError("action index out of range")

    # Forward pass, keeping pre-activations for the ReLU masks.
    h = x
    pre_acts: list[np.ndarray] = []
    acts: list[np.ndarray] = [x]
    for w, b in net.hidden:
        z = h @ w + b
        pre_acts.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)

    rows = np.arange(batch)
    if net.head == PLAIN:
        w_out, b_out = net.head_params
        q = h @ w_out + b_out
    else:
        w_v, b_v, w_a, b_a = net.head_params
        v = h @ w_v + b_v
        a = h @ w_a + b_a
        q = v + a - a.mean(axis=1, keepdims=True)

    residual = targets - q[rows, action_indices]
    loss = float(np.mean(residual**2))
    # d loss / d Q[action] = -2 * residual / batch, zero for other outputs of
    # a plain head; a dueling head spreads it through V and the mean of A.
    coeff = -2.0 * residual / batch

    if net.head == PLAIN:
        g_out = np.zeros_like(q)
        g_out[rows, action_indices] = coeff
        g_w_out = h.T @ g_out
        g_b_out = g_out.sum(axis=0)
        g_h = g_out @ w_out.T
        head_grads = [g_w_out, g_b_out]
    else:
        g_v = coeff[:, None]
        g_a = np.full_like(a, -1.0 / net.output_dim)
        g_a[rows, action_indices] += 1.0
        g_a *= coeff[:, None]
        g_w_v = h.T @ g_v
        g_b_v = g_v.sum(axis=0)
        g_w_a = h.T @ g_a
        g_b_a = g_a.sum(axis=0)
        g_h = g_v @ w_v.T + g_a @ w_a.T
        head_grads = [g_w_v, g_b_v, g_w_a, g_b_a]

    hidden_grads: list[np.ndarray] = []
    for i in range(len(net.hidden) - 1, -1, -1):
        w, _ = net.hidden[i]
        g_z = g_h * (pre_acts[i] > 0.0)
        hidden_grads.append(g_z.sum(axis=0))  # bias
        hidden_grads.append(acts[i].T @ g_z)  # weight
        g_h = g_z @ w.T

    grads: list[np.ndarray] = []
    for i in range(len(net.hidden)):
        grads.append(hidden_grads[-(2 * i + 1)])
        grads.append(hidden_grads[-(2 * i + 2)])
    grads.extend(head_grads)
    return grads, loss


def td_backward(
    net: DenseNet, x: np.ndarray, action_index: int, target_y: float
) -> list[np.ndarray]:
    """Gradients of (target_y - Q(x)[action_index])**2 for one sample."""
    x = np.asarray(x, dtype=np.float64)
    grads, _ = td_backward_batch(
        net, x[None, :], np.array([action_index]), np.array([target_y])
    )
    return grads


@dataclass
class RmsPropState:
    """Non-centered RMSProp accumulator and hyperparameters.

    Update rule, elementwise per parameter theta with gradient g:
        v <- kappa * v + (1 - kappa) * g**2
        theta <- theta - eta * g / sqrt(v + epsilon_div)
    """

    v: list[np.ndarray] = field(default_factory=list)
    kappa: float = 0.95
    eta: float = 0.001
    epsilon_div: float = 1e-8

    @classmethod
    def for_params(
        cls, params: list[np.ndarray], kappa: float = 0.95, eta: float = 0.001,
        epsilon_div: float = 1e-8,
    ) -> "RmsPropState":
        if not 0.0 <= kappa < 1.0:
            raise ValueError("kappa must lie in [0, 1)")
        if eta <= 0.0:
            raise ValueError("eta must be positive")
        return cls(
            v=[np.zeros_like(p) for p in params],
            kappa=kappa, eta=eta, epsilon_div=epsilon_div,
        )


def rmsprop_step(
    params: list[np.ndarray], grads: list[np.ndarray], state: RmsPropState
) -> tuple[list[np.ndarray], RmsPropState]:
    """One elementwise RMSProp update; mutates params and state in place."""
    if len(params) != len(grads) or len(params) != len(state.v):
        raise ValueError("params, grads and optimizer state must align")
    for p, g, v in zip(params, grads, state.v):
        if p.shape != g.shape or p.shape != v.shape:
            raise ValueError("shape mismatch between params, grads and state")
        v *= state.kappa
        v += (1.0 - state.kappa) * g * g
        p -= state.eta * g / np.sqrt(v + state.epsilon_div)
    return params, state


def clone_params(src: DenseNet) -> DenseNet:
    """Deep copy with identical architecture and parameters."""
    dst = DenseNet(
        src.input_dim, src.hidden_sizes, src.output_dim, src.head,
        rng=np.random.default_rng(0),
    )
    sync(dst, src)
    return dst


def sync(dst: DenseNet, src: DenseNet) -> None:
    """Copy all parameters of ``src`` into ``dst`` (architectures must match)."""
    if dst.architecture() != src.architecture():
        raise ValueError("cannot sync networks with different architectures")
    for d, s in zip(dst.params(), src.params()):
        np.copyto(d, s)


def save_checkpoint(net: DenseNet, path: str, extra: dict | None = None) -> None:
    """Write a self-describing checkpoint.

    Layout: magic line, one JSON header line (architecture, per-array shapes,
    and an optional ``extra`` metadata dict), then the raw parameter arrays in
    declaration order as row-major little-endian float64.
    """
    header = dict(net.architecture())
    header["shapes"] = [list(p.shape) for p in net.params()]
    header["extra"] = extra if extra is not None else {}
    with open(path, "wb") as fh:
        fh.write(b"RELAYNET1\n")
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for p in net.params():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_checkpoint(path: str) -> tuple[DenseNet, dict]:
    """Read a checkpoint written by ``save_checkpoint``."""
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != b"RELAYNET1\n":
            raise ValueError(f"{path} is not a recognized network checkpoint")
        header = json.loads(fh.readline().decode("utf-8"))
        net = DenseNet(
            header["input_dim"], header["hidden_sizes"], header["output_dim"],
            header["head"], rng=np.random.default_rng(0),
        )
        for p, shape in zip(net.params(), header["shapes"]):
            if list(p.shape) != shape:
                raise ValueError("checkpoint shape table does not match architecture")
            raw = fh.read(p.size * 8)
            if len(raw) != p.size * 8:
                raise ValueError("checkpoint truncated")
            np.copyto(p, np.frombuffer(raw, dtype="<f8").reshape(p.shape))
    return net, header["extra"]
