"""Layer zoo: dense stacks, the recurrent context cell, time features.

Parameters live in flat ``{name: Tensor}`` dicts so optimizers and the
checkpoint format can treat every model uniformly.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor


def init_dense(rng: np.random.Generator, fan_in: int, fan_out: int, scale: float = 1.0):
    """Weight ~ N(0, scale/fan_in), bias 0; suits tanh stacks."""
    w = rng.standard_normal((fan_in, fan_out)) * np.sqrt(scale / fan_in)
    b = np.zeros(fan_out)
    return w, b


class MLP:
    """Dense stack with tanh hidden activations and a linear head."""

    def __init__(self, name: str, dims: list[int], rng: np.random.Generator,
                 zero_last: bool = False):
        self.name = name
        self.dims = list(dims)
        self.params: dict[str, Tensor] = {}
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            w, bias = init_dense(rng, a, b)
            if zero_last and i == len(dims) - 2:
                w = np.zeros_like(w)
            self.params[f"{name}.w{i}"] = Tensor(w, requires_grad=True)
            self.params[f"{name}.b{i}"] = Tensor(bias, requires_grad=True)

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    def __call__(self, x: Tensor) -> Tensor:
        h = x
        for i in range(self.n_layers):
            h = T.add(T.matmul(h, self.params[f"{self.name}.w{i}"]),
                      self.params[f"{self.name}.b{i}"])
            if i < self.n_layers - 1:
                h = T.tanh(h)
        return h

    def forward_np(self, x: np.ndarray) -> np.ndarray:
        """Tape-free forward; same op order as __call__ so results match bitwise."""
        h = np.asarray(x, dtype=np.float64)
        for i in range(self.n_layers):
            h = h @ self.params[f"{self.name}.w{i}"].data + self.params[f"{self.name}.b{i}"].data
            if i < self.n_layers - 1:
                h = np.tanh(h)
        return h


class GRUCell:
    """Single gated recurrent cell used as the causal context summarizer."""

    GATES = ("r", "z", "h")

    def __init__(self, name: str, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.name = name
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.params: dict[str, Tensor] = {}
        for gate in self.GATES:
            w, b = init_dense(rng, input_dim, hidden_dim)
            u, _ = init_dense(rng, hidden_dim, hidden_dim)
            self.params[f"{name}.w{gate}"] = Tensor(w, requires_grad=True)
            self.params[f"{name}.u{gate}"] = Tensor(u, requires_grad=True)
            self.params[f"{name}.b{gate}"] = Tensor(b, requires_grad=True)

    def _p(self, key: str) -> Tensor:
        return self.params[f"{self.name}.{key}"]

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        return T.gru_cell(x, h,
                          self._p("wr"), self._p("ur"), self._p("br"),
                          self._p("wz"), self._p("uz"), self._p("bz"),
                          self._p("wh"), self._p("uh"), self._p("bh"))

    def step_np(self, x: np.ndarray, h: np.ndarray) -> np.ndarray:
        """Tape-free step, op order identical to the fused tape op."""
        p = lambda k: self._p(k).data
        r = 1.0 / (1.0 + np.exp(-(x @ p("wr") + h @ p("ur") + p("br"))))
        z = 1.0 / (1.0 + np.exp(-(x @ p("wz") + h @ p("uz") + p("bz"))))
        c = np.tanh(x @ p("wh") + (r * h) @ p("uh") + p("bh"))
        return (1.0 - z) * h + z * c


def time_features(t, n_pairs: int = 4) -> np.ndarray:
    """Sinusoidal features of the flow time: [sin(2^k pi t), cos(2^k pi t)].

    Accepts a scalar or an array of times; output gains a trailing axis of
    length 2 * n_pairs.
    """
    t = np.asarray(t, dtype=np.float64)
    freqs = np.pi * (2.0 ** np.arange(n_pairs))
    ang = t[..., None] * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)
