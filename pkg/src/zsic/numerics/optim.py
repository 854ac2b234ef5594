from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .autograd import Tensor


class ParamStore:
    """Named parameter groups with gradient buffers and a trainable flag each.

    A frozen group has ``requires_grad`` switched off, so graphs built while
    it is frozen never route gradient into it.
    """

    def __init__(self):
        self._params = {}
        self._trainable = {}

    def add(self, name, value, trainable=True):
        if name in self._params:
            raise KeyError(f"parameter group {name!r} already registered")
        t = value if isinstance(value, Tensor) else Tensor(value)
        t.name = name
        t.requires_grad = True
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
        self._params[name] = t
        self._trainable[name] = True
        self.set_trainable(name, trainable)
        return t

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def items(self):
        return self._params.items()

    def names(self):
        return list(self._params)

    def is_trainable(self, name):
        return self._trainable[name]

    def set_trainable(self, name, flag):
        self._trainable[name] = bool(flag)
        self._params[name].requires_grad = bool(flag)

    def trainable_names(self):
        return [n for n in self._params if self._trainable[n]]

    @contextmanager
    def only(self, names):
        """Temporarily restrict training to ``names`` (still honouring frozen groups)."""
        saved = dict(self._trainable)
        keep = set(names)
        for n in self._params:
            self.set_trainable(n, saved[n] and n in keep)
        try:
            yield self
        finally:
            for n, flag in saved.items():
                self.set_trainable(n, flag)

    def zero_grad(self):
        for t in self._params.values():
            t.grad[...] = 0.0

    def state_dict(self):
        return {n: t.data.copy() for n, t in self._params.items()}

    def load_state_dict(self, state):
        for n, value in state.items():
            if n not in self._params:
                raise KeyError(f"unknown parameter group {n!r}")
            if self._params[n].shape != value.shape:
                raise ValueError(f"shape mismatch for {n!r}: {value.shape} vs {self._params[n].shape}")
            self._params[n].data[...] = value


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(store, state, lr):
    """Apply one bias-corrected Adam update to trainable groups, then zero all gradients."""
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for name in store.trainable_names():
        p = store[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m, v = state.m[name], state.v[name]
        g = p.grad
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    store.zero_grad()
