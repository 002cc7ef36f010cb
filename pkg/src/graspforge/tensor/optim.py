"""Adam optimizer with bias correction over a ParameterSet."""

from __future__ import annotations

import numpy as np

__all__ = ["OptimizerState", "adam_step"]


class OptimizerState:
    """Per-parameter first/second moments plus the shared step counter."""

    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self.step_count = 0
        self.m = {}
        self.v = {}
        for name, t in params.items():
            if t.requires_grad:
                self.m[name] = np.zeros_like(t.data)
                self.v[name] = np.zeros_like(t.data)


def adam_step(params, grads, state):
    """One Adam update; mutates ``params`` data and ``state`` in place.

    ``grads`` maps parameter id to its gradient array; every parameter
    tracked by the state must be present and shape-matched.
    """
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    for name in state.m:
        if name not in grads:
            raise ValueError(f"missing gradient for parameter {name!r}")
        g = np.asarray(grads[name], dtype=np.float64)
        p = params[name]
        if g.shape != p.data.shape:
            raise ValueError(
                f"gradient shape {g.shape} does not match parameter {name!r} shape {p.data.shape}"
            )
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        p.data = p.data - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params, state
