from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .tensor import Tensor

# learning rate 1e-4, dropping to 1e-5 after 60k and 1e-6 after 100k updates
PAPER_SCHEDULE: tuple[tuple[int, float], ...] = ((0, 1e-4), (60_000, 1e-5), (100_000, 1e-6))


class TrainingDivergenceError(RuntimeError):
    pass


@dataclass
class AdamState:
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    schedule: tuple[tuple[int, float], ...] = PAPER_SCHEDULE
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.step < 0:
            raise ValueError("Adam step must be non-negative")
        self.schedule = tuple((int(t), float(lr)) for t, lr in self.schedule)
        if not self.schedule or self.schedule[0][0] != 0:
            raise ValueError("schedule must start at step 0")
        for (t0, lr0), (t1, lr1) in zip(self.schedule, self.schedule[1:]):
            if t1 <= t0:
                raise ValueError("schedule thresholds must be strictly increasing")
            if lr1 >= lr0:
                raise ValueError("schedule rates must be strictly decreasing")

    def learning_rate(self, step: int | None = None) -> float:
        step = self.step if step is None else step
        lr = self.schedule[0][1]
        for threshold, rate in self.schedule:
            if step >= threshold:
                lr = rate
        return lr


def adam_step(params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray], state: AdamState) -> AdamState:
    """Apply one bias-corrected Adam update in place and advance ``state.step``.

    The learning rate is looked up from the schedule with the number of
    updates already applied, so the 60001st update is the first at 1e-5.
    """
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise TrainingDivergenceError(f"non-finite gradient for parameter {name!r} at step {state.step}")
    lr = state.learning_rate()
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.shape:
            raise ValueError(f"gradient for {name!r} has shape {g.shape}, parameter has {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)).astype(p.data.dtype, copy=False)
    state.step = t
    return state
