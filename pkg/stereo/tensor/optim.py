"""Adam optimizer with bias correction."""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from stereo.errors import ShapeError
from stereo.tensor.tensor import Tensor


@dataclass
class AdamState:
    """Moment accumulators for one parameter plus the shared hyperparameters."""
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param: np.ndarray, **hyper) -> "AdamState":
        return cls(m=np.zeros_like(param), v=np.zeros_like(param), **hyper)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState) -> Tuple[np.ndarray, AdamState]:
    """Apply one bias-corrected Adam update in place; returns (param, state)."""
    if grad.shape != param.shape:
        raise ShapeError(f"gradient shape {grad.shape} does not match parameter shape {param.shape}")
    if state.m.shape != param.shape:
        raise ShapeError(f"moment shape {state.m.shape} does not match parameter shape {param.shape}")

    state.step += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grad
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * (grad * grad)

    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    param -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return param, state


@dataclass
class Adam:
    """Adam over a named parameter set; one ``AdamState`` per parameter."""
    params: Dict[str, Tensor]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    states: Dict[str, AdamState] = field(default_factory=dict)

    def __post_init__(self):
        for name, tensor in self.params.items():
            self.states[name] = AdamState.for_param(
                tensor.data, lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps
            )

    def set_lr(self, lr: float) -> None:
        self.lr = lr
        for state in self.states.values():
            state.lr = lr

    def zero_grad(self) -> None:
        for tensor in self.params.values():
            tensor.zero_grad()

    def step(self) -> None:
        for name, tensor in self.params.items():
            grad = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
            adam_step(tensor.data, grad, self.states[name])

    @property
    def step_count(self) -> int:
        return next(iter(self.states.values())).step if self.states else 0

    def named_grads(self) -> Iterable[Tuple[str, Optional[np.ndarray]]]:
        return ((name, t.grad) for name, t in self.params.items())
