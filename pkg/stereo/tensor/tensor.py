"""Tensor carrier and the reverse-mode graph it records."""

import logging
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from stereo.errors import ShapeError

logger = logging.getLogger(__name__)


class OpKind(str, Enum):
    """Kinds of graph nodes the networks are built from."""
    CONV = "conv"
    POOL = "pool"
    DECONV = "deconv"
    BATCHNORM = "batchnorm"
    RELU = "relu"
    CONCAT = "concat"
    RESHAPE = "reshape"
    CORRELATION = "correlation"
    PAD = "pad"
    LOSS = "loss"


class Tensor:
    """
    Dense array with an optional gradient slot.

    Activations are rank-4 (batch, channels, rows, cols); parameters such as
    biases are rank-1. The dtype of ``data`` is preserved, which is how the
    same code runs in single precision for training and double precision for
    gradient checks.
    """

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        creator: Optional["Function"] = None,
        name: Optional[str] = None,
    ):
        self.data = np.asarray(data)
        if self.data.dtype.kind != "f":
            self.data = self.data.astype(np.float32)
        if any(dim < 1 for dim in self.data.shape):
            raise ShapeError(f"tensor dimensions must be >= 1, got {self.data.shape}")
        self.requires_grad = requires_grad
        self.creator = creator
        self.name = name
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise ShapeError(
                f"gradient shape {grad.shape} does not match tensor shape {self.data.shape}",
                axis=self.name,
            )
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad += grad

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, name=self.name)

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """
        Back-propagate from this tensor through every recorded node.

        ``grad`` defaults to ones, so calling it on a scalar loss gives
        d(loss)/d(leaf) in each leaf's ``grad``.
        """
        if not self.requires_grad:
            return
        if grad is None:
            grad = np.ones_like(self.data)

        order = _topological_order(self)
        grads: Dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.data.dtype)}

        for tensor in reversed(order):
            upstream = grads.pop(id(tensor), None)
            if upstream is None:
                continue
            if tensor.creator is None:
                tensor.accumulate_grad(upstream)
                continue
            input_grads = tensor.creator.run_backward(upstream)
            for inp, inp_grad in zip(tensor.creator.inputs, input_grads):
                if inp_grad is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + inp_grad
                else:
                    grads[key] = inp_grad

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, dtype={self.dtype})"


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        tensor, expanded = stack.pop()
        if expanded:
            order.append(tensor)
            continue
        if id(tensor) in visited:
            continue
        visited.add(id(tensor))
        stack.append((tensor, True))
        if tensor.creator is not None:
            for inp in tensor.creator.inputs:
                if inp.requires_grad and id(inp) not in visited:
                    stack.append((inp, False))
    return order


class Function:
    """
    A node of the autodiff graph.

    Subclasses implement ``forward`` on raw arrays and ``backward`` returning
    one gradient (or None) per input. Whatever backward needs is stored on
    ``self.saved`` during forward.
    """

    kind: OpKind

    def __init__(self, *inputs: Tensor):
        self.inputs: Tuple[Tensor, ...] = inputs
        self.saved: Dict[str, Any] = {}
        self.input_shapes: Tuple[Tuple[int, ...], ...] = tuple(t.shape for t in inputs)
        self._forwarded = False

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        raise NotImplementedError

    def run_backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        if not self._forwarded:
            raise RuntimeError(f"{type(self).__name__}: backward called before forward")
        input_grads = self.backward(grad)
        for shape, inp_grad in zip(self.input_shapes, input_grads):
            if inp_grad is not None and inp_grad.shape != shape:
                raise ShapeError(
                    f"{type(self).__name__} produced gradient of shape {inp_grad.shape} "
                    f"for an input of shape {shape}"
                )
        return input_grads

    @classmethod
    def apply(cls, *inputs: Tensor, **kwargs: Any) -> Tensor:
        node = cls(*inputs)
        out = node.forward(*(t.data for t in inputs), **kwargs)
        node._forwarded = True
        requires_grad = any(t.requires_grad for t in inputs)
        return Tensor(out, requires_grad=requires_grad, creator=node if requires_grad else None)
