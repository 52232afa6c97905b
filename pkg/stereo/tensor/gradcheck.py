"""Central finite-difference verification of analytic gradients."""

import logging
from typing import Callable, Dict, Optional

import numpy as np

from stereo.tensor.tensor import Tensor

logger = logging.getLogger(__name__)

Graph = Callable[[], Tensor]


def _scalarize(out: Tensor, projection: Optional[np.ndarray]) -> float:
    if out.data.ndim == 0:
        return float(out.data)
    return float((out.data * projection).sum())


def gradcheck(
    graph: Graph,
    leaves: Dict[str, Tensor],
    epsilon: float = 1e-5,
    max_entries: int = 32,
    seed: int = 0,
    atol: float = 1e-8,
) -> Dict[str, float]:
    """
    Compare analytic and numeric gradients for every leaf tensor.

    ``graph`` rebuilds the computation from ``leaves`` on each call. A
    non-scalar output is reduced with a fixed random projection so every
    output element takes part. Leaves with more than ``max_entries`` entries
    are sampled on a seeded subset. Returns per-leaf relative error
    ‖analytic − numeric‖∞ / max(‖analytic‖∞, ‖numeric‖∞), or 0 when the
    absolute difference is within ``atol`` (leaves whose true gradient is 0).
    """
    rng = np.random.default_rng(seed)
    for tensor in leaves.values():
        if tensor.data.dtype != np.float64:
            logger.warning("gradcheck on %s in %s precision", tensor.name, tensor.data.dtype)
        tensor.data = np.ascontiguousarray(tensor.data)
        tensor.requires_grad = True
        tensor.zero_grad()

    out = graph()
    projection = None if out.data.ndim == 0 else rng.standard_normal(out.shape).astype(out.dtype)
    out.backward(None if projection is None else projection)

    errors: Dict[str, float] = {}
    for name, tensor in leaves.items():
        analytic_full = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        flat = tensor.data.reshape(-1)
        indices = np.arange(flat.size)
        if flat.size > max_entries:
            indices = np.sort(rng.choice(flat.size, size=max_entries, replace=False))

        numeric = np.empty(indices.size)
        for slot, idx in enumerate(indices):
            original = flat[idx]
            flat[idx] = original + epsilon
            plus = _scalarize(graph(), projection)
            flat[idx] = original - epsilon
            minus = _scalarize(graph(), projection)
            flat[idx] = original
            numeric[slot] = (plus - minus) / (2.0 * epsilon)

        analytic = analytic_full.reshape(-1)[indices]
        diff = float(np.abs(analytic - numeric).max())
        scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-12)
        errors[name] = 0.0 if diff <= atol else diff / scale
        logger.debug(
            "gradcheck %s: rel_err=%.3e abs_err=%.3e over %d entries", name, errors[name], diff, indices.size
        )
    return errors


def max_relative_error(errors: Dict[str, float]) -> float:
    return max(errors.values()) if errors else 0.0
