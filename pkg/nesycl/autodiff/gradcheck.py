"""Central finite-difference oracle for analytic gradients."""

from __future__ import annotations

from typing import Callable, List, Sequence

import numpy as np

from .tensor import Tensor, backward

DEFAULT_STEP = 1e-5


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
	"""``||a - n|| / max(||a|| + ||n||, 1e-8)`` over the whole array."""
	diff = np.linalg.norm(np.ravel(analytic) - np.ravel(numeric))
	scale = np.linalg.norm(np.ravel(analytic)) + np.linalg.norm(np.ravel(numeric))
	return float(diff / max(scale, 1e-8))


def numerical_gradient(fn: Callable[[], Tensor], param: Tensor, h: float = DEFAULT_STEP) -> np.ndarray:
	"""Central differences of the scalar ``fn()`` with respect to ``param`` (perturbed in place)."""
	grad = np.zeros_like(param.data)
	flat = param.data.reshape(-1)
	out = grad.reshape(-1)
	for i in range(flat.size):
		original = flat[i]
		flat[i] = original + h
		plus = fn().item()
		flat[i] = original - h
		minus = fn().item()
		flat[i] = original
		out[i] = (plus - minus) / (2.0 * h)
	return grad


def analytic_gradients(fn: Callable[[], Tensor], params: Sequence[Tensor]) -> List[np.ndarray]:
	for p in params:
		p.zero_grad()
	loss = fn()
	backward(loss)
	return [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]


def check_gradients(fn: Callable[[], Tensor], params: Sequence[Tensor], h: float = DEFAULT_STEP) -> float:
	"""Largest relative error between analytic and numerical gradients over ``params``."""
	analytic = analytic_gradients(fn, params)
	worst = 0.0
	for p, a in zip(params, analytic):
		worst = max(worst, relative_error(a, numerical_gradient(fn, p, h)))
	return worst
