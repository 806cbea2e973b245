"""Probability heads and losses built on ``Tensor``.

All log evaluations are floored at ``EPS = 1e-12`` so that a label which
becomes knowledge-inconsistent mid-training yields a large but finite loss.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import ConfigurationError
from .tensor import EPS, ArrayLike, Tensor, as_tensor


def _check_finite(name: str, t: Tensor) -> None:
	if np.isnan(t.data).any():
		raise ConfigurationError(f"{name}: NaN in input")


def softmax_rows(logits: ArrayLike) -> Tensor:
	"""Row-wise softmax of a rank-2 tensor, stabilised by subtracting the row max."""
	logits = as_tensor(logits)
	if logits.ndim != 2:
		raise ConfigurationError(f"softmax_rows: expected a rank-2 tensor, got shape {logits.shape}")
	_check_finite("softmax_rows", logits)
	shifted = logits.data - logits.data.max(axis=1, keepdims=True)
	exps = np.exp(shifted)
	probs = exps / exps.sum(axis=1, keepdims=True)

	def _backward(g: np.ndarray) -> None:
		logits._accumulate(probs * (g - (g * probs).sum(axis=1, keepdims=True)))

	return Tensor._result(probs, (logits,), "softmax", _backward)


def log_softmax_rows(logits: ArrayLike) -> Tensor:
	"""Row-wise log-softmax of a rank-2 tensor."""
	logits = as_tensor(logits)
	if logits.ndim != 2:
		raise ConfigurationError(f"log_softmax_rows: expected a rank-2 tensor, got shape {logits.shape}")
	_check_finite("log_softmax_rows", logits)
	shifted = logits.data - logits.data.max(axis=1, keepdims=True)
	log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
	out = shifted - log_norm
	probs = np.exp(out)

	def _backward(g: np.ndarray) -> None:
		logits._accumulate(g - probs * g.sum(axis=1, keepdims=True))

	return Tensor._result(out, (logits,), "log_softmax", _backward)


def kl_divergence(p: ArrayLike, q: ArrayLike) -> Tensor:
	"""KL(p || q) over the last axis, with q floored at ``EPS`` and 0·log 0 := 0.

	Rank-1 inputs give a scalar, rank-2 inputs one divergence per row.

	Raises:
		ConfigurationError: If the distributions have different lengths
	"""
	p, q = as_tensor(p), as_tensor(q)
	if p.shape[-1] != q.shape[-1]:
		raise ConfigurationError(f"kl_divergence: length mismatch {p.shape[-1]} != {q.shape[-1]}")
	terms = p * (p.log(EPS) - q.log(EPS))
	return terms.sum(axis=-1)


def nll(prob_of_truth: ArrayLike) -> Tensor:
	"""Negative log-likelihood ``-log(max(p, EPS))``, elementwise."""
	return -as_tensor(prob_of_truth).log(EPS)


def mse(a: ArrayLike, b: ArrayLike) -> Tensor:
	"""Mean squared error over all entries."""
	diff = as_tensor(a) - as_tensor(b)
	return (diff * diff).mean()


def cross_entropy(target_probs: ArrayLike, log_probs: ArrayLike) -> Tensor:
	"""Mean over rows of ``-sum_k target[k] * log_probs[k]``."""
	target_probs, log_probs = as_tensor(target_probs), as_tensor(log_probs)
	per_row = -(target_probs * log_probs).sum(axis=-1)
	return per_row.mean()
