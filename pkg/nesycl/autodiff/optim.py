"""Adam with a per-task exponential learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .tensor import Tensor

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class OptimizerState:
	"""Adam moments plus the exponential-decay schedule.

	The effective learning rate is ``base_lr * decay ** epochs_elapsed``;
	``reset_for_task`` restores it (and clears the moments) at every task
	boundary.
	"""

	base_lr: float = 1e-3
	decay: float = 1.0
	beta1: float = ADAM_BETA1
	beta2: float = ADAM_BETA2
	eps: float = ADAM_EPS
	step: int = 0
	epochs_elapsed: int = 0
	first_moments: List[np.ndarray] = field(default_factory=list)
	second_moments: List[np.ndarray] = field(default_factory=list)

	@property
	def effective_lr(self) -> float:
		return self.base_lr * self.decay ** self.epochs_elapsed

	def end_epoch(self) -> None:
		self.epochs_elapsed += 1

	def reset_for_task(self) -> None:
		self.step = 0
		self.epochs_elapsed = 0
		self.first_moments = []
		self.second_moments = []

	def _ensure_moments(self, params: Sequence[Tensor]) -> None:
		if len(self.first_moments) != len(params) or any(
			m.shape != p.shape for m, p in zip(self.first_moments, params)
		):
			self.first_moments = [np.zeros_like(p.data) for p in params]
			self.second_moments = [np.zeros_like(p.data) for p in params]


def zero_grad(params: Sequence[Tensor]) -> None:
	for p in params:
		p.zero_grad()


def adam_step(params: Sequence[Tensor], state: OptimizerState) -> None:
	"""Apply one bias-corrected Adam update in place."""
	state._ensure_moments(params)
	state.step += 1
	lr = state.effective_lr
	correction1 = 1.0 - state.beta1 ** state.step
	correction2 = 1.0 - state.beta2 ** state.step
	for i, p in enumerate(params):
		if p.grad is None:
			continue
		g = p.grad
		m = state.first_moments[i] = state.beta1 * state.first_moments[i] + (1.0 - state.beta1) * g
		v = state.second_moments[i] = state.beta2 * state.second_moments[i] + (1.0 - state.beta2) * g * g
		m_hat = m / correction1
		v_hat = v / correction2
		p.data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
