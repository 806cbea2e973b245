"""Gradient correctness of the tensor engine, checked against central differences."""

from __future__ import annotations

import numpy as np
import pytest

from nesycl.autodiff import (
	OptimizerState,
	Tape,
	Tensor,
	adam_step,
	backward,
	check_gradients,
	concat,
	cross_entropy,
	kl_divergence,
	log_softmax_rows,
	matmul,
	no_grad,
	segment_sum,
	softmax_rows,
)
from nesycl.exceptions import ConfigurationError
from nesycl.knowledge import addition_knowledge, compile

GRAD_TOL = 1e-4


def _param(rng, *shape, low=-1.0, high=1.0):
	return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


class TestElementwiseGradients:
	def test_arithmetic(self, rng):
		a = _param(rng, 3, 4)
		b = _param(rng, 3, 4, low=0.5, high=2.0)
		err = check_gradients(lambda: ((a * b - a / b + 2.0 * a) ** 2).sum(), [a, b])
		assert err < GRAD_TOL

	def test_broadcasting_bias(self, rng):
		x = _param(rng, 5, 3)
		bias = _param(rng, 3)
		err = check_gradients(lambda: ((x + bias).tanh() * (x - bias)).mean(), [x, bias])
		assert err < GRAD_TOL

	def test_exp_log(self, rng):
		a = _param(rng, 4, low=0.2, high=1.5)
		err = check_gradients(lambda: (a.exp() + a.log()).sum(), [a])
		assert err < GRAD_TOL

	def test_relu_away_from_kink(self, rng):
		values = rng.uniform(0.2, 1.0, size=6) * np.array([1, -1, 1, -1, 1, -1])
		a = Tensor(values, requires_grad=True)
		err = check_gradients(lambda: (a.relu() * a).sum(), [a])
		assert err < GRAD_TOL

	def test_log_floor_blocks_gradient(self):
		a = Tensor([0.0, 0.5], requires_grad=True)
		backward(a.log().sum())
		np.testing.assert_allclose(a.grad, [0.0, 2.0])


class TestStructuralGradients:
	def test_matmul(self, rng):
		a = _param(rng, 3, 4)
		b = _param(rng, 4, 2)
		assert check_gradients(lambda: (matmul(a, b) ** 2).sum(), [a, b]) < GRAD_TOL

	def test_take_with_repeats(self, rng):
		a = _param(rng, 2, 5)
		idx = [0, 3, 3, 1]
		assert check_gradients(lambda: (a.take(idx, axis=1) ** 2).sum(), [a]) < GRAD_TOL

	def test_pick_reshape_transpose(self, rng):
		a = _param(rng, 3, 4)
		err = check_gradients(lambda: (a.reshape(4, 3).T.pick([0, 2, 1]) ** 2).sum(), [a])
		assert err < GRAD_TOL

	def test_concat(self, rng):
		a = _param(rng, 2, 3)
		b = _param(rng, 1, 3)
		assert check_gradients(lambda: (concat([a, b], axis=0) ** 3).sum(), [a, b]) < GRAD_TOL

	def test_segment_sum(self, rng):
		a = _param(rng, 2, 6)
		ids = [0, 0, 1, 3, 3, 3]
		out = segment_sum(a, ids, 4)
		np.testing.assert_allclose(out.data[:, 2], 0.0)
		np.testing.assert_allclose(out.data[:, 3], a.data[:, 3:].sum(axis=1))
		assert check_gradients(lambda: (segment_sum(a, ids, 4) ** 2).sum(), [a]) < GRAD_TOL

	def test_softmax_and_log_softmax(self, rng):
		z = _param(rng, 3, 5, low=-3.0, high=3.0)
		w = rng.normal(size=(3, 5))
		assert check_gradients(lambda: (softmax_rows(z) * w).sum(), [z]) < GRAD_TOL
		assert check_gradients(lambda: (log_softmax_rows(z) * w).sum(), [z]) < GRAD_TOL

	def test_kl_and_cross_entropy(self, rng):
		z = _param(rng, 4, 3)
		target = rng.dirichlet(np.ones(3), size=4)
		assert check_gradients(lambda: kl_divergence(target, softmax_rows(z)).sum(), [z]) < GRAD_TOL
		assert check_gradients(lambda: cross_entropy(target, log_softmax_rows(z)), [z]) < GRAD_TOL


class TestReasoningLayerGradient:
	def test_addition_nll_end_to_end(self, rng):
		"""NLL through encoder logits and the exact addition layer."""
		ck = compile(addition_knowledge())
		z1 = _param(rng, 3, 10)
		z2 = _param(rng, 3, 10)
		y = np.array([4, 9, 13])

		def loss():
			probs = ck.label_distribution([softmax_rows(z1), softmax_rows(z2)])
			return -probs.pick(y).log().mean()

		assert check_gradients(loss, [z1, z2]) < GRAD_TOL


class TestGraphMechanics:
	def test_softmax_rejects_rank_one(self):
		with pytest.raises(ConfigurationError):
			softmax_rows(Tensor([1.0, 2.0]))

	def test_softmax_rejects_nan(self):
		with pytest.raises(ConfigurationError):
			log_softmax_rows(Tensor([[0.0, np.nan]]))

	def test_backward_needs_scalar(self):
		a = Tensor([1.0, 2.0], requires_grad=True)
		with pytest.raises(ConfigurationError):
			backward(a * 2.0)

	def test_no_grad_records_nothing(self):
		a = Tensor([1.0, 2.0], requires_grad=True)
		with no_grad():
			out = (a * a).sum()
		assert not out.requires_grad
		backward(out)
		np.testing.assert_allclose(a.grad, 0.0)

	def test_tape_backward_matches_graph_walk(self, rng):
		a = _param(rng, 3)
		with Tape() as tape:
			loss = ((a * a).exp() * a).sum()
		backward(loss, tape)
		via_tape = a.grad.copy()
		a.zero_grad()
		backward(((a * a).exp() * a).sum())
		np.testing.assert_allclose(via_tape, a.grad, rtol=1e-12)
		assert len(tape) > 0

	def test_shared_node_accumulates(self):
		a = Tensor(3.0, requires_grad=True)
		b = a * a
		backward(b + b)
		np.testing.assert_allclose(a.grad, 12.0)


class TestOptimizer:
	def test_schedule(self):
		state = OptimizerState(base_lr=0.1, decay=0.5)
		state.end_epoch()
		state.end_epoch()
		assert state.effective_lr == pytest.approx(0.025)
		state.reset_for_task()
		assert state.effective_lr == pytest.approx(0.1)

	def test_adam_first_step_moves_by_lr(self):
		p = Tensor([1.0, -1.0], requires_grad=True)
		p.grad = np.array([0.3, -2.0])
		adam_step([p], OptimizerState(base_lr=0.01))
		np.testing.assert_allclose(p.data, [0.99, -0.99], atol=1e-7)
