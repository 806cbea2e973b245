"""Loss terms of the continual strategies.

- ``cool_loss``: alpha * sum_j KL(p(C_j|x) || q_j) - beta * log p(y|x;K), averaged
  over a replay batch; q_j are the marginals stored at insertion time and K
  is the knowledge of the item's own task
- ``der_loss``: mean squared error between live and stored label scores
- ``ewc_penalty``: lambda * sum_i F_i (theta_i - theta*_i)^2
- ``lwf_loss``: temperature-scaled cross-entropy from the past model's
  softened scores to the live ones on current-task inputs

Every term returns a zero tensor when its inputs are missing (empty
buffer, first task).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..autodiff import Tensor, backward, kl_divergence, log_softmax_rows, no_grad, softmax_rows, zero_grad
from ..benchmarks.tasks import Dataset
from ..exceptions import ConfigurationError
from ..knowledge.compiled import CompiledKnowledge
from ..logger_utils import get_resilient_logger
from ..models.predictors import Prediction, Predictor
from .buffer import ReplayBatch

KnowledgeResolver = Callable[[str], Optional[CompiledKnowledge]]


def _log():
	return get_resilient_logger("nesycl.continual")


def _zero() -> Tensor:
	return Tensor(0.0)


@dataclass
class ReplayForward:
	"""Live outputs on a replay batch; ``parts`` holds one prediction per knowledge group."""

	marginals: List[Tensor]
	parts: List[Tuple[np.ndarray, Prediction]]


def replay_forward(
	predictor: Predictor,
	batch: ReplayBatch,
	resolver: Optional[KnowledgeResolver] = None,
	train: bool = False,
) -> ReplayForward:
	"""Encode a replay batch once and score each group under its origin knowledge."""
	marginals = predictor.concept_model.encode(batch.x, train=train)
	parts: List[Tuple[np.ndarray, Prediction]] = []
	for key in sorted(batch.groups):
		rows = batch.groups[key]
		ck = resolver(key) if resolver is not None else None
		sliced = [m.take(rows, axis=0) for m in marginals]
		parts.append((rows, predictor.from_marginals(sliced, knowledge=ck)))
	return ReplayForward(marginals, parts)


def concept_rehearsal(live: ReplayForward, batch: ReplayBatch) -> Tensor:
	"""Batch mean of the per-slot KL divergences, summed over slots."""
	total: Optional[Tensor] = None
	for m, q in zip(live.marginals, batch.concept_marginals):
		term = kl_divergence(m, q).sum()
		total = term if total is None else total + term
	return total * (1.0 / len(batch))


def replay_nll(live: ReplayForward, batch: ReplayBatch) -> Tensor:
	total: Optional[Tensor] = None
	for rows, pred in live.parts:
		term = -pred.label_log_probs.pick(batch.y[rows]).sum()
		total = term if total is None else total + term
	return total * (1.0 / len(batch))


def score_distillation(live: ReplayForward, batch: ReplayBatch) -> Tensor:
	total: Optional[Tensor] = None
	for rows, pred in live.parts:
		diff = pred.distill_scores - batch.label_scores[rows]
		term = (diff * diff).sum()
		total = term if total is None else total + term
	return total * (1.0 / batch.label_scores.size)


def cool_loss(
	predictor: Predictor,
	batch: Optional[ReplayBatch],
	resolver: Optional[KnowledgeResolver] = None,
	alpha: float = 1.0,
	beta: float = 1.0,
	train: bool = False,
	live: Optional[ReplayForward] = None,
) -> Tensor:
	"""Concept rehearsal plus knowledge-scored label replay on a buffer batch.

	Example:
		One item, one binary slot, live [0.5, 0.5], stored [0.25, 0.75],
		alpha=1, beta=0 gives KL = 0.1438.
	"""
	if batch is None or len(batch) == 0 or (alpha == 0 and beta == 0):
		return _zero()
	live = live or replay_forward(predictor, batch, resolver, train=train)
	loss: Optional[Tensor] = None
	if alpha:
		loss = concept_rehearsal(live, batch) * alpha
	if beta:
		term = replay_nll(live, batch) * beta
		loss = term if loss is None else loss + term
	return loss


def der_loss(
	predictor: Predictor,
	batch: Optional[ReplayBatch],
	resolver: Optional[KnowledgeResolver] = None,
	train: bool = False,
	live: Optional[ReplayForward] = None,
) -> Tensor:
	"""MSE between live and stored label scores, averaged over batch and labels."""
	if batch is None or len(batch) == 0:
		return _zero()
	live = live or replay_forward(predictor, batch, resolver, train=train)
	return score_distillation(live, batch)


@dataclass
class FisherDiag:
	"""Diagonal empirical Fisher and the parameters it was estimated at."""

	values: List[np.ndarray]
	reference: List[np.ndarray]

	def __post_init__(self) -> None:
		if len(self.values) != len(self.reference):
			raise ConfigurationError("FisherDiag: values and reference differ in length")
		for f, r in zip(self.values, self.reference):
			if f.shape != r.shape:
				raise ConfigurationError(f"FisherDiag: shape {f.shape} does not match {r.shape}")
			if (f < 0).any():
				raise ConfigurationError("FisherDiag: negative entries")


def _parameters(model: Union[Predictor, Sequence[Tensor]]) -> List[Tensor]:
	return model.parameters() if isinstance(model, Predictor) else list(model)


def ewc_penalty(
	model: Union[Predictor, Sequence[Tensor]],
	fisher: Optional[FisherDiag],
	lam: float = 1.0,
) -> Tensor:
	"""``lam * sum_i F_i (theta_i - theta*_i)^2``; zero without a Fisher estimate."""
	if fisher is None or lam == 0:
		return _zero()
	params = _parameters(model)
	if len(params) != len(fisher.values):
		raise ConfigurationError(f"ewc_penalty: {len(params)} parameters, Fisher has {len(fisher.values)}")
	total: Optional[Tensor] = None
	for p, f, ref in zip(params, fisher.values, fisher.reference):
		diff = p - ref
		term = (diff * diff * f).sum()
		total = term if total is None else total + term
	return total * lam


def estimate_fisher(
	predictor: Predictor,
	dataset: Dataset,
	knowledge: Optional[CompiledKnowledge] = None,
) -> FisherDiag:
	"""Average of squared per-example NLL gradients over ``dataset``."""
	params = predictor.parameters()
	values = [np.zeros_like(p.data) for p in params]
	n = len(dataset)
	for i in range(n):
		zero_grad(params)
		out = predictor.forward(dataset.x[i : i + 1], knowledge=knowledge)
		backward(predictor.label_nll(out, dataset.labels[i : i + 1]))
		for acc, p in zip(values, params):
			if p.grad is not None:
				acc += p.grad * p.grad
	zero_grad(params)
	if n:
		values = [v / n for v in values]
	_log().debug(f"Estimated Fisher over {n} examples, mean={np.mean([v.mean() for v in values]) if values else 0.0:.3e}")
	return FisherDiag(values, [p.data.copy() for p in params])


def lwf_loss(
	predictor: Predictor,
	past: Optional[Predictor],
	x: np.ndarray,
	temperature: float = 2.0,
	lam: float = 1.0,
	live: Optional[Prediction] = None,
) -> Tensor:
	"""``lam * CE(softmax(past / T), log_softmax(live / T))`` on current-task inputs."""
	if past is None or lam == 0:
		return _zero()
	with no_grad():
		target = softmax_rows(past.forward(x).distill_scores.data / temperature).data
	live = live or predictor.forward(x)
	log_probs = log_softmax_rows(live.distill_scores / temperature)
	return -(log_probs * target).sum(axis=1).mean() * lam
