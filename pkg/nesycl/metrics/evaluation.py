"""Per-task accuracies and concept confusion matrices.

Label accuracy is argmax agreement with the record's label index. Concept
accuracy is the mean over slots of per-slot argmax accuracy. The masked
variants restrict the argmax to the labels (or concept values) admissible
in the evaluated task, which is how Task-IL is measured.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..autodiff import no_grad
from ..benchmarks.tasks import Dataset
from ..exceptions import ConfigurationError
from ..knowledge.compiled import CompiledKnowledge
from ..logger_utils import get_resilient_logger
from ..models.predictors import Predictor

EVAL_BATCH = 512


def _log():
	return get_resilient_logger("nesycl.metrics")


@dataclass(frozen=True)
class TaskEvaluation:
	acc_y: float
	acc_c: float
	acc_y_masked: float
	acc_c_masked: float
	n: int


@dataclass
class ConfusionMatrix:
	"""``counts[true][predicted]`` for one concept slot."""

	slot: str
	counts: np.ndarray

	def supports(self) -> np.ndarray:
		return self.counts.sum(axis=1)

	def accuracy(self) -> float:
		total = self.counts.sum()
		return float(np.trace(self.counts) / total) if total else 0.0


def masked_argmax(scores: np.ndarray, allowed: Optional[Sequence[int]]) -> np.ndarray:
	"""Row-wise argmax restricted to ``allowed`` columns (lowest index on ties)."""
	if allowed is None:
		return np.argmax(scores, axis=1)
	allowed = np.array(sorted(int(a) for a in allowed), dtype=np.int64)
	if allowed.size == 0:
		raise ConfigurationError("masked_argmax: empty admissible set")
	return allowed[np.argmax(scores[:, allowed], axis=1)]


def collect_outputs(
	predictor: Predictor,
	dataset: Dataset,
	knowledge: Optional[CompiledKnowledge] = None,
	batch_size: int = EVAL_BATCH,
):
	"""Label probabilities (N x n_labels) and per-slot marginals (list of N x d_j), no gradients."""
	probs: List[np.ndarray] = []
	marginals: List[List[np.ndarray]] = [[] for _ in range(predictor.schema.k)]
	with no_grad():
		for start in range(0, len(dataset), batch_size):
			out = predictor.forward(dataset.x[start : start + batch_size], knowledge=knowledge)
			probs.append(out.label_probs.data)
			for j, m in enumerate(out.marginals):
				marginals[j].append(m.data)
	if not probs:
		empty = [np.zeros((0, d)) for d in predictor.schema.cardinalities]
		return np.zeros((0, predictor.n_labels)), empty
	return np.concatenate(probs), [np.concatenate(m) for m in marginals]


def evaluate(
	predictor: Predictor,
	dataset: Dataset,
	knowledge: Optional[CompiledKnowledge] = None,
	label_mask: Optional[Sequence[int]] = None,
	concept_values: Optional[Sequence[Sequence[int]]] = None,
) -> TaskEvaluation:
	"""Accuracies of ``predictor`` on ``dataset``.

	Args:
		predictor: Model to evaluate
		dataset: Records with ground-truth concepts and label indices
		knowledge: Knowledge to score labels under (default: the predictor's)
		label_mask: Label indices admissible in the task (Task-IL)
		concept_values: Per slot, concept values admissible in the task

	Returns:
		TaskEvaluation; all accuracies are 0 on an empty dataset
	"""
	n = len(dataset)
	if n == 0:
		return TaskEvaluation(0.0, 0.0, 0.0, 0.0, 0)
	probs, marginals = collect_outputs(predictor, dataset, knowledge)
	acc_y = float(np.mean(np.argmax(probs, axis=1) == dataset.labels))
	acc_y_masked = float(np.mean(masked_argmax(probs, label_mask) == dataset.labels))

	per_slot, per_slot_masked = [], []
	for j, m in enumerate(marginals):
		truth = dataset.concepts[:, j]
		per_slot.append(np.mean(np.argmax(m, axis=1) == truth))
		allowed = concept_values[j] if concept_values is not None else None
		per_slot_masked.append(np.mean(masked_argmax(m, allowed) == truth))
	return TaskEvaluation(acc_y, float(np.mean(per_slot)), acc_y_masked, float(np.mean(per_slot_masked)), n)


def confusion_from_predictions(
	truth: np.ndarray, predicted: np.ndarray, slot_names: Sequence[str], cardinalities: Sequence[int]
) -> List[ConfusionMatrix]:
	out: List[ConfusionMatrix] = []
	for j, (name, d) in enumerate(zip(slot_names, cardinalities)):
		counts = np.zeros((d, d), dtype=np.int64)
		np.add.at(counts, (truth[:, j], predicted[:, j]), 1)
		out.append(ConfusionMatrix(name, counts))
	return out


def confusion(predictor: Predictor, dataset: Dataset) -> List[ConfusionMatrix]:
	"""One confusion matrix per concept slot; row sums equal the per-class supports."""
	_, marginals = collect_outputs(predictor, dataset)
	predicted = np.stack([np.argmax(m, axis=1) for m in marginals], axis=1) if len(dataset) else dataset.concepts
	schema = predictor.schema
	return confusion_from_predictions(dataset.concepts, predicted, schema.slot_names, schema.cardinalities)
