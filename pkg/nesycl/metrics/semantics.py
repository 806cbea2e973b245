"""Semantic-equivalence and reasoning-shortcut diagnostics.

A model is semantically equivalent to the ground truth on a dataset when its
argmax concepts match the true concepts on every record. A reasoning
shortcut is a model whose labels are (almost) always right while its
concepts are not equivalent.

Both functions accept either a predictor or an array of predicted concept
tuples (N x k). With an array, labels are predicted by running one-hot
concepts through the knowledge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Mapping, Optional, Sequence, Union

import numpy as np

from ..benchmarks.tasks import Dataset
from ..exceptions import ConfigurationError
from ..knowledge.compiled import CompiledKnowledge
from ..logger_utils import get_resilient_logger
from ..models.encoders import ConceptModel
from ..models.predictors import Predictor
from .evaluation import ConfusionMatrix, collect_outputs, confusion_from_predictions

DEFAULT_SHORTCUT_THRESHOLD = 0.95

ConceptSource = Union[Predictor, ConceptModel, np.ndarray]
GroundTruthMap = Union[None, Callable[[np.ndarray], np.ndarray], Mapping[int, int], Sequence[Mapping[int, int]]]


def _log():
	return get_resilient_logger("nesycl.metrics")


@dataclass(frozen=True)
class SemanticReport:
	equivalent: bool
	agreement: float
	per_slot: tuple


@dataclass
class ShortcutDiagnosis:
	flagged: bool
	label_agreement: float
	semantics: SemanticReport
	confusion: List[ConfusionMatrix] = field(default_factory=list)

	@property
	def concept_agreement(self) -> float:
		return self.semantics.agreement


def apply_concept_map(concepts: np.ndarray, mapping: GroundTruthMap) -> np.ndarray:
	"""Apply a value map to concept tuples.

	``mapping`` is a callable on the whole array, a single value map used for
	every slot, or one value map per slot; values missing from a map are kept.
	"""
	concepts = np.asarray(concepts, dtype=np.int64)
	if mapping is None:
		return concepts.copy()
	if callable(mapping):
		return np.asarray(mapping(concepts), dtype=np.int64)
	maps = list(mapping) if not isinstance(mapping, Mapping) else [mapping] * concepts.shape[1]
	if len(maps) != concepts.shape[1]:
		raise ConfigurationError(f"concept map has {len(maps)} slots, concepts have {concepts.shape[1]}")
	out = concepts.copy()
	for j, m in enumerate(maps):
		out[:, j] = [int(m.get(int(v), int(v))) for v in concepts[:, j]]
	return out


def _predicted_concepts(model: ConceptSource, dataset: Dataset) -> np.ndarray:
	if isinstance(model, np.ndarray):
		predicted = np.asarray(model, dtype=np.int64).reshape(len(dataset), -1)
	elif isinstance(model, Predictor):
		_, marginals = collect_outputs(model, dataset)
		predicted = np.stack([np.argmax(m, axis=1) for m in marginals], axis=1)
	elif isinstance(model, ConceptModel):
		predicted = np.stack([np.argmax(m.data, axis=1) for m in model.encode(dataset.x)], axis=1)
	else:
		raise ConfigurationError(f"cannot read concepts from {type(model).__name__}")
	if predicted.shape != dataset.concepts.shape:
		raise ConfigurationError(f"predicted concepts {predicted.shape} do not match dataset {dataset.concepts.shape}")
	return predicted


def _predicted_labels(model: ConceptSource, dataset: Dataset, predicted: np.ndarray, ck: CompiledKnowledge) -> np.ndarray:
	if isinstance(model, Predictor):
		probs, _ = collect_outputs(model, dataset, knowledge=ck if model.family == "nesy" else None)
		return np.argmax(probs, axis=1)
	one_hot = [np.eye(d)[predicted[:, j]] for j, d in enumerate(ck.schema.cardinalities)]
	return np.argmax(ck.label_distribution(one_hot).data, axis=1)


def semantic_equivalence(
	model: ConceptSource,
	dataset: Dataset,
	ground_truth_map: GroundTruthMap = None,
) -> SemanticReport:
	"""Argmax concept agreement with the (optionally mapped) ground truth.

	Example:
		>>> shortcut = {0: 5, 2: 7, 4: 9, 6: 1, 8: 3}
		>>> semantic_equivalence(apply_concept_map(data.concepts, shortcut), data).equivalent
		False
	"""
	predicted = _predicted_concepts(model, dataset)
	truth = apply_concept_map(dataset.concepts, ground_truth_map)
	if len(dataset) == 0:
		return SemanticReport(True, 1.0, tuple(1.0 for _ in range(truth.shape[1])))
	hits = predicted == truth
	per_slot = tuple(float(v) for v in hits.mean(axis=0))
	agreement = float(hits.all(axis=1).mean())
	return SemanticReport(bool(hits.all()), agreement, per_slot)


def shortcut_report(
	model: ConceptSource,
	dataset: Dataset,
	ck: CompiledKnowledge,
	threshold: float = DEFAULT_SHORTCUT_THRESHOLD,
) -> ShortcutDiagnosis:
	"""Flag a reasoning shortcut: labels agree on at least ``threshold`` of
	the records while concepts are not semantically equivalent."""
	predicted = _predicted_concepts(model, dataset)
	semantics = semantic_equivalence(predicted, dataset)
	labels = _predicted_labels(model, dataset, predicted, ck)
	label_agreement = float(np.mean(labels == dataset.labels)) if len(dataset) else 1.0
	flagged = label_agreement >= threshold and not semantics.equivalent
	matrices = confusion_from_predictions(
		dataset.concepts, predicted, ck.schema.slot_names, ck.schema.cardinalities
	)
	_log().info(
		f"Shortcut check on {ck.name}: label_agreement={label_agreement:.3f} "
		f"concept_agreement={semantics.agreement:.3f} flagged={flagged}"
	)
	return ShortcutDiagnosis(flagged, label_agreement, semantics, matrices)
