"""Label predictors on top of a ``ConceptModel``.

- ``NesyPredictor``: exact reasoning layer over the compiled knowledge; any
  label with an empty satisfying set gets probability 0.
- ``CbmPredictor``: learnable bilinear head ``z1^T W^y z2`` over the two slot
  encodings (the softmax concept distributions), softmax over classes. No
  consistency guarantee with the knowledge.

Both expose the same ``forward`` contract so continual strategies can treat
them uniformly. The distillation target (``distill_scores``) is the label
log-probability vector for the NeSy model and the pre-softmax scores for
the CBM.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import EPS, Tensor, log_softmax_rows, softmax_rows
from ..exceptions import ConfigurationError
from ..knowledge.compiled import CompiledKnowledge
from ..knowledge.schema import LabelTuple
from .encoders import ConceptModel


@dataclass
class Prediction:
	marginals: List[Tensor]
	label_probs: Tensor
	label_log_probs: Tensor
	distill_scores: Tensor

	def labels(self) -> np.ndarray:
		"""Argmax label indices (lowest index on ties)."""
		return np.argmax(self.label_probs.data, axis=1)

	def concepts(self) -> np.ndarray:
		"""Argmax concept tuples, shape (batch, k)."""
		return np.stack([np.argmax(m.data, axis=1) for m in self.marginals], axis=1)


class Predictor:
	"""Shared plumbing of the two predictor families."""

	family = ""

	def __init__(self, concept_model: ConceptModel, knowledge: CompiledKnowledge):
		if concept_model.schema.signature() != knowledge.schema.signature():
			raise ConfigurationError(f"{self.family}: concept model schema does not match knowledge '{knowledge.name}'")
		self.concept_model = concept_model
		self.knowledge = knowledge

	@property
	def schema(self):
		return self.concept_model.schema

	@property
	def n_labels(self) -> int:
		return self.knowledge.n_labels

	def head_parameters(self) -> List[Tensor]:
		return []

	def parameters(self) -> List[Tensor]:
		return self.concept_model.parameters() + self.head_parameters()

	def from_marginals(
		self,
		marginals: List[Tensor],
		knowledge: Optional[CompiledKnowledge] = None,
	) -> Prediction:
		raise NotImplementedError

	def forward(
		self,
		x: np.ndarray,
		train: bool = False,
		knowledge: Optional[CompiledKnowledge] = None,
	) -> Prediction:
		return self.from_marginals(self.concept_model.encode(x, train=train), knowledge)

	def label_nll(self, prediction: Prediction, y_index: np.ndarray) -> Tensor:
		"""Mean negative log-likelihood of the given label indices (floored)."""
		return -prediction.label_log_probs.pick(np.asarray(y_index, dtype=np.int64)).mean()

	def reinitialize(self, rng: np.random.Generator) -> None:
		self.concept_model.reinitialize(rng)

	def snapshot(self) -> "Predictor":
		raise NotImplementedError

	def state(self) -> List[np.ndarray]:
		return [p.data.copy() for p in self.parameters()]

	def load_state(self, arrays: Sequence[np.ndarray]) -> None:
		params = self.parameters()
		if len(arrays) != len(params):
			raise ConfigurationError(f"load_state: expected {len(params)} arrays, got {len(arrays)}")
		for p, a in zip(params, arrays):
			if p.shape != tuple(np.shape(a)):
				raise ConfigurationError(f"load_state: shape {np.shape(a)} does not match {p.shape}")
			p.data = np.array(a, dtype=np.float64)


class NesyPredictor(Predictor):
	family = "nesy"

	def from_marginals(
		self,
		marginals: List[Tensor],
		knowledge: Optional[CompiledKnowledge] = None,
	) -> Prediction:
		"""Push concept marginals through the reasoning layer.

		``knowledge`` overrides the predictor's own knowledge (replayed items
		are scored under the knowledge of the task they came from).
		"""
		ck = knowledge or self.knowledge
		probs = ck.label_distribution(marginals)
		log_probs = probs.log(EPS)
		return Prediction(marginals, probs, log_probs, log_probs)

	def snapshot(self) -> "NesyPredictor":
		return NesyPredictor(self.concept_model.snapshot(), self.knowledge)


class CbmPredictor(Predictor):
	"""Concept-bottleneck baseline with one bilinear table ``W^y`` per class.

	Raises:
		ConfigurationError: If the schema does not have exactly two slots
	"""

	family = "cbm"

	def __init__(
		self,
		concept_model: ConceptModel,
		knowledge: CompiledKnowledge,
		rng: Optional[np.random.Generator] = None,
		init_scale: float = 0.01,
	):
		super().__init__(concept_model, knowledge)
		if self.schema.k != 2:
			raise ConfigurationError(f"CbmPredictor needs exactly 2 concept slots, schema has {self.schema.k}")
		self.d1, self.d2 = self.schema.cardinalities
		self.init_scale = float(init_scale)
		self._init_head(rng if rng is not None else np.random.default_rng(0))

	def _init_head(self, rng: np.random.Generator) -> None:
		self.W = Tensor(
			rng.normal(0.0, self.init_scale, size=(self.n_labels, self.d1, self.d2)),
			requires_grad=True,
		)

	def head_parameters(self) -> List[Tensor]:
		return [self.W]

	def reinitialize(self, rng: np.random.Generator) -> None:
		super().reinitialize(rng)
		self._init_head(rng)

	def scores(self, marginals: Sequence[Tensor]) -> Tensor:
		z1, z2 = marginals
		batch = z1.shape[0]
		outer = (z1.reshape(batch, self.d1, 1) * z2.reshape(batch, 1, self.d2)).reshape(batch, self.d1 * self.d2)
		return outer @ self.W.reshape(self.n_labels, self.d1 * self.d2).T

	def from_marginals(
		self,
		marginals: List[Tensor],
		knowledge: Optional[CompiledKnowledge] = None,
	) -> Prediction:
		scores = self.scores(marginals)
		return Prediction(marginals, softmax_rows(scores), log_softmax_rows(scores), scores)

	def snapshot(self) -> "CbmPredictor":
		clone = CbmPredictor.__new__(CbmPredictor)
		clone.concept_model = self.concept_model.snapshot()
		clone.knowledge = self.knowledge
		clone.d1, clone.d2 = self.d1, self.d2
		clone.init_scale = self.init_scale
		clone.W = Tensor(self.W.data.copy())
		return clone


def predict_nesy(
	predictor: NesyPredictor, x: np.ndarray
) -> Tuple[np.ndarray, List[LabelTuple], List[np.ndarray]]:
	"""Label distributions, MAP label tuples and per-slot marginals for a batch."""
	out = predictor.forward(x)
	labels = [predictor.knowledge.index_to_label(i) for i in out.labels()]
	return out.label_probs.data, labels, [m.data for m in out.marginals]


def predict_cbm(predictor: CbmPredictor, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
	"""Class distributions and argmax classes for a batch."""
	out = predictor.forward(x)
	return out.label_probs.data, out.labels()


def build_predictor(
	family: str,
	knowledge: CompiledKnowledge,
	input_dim: int,
	hidden: Sequence[int],
	rng: np.random.Generator,
	zero_init_last: bool = False,
	dropout: float = 0.0,
	noise_std: float = 0.0,
) -> Predictor:
	"""Construct a predictor of the given family (``nesy`` or ``cbm``)."""
	concepts = ConceptModel(
		knowledge.schema,
		input_dim,
		hidden,
		rng=rng,
		zero_init_last=zero_init_last,
		dropout=dropout,
		noise_std=noise_std,
	)
	if family == "nesy":
		return NesyPredictor(concepts, knowledge)
	if family == "cbm":
		return CbmPredictor(concepts, knowledge, rng=rng)
	raise ConfigurationError(f"Unknown model family '{family}'")
