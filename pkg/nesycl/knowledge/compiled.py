"""Knowledge compilation by exhaustive enumeration, and the reasoning layer.

``compile`` evaluates the predicate on every (concept tuple, label tuple)
pair and stores:

- ``model_counts``: Z(c;K), the number of labels consistent with c
- ``satisfying_set``: for each label tuple, the consistent concept tuples
- a flat list of satisfying pairs sorted by label index, which drives the
  vectorised reasoning layer

The label distribution is
``p(y) = sum_c 1[(c,y) |= K] / Z(c;K) * prod_j p(c_j)``, computed as a sum
over the satisfying pairs so that only consistent configurations are
touched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..autodiff import Tensor, as_tensor, segment_sum
from ..config import enumeration_cap
from ..exceptions import ConfigurationError, EnumerationCapError
from ..logger_utils import get_resilient_logger
from .schema import ConceptSchema, ConceptTuple, KnowledgeSpec, LabelTuple

Marginals = Sequence[Union[Tensor, np.ndarray]]


def _log():
	return get_resilient_logger("nesycl.knowledge")


def _readonly(array: np.ndarray) -> np.ndarray:
	array.setflags(write=False)
	return array


def _mixed_radix(values: Sequence[int], sizes: Sequence[int]) -> int:
	index = 0
	for value, size in zip(values, sizes):
		index = index * size + int(value)
	return index


@dataclass(frozen=True, eq=False)
class CompiledKnowledge:
	"""Immutable model table of a knowledge specification.

	Concept tuples and label tuples are indexed in mixed radix, C order, the
	same order ``itertools.product`` enumerates them in.
	"""

	spec: KnowledgeSpec
	label_index: Tuple[LabelTuple, ...]
	model_counts: np.ndarray
	satisfying_set: Dict[LabelTuple, Tuple[ConceptTuple, ...]]
	pair_concepts: np.ndarray
	pair_labels: np.ndarray
	pair_weights: np.ndarray
	pair_config_index: np.ndarray

	@property
	def schema(self) -> ConceptSchema:
		return self.spec.schema

	@property
	def name(self) -> str:
		return self.spec.identifier

	@property
	def n_labels(self) -> int:
		return len(self.label_index)

	def label_to_index(self, y: Union[int, Sequence[int]]) -> int:
		if isinstance(y, (int, np.integer)):
			y = (int(y),)
		return _mixed_radix(y, self.schema.label_cardinalities)

	def index_to_label(self, index: int) -> LabelTuple:
		return self.label_index[int(index)]

	def concept_index(self, c: Sequence[int]) -> int:
		return _mixed_radix(c, self.schema.cardinalities)

	def model_count(self, c: Sequence[int]) -> int:
		return int(self.model_counts[tuple(int(v) for v in c)])

	def satisfies(self, c: Sequence[int], y: Union[int, Sequence[int]]) -> bool:
		label = self.index_to_label(self.label_to_index(y))
		return tuple(int(v) for v in c) in self._satisfying_lookup[label]

	@property
	def _satisfying_lookup(self) -> Dict[LabelTuple, frozenset]:
		cached = self.__dict__.get("_lookup")
		if cached is None:
			cached = {y: frozenset(cs) for y, cs in self.satisfying_set.items()}
			object.__setattr__(self, "_lookup", cached)
		return cached

	def reachable_labels(self) -> List[int]:
		"""Indices of labels with a non-empty satisfying set."""
		return [i for i, y in enumerate(self.label_index) if self.satisfying_set[y]]

	def min_positive_count(self) -> int:
		"""Smallest Z(c;K) over consistent concepts (the bound constant zeta)."""
		positive = self.model_counts[self.model_counts > 0]
		return int(positive.min()) if positive.size else 0

	# ------------------------------------------------------------------
	# reasoning layer (batched)
	# ------------------------------------------------------------------

	def _batched(self, marginals: Marginals) -> Tuple[List[Tensor], bool]:
		tensors = [as_tensor(m) for m in marginals]
		if len(tensors) != self.schema.k:
			raise ConfigurationError(f"{self.name}: expected {self.schema.k} marginals, got {len(tensors)}")
		single = tensors[0].ndim == 1
		if single:
			tensors = [t.reshape(1, -1) for t in tensors]
		return tensors, single

	def _pair_products(self, tensors: List[Tensor]) -> Tensor:
		product: Optional[Tensor] = None
		for j, marginal in enumerate(tensors):
			gathered = marginal.take(self.pair_concepts[:, j], axis=1)
			product = gathered if product is None else product * gathered
		return product

	def label_distribution(self, marginals: Marginals) -> Tensor:
		"""Batch of label distributions (B x n_labels); rank-1 marginals give one row."""
		tensors, single = self._batched(marginals)
		weighted = self._pair_products(tensors) * self.pair_weights
		out = segment_sum(weighted, self.pair_labels, self.n_labels)
		return out.reshape(-1) if single else out

	def mass_table(self, marginals: Marginals) -> Tensor:
		"""Per label, the probability that sampled concepts satisfy K[Y/y] (B x n_labels)."""
		tensors, single = self._batched(marginals)
		out = segment_sum(self._pair_products(tensors), self.pair_labels, self.n_labels)
		return out.reshape(-1) if single else out


def compile(spec: KnowledgeSpec, cap: Optional[int] = None) -> CompiledKnowledge:
	"""Enumerate every (c, y) pair of ``spec`` into a ``CompiledKnowledge``.

	Args:
		spec: Knowledge specification
		cap: Maximum number of concept configurations (default ``NESYCL_ENUM_CAP``)

	Returns:
		Immutable compiled tables

	Raises:
		EnumerationCapError: If the schema has more configurations than ``cap``

	Example:
		>>> ck = compile(xor_toy())
		>>> ck.satisfying_set[(1,)]
		((0, 1), (1, 0))
	"""
	schema = spec.schema
	cap = enumeration_cap() if cap is None else int(cap)
	n_configs = schema.n_configurations
	if n_configs > cap:
		raise EnumerationCapError(f"knowledge '{spec.identifier}' concept configurations", n_configs, cap)

	label_index = tuple(schema.iter_labels())
	counts = np.zeros(schema.cardinalities, dtype=np.int64)
	satisfying: Dict[LabelTuple, List[ConceptTuple]] = {y: [] for y in label_index}
	for c in schema.iter_concepts():
		for y in label_index:
			if spec.predicate(c, y):
				satisfying[y].append(c)
				counts[c] += 1

	pair_concepts: List[ConceptTuple] = []
	pair_labels: List[int] = []
	for li, y in enumerate(label_index):
		for c in satisfying[y]:
			pair_concepts.append(c)
			pair_labels.append(li)

	concepts_arr = np.array(pair_concepts, dtype=np.int64).reshape(-1, schema.k)
	weights = np.array([1.0 / counts[c] for c in pair_concepts], dtype=np.float64)
	config_index = np.array(
		[_mixed_radix(c, schema.cardinalities) for c in pair_concepts], dtype=np.int64
	)

	ck = CompiledKnowledge(
		spec=spec,
		label_index=label_index,
		model_counts=_readonly(counts),
		satisfying_set={y: tuple(cs) for y, cs in satisfying.items()},
		pair_concepts=_readonly(concepts_arr),
		pair_labels=_readonly(np.array(pair_labels, dtype=np.int64)),
		pair_weights=_readonly(weights),
		pair_config_index=_readonly(config_index),
	)
	_log().debug(
		f"Compiled knowledge {spec.identifier}: configs={n_configs} labels={len(label_index)} "
		f"pairs={len(pair_labels)} min_Z={ck.min_positive_count()}"
	)
	return ck


# ----------------------------------------------------------------------
# functional API
# ----------------------------------------------------------------------


def label_given_concepts(y: Union[int, Sequence[int]], c: Sequence[int], ck: CompiledKnowledge) -> float:
	"""Uniform-over-models probability ``1[(c,y) |= K] / Z(c;K)`` (0 when Z = 0)."""
	count = ck.model_count(c)
	if count == 0 or not ck.satisfies(c, y):
		return 0.0
	return 1.0 / count


def label_distribution(marginals: Marginals, ck: CompiledKnowledge) -> Tensor:
	"""Exact label distribution for per-slot marginals (rank-1 or batched rank-2)."""
	return ck.label_distribution(marginals)


def map_label(marginals: Marginals, ck: CompiledKnowledge) -> Union[LabelTuple, List[LabelTuple]]:
	"""Most likely label tuple; ties go to the lowest label index.

	Rank-1 marginals give one tuple, batched marginals a list of tuples.
	"""
	dist = ck.label_distribution(marginals).data
	if dist.ndim == 1:
		return ck.index_to_label(int(np.argmax(dist)))
	return [ck.index_to_label(int(i)) for i in np.argmax(dist, axis=1)]


def satisfying_mass(marginals: Marginals, y: Union[int, Sequence[int]], ck: CompiledKnowledge) -> float:
	"""Probability that concepts drawn from ``marginals`` satisfy K with Y = y (single example)."""
	table = ck.mass_table(marginals).data
	if table.ndim != 1:
		table = table[0]
	return float(table[ck.label_to_index(y)])


def joint_concepts(marginals: Marginals) -> np.ndarray:
	"""Joint concept distribution of factorised marginals, B x prod(cardinalities), C order."""
	arrays = [m.data if isinstance(m, Tensor) else np.asarray(m, dtype=np.float64) for m in marginals]
	if arrays[0].ndim == 1:
		arrays = [a.reshape(1, -1) for a in arrays]
	joint = arrays[0]
	for a in arrays[1:]:
		joint = (joint[:, :, None] * a[:, None, :]).reshape(joint.shape[0], -1)
	return joint
