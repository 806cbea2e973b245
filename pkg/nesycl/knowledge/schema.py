"""Concept schemas and knowledge specifications.

A schema fixes the categorical concept slots (with the input object each
slot is read from and the encoder head that reads it) and the label
variables. A knowledge specification pairs a schema with a pure predicate
over ``(concepts, labels)``.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence, Tuple

from ..exceptions import ConfigurationError

ConceptTuple = Tuple[int, ...]
LabelTuple = Tuple[int, ...]
Predicate = Callable[[ConceptTuple, LabelTuple], bool]


@dataclass(frozen=True)
class ConceptSlot:
	"""One categorical concept.

	``obj`` is the index of the input fragment the slot is extracted from and
	``head`` names the encoder that reads it; slots sharing a head share
	encoder weights.
	"""

	name: str
	cardinality: int
	obj: int = 0
	head: str = ""


@dataclass(frozen=True)
class ConceptSchema:
	slots: Tuple[ConceptSlot, ...]
	label_cardinalities: Tuple[int, ...]
	label_names: Tuple[str, ...] = ()

	def __post_init__(self) -> None:
		if not self.slots:
			raise ConfigurationError("ConceptSchema: at least one concept slot is required")
		normalized = []
		for slot in self.slots:
			if slot.cardinality < 2:
				raise ConfigurationError(f"ConceptSchema: slot '{slot.name}' has cardinality {slot.cardinality} < 2")
			normalized.append(slot if slot.head else ConceptSlot(slot.name, slot.cardinality, slot.obj, slot.name))
		object.__setattr__(self, "slots", tuple(normalized))
		if not self.label_cardinalities:
			raise ConfigurationError("ConceptSchema: label arity must be >= 1")
		for size in self.label_cardinalities:
			if size < 2:
				raise ConfigurationError(f"ConceptSchema: label cardinality {size} < 2")
		names = self.label_names or tuple(f"y{i}" for i in range(len(self.label_cardinalities)))
		if len(names) != len(self.label_cardinalities):
			raise ConfigurationError("ConceptSchema: label_names length must match label arity")
		object.__setattr__(self, "label_names", tuple(names))

	@property
	def k(self) -> int:
		return len(self.slots)

	@property
	def slot_names(self) -> Tuple[str, ...]:
		return tuple(s.name for s in self.slots)

	@property
	def cardinalities(self) -> Tuple[int, ...]:
		return tuple(s.cardinality for s in self.slots)

	@property
	def label_arity(self) -> int:
		return len(self.label_cardinalities)

	@property
	def n_objects(self) -> int:
		return max(s.obj for s in self.slots) + 1

	@property
	def n_configurations(self) -> int:
		total = 1
		for size in self.cardinalities:
			total *= size
		return total

	@property
	def n_labels(self) -> int:
		total = 1
		for size in self.label_cardinalities:
			total *= size
		return total

	def slot_index(self, name: str) -> int:
		for j, slot in enumerate(self.slots):
			if slot.name == name:
				return j
		raise ConfigurationError(f"ConceptSchema: unknown slot '{name}'")

	def iter_concepts(self) -> Iterator[ConceptTuple]:
		return itertools.product(*(range(c) for c in self.cardinalities))

	def iter_labels(self) -> Iterator[LabelTuple]:
		return itertools.product(*(range(c) for c in self.label_cardinalities))

	def signature(self) -> str:
		slots = ";".join(f"{s.name}:{s.cardinality}:{s.obj}:{s.head}" for s in self.slots)
		labels = ";".join(f"{n}:{c}" for n, c in zip(self.label_names, self.label_cardinalities))
		return f"slots[{slots}]labels[{labels}]"

	def schema_hash(self) -> bytes:
		"""32-byte SHA-256 digest of the schema signature (checkpoint headers)."""
		return hashlib.sha256(self.signature().encode("utf-8")).digest()


@dataclass(frozen=True)
class KnowledgeSpec:
	"""Prior knowledge K: a pure, deterministic predicate over (concepts, labels)."""

	schema: ConceptSchema
	predicate: Predicate = field(compare=False)
	name: str
	task_tag: str = ""

	@property
	def identifier(self) -> str:
		return f"{self.name}@{self.task_tag}" if self.task_tag else self.name

	def holds(self, concepts: Sequence[int], labels: Sequence[int]) -> bool:
		return bool(self.predicate(tuple(int(c) for c in concepts), tuple(int(y) for y in labels)))

	def with_tag(self, task_tag: Optional[str]) -> "KnowledgeSpec":
		return KnowledgeSpec(self.schema, self.predicate, self.name, task_tag or "")
