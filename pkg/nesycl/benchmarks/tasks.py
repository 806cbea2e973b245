from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import ConfigurationError
from ..knowledge.compiled import CompiledKnowledge, compile
from ..knowledge.schema import KnowledgeSpec

SPLITS = ("train", "val", "test")


@dataclass
class Dataset:
	"""Records as parallel arrays.

	- ``x``: (N, n_objects, dim) object fragments
	- ``concepts``: (N, k) ground-truth concept tuples
	- ``labels``: (N,) label indices in the knowledge's label enumeration
	- ``sup_mask``: (N, k) concept-annotation mask
	"""

	x: np.ndarray
	concepts: np.ndarray
	labels: np.ndarray
	sup_mask: np.ndarray = None

	def __post_init__(self) -> None:
		self.x = np.asarray(self.x, dtype=np.float64)
		self.concepts = np.asarray(self.concepts, dtype=np.int64).reshape(len(self.x), -1)
		self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
		if self.sup_mask is None:
			self.sup_mask = np.zeros(self.concepts.shape, dtype=bool)
		self.sup_mask = np.asarray(self.sup_mask, dtype=bool).reshape(self.concepts.shape)
		if not (len(self.x) == len(self.concepts) == len(self.labels)):
			raise ConfigurationError("Dataset: x, concepts and labels must have the same length")

	def __len__(self) -> int:
		return int(self.labels.shape[0])

	@property
	def n_objects(self) -> int:
		return int(self.x.shape[1])

	@property
	def dim(self) -> int:
		return int(self.x.shape[2])

	def subset(self, index: Sequence[int]) -> "Dataset":
		idx = np.asarray(index, dtype=np.int64)
		return Dataset(self.x[idx], self.concepts[idx], self.labels[idx], self.sup_mask[idx])

	@staticmethod
	def concat(parts: Sequence["Dataset"]) -> "Dataset":
		return Dataset(
			np.concatenate([p.x for p in parts]),
			np.concatenate([p.concepts for p in parts]),
			np.concatenate([p.labels for p in parts]),
			np.concatenate([p.sup_mask for p in parts]),
		)

	def annotated(self) -> np.ndarray:
		return self.sup_mask.any(axis=1)

	def concept_combinations(self) -> set:
		return {tuple(int(v) for v in row) for row in self.concepts}


@dataclass
class Task:
	task_id: int
	knowledge: KnowledgeSpec
	train: Dataset
	val: Dataset
	test: Dataset
	name: str = ""

	def split(self, name: str) -> Dataset:
		if name not in SPLITS:
			raise ConfigurationError(f"Unknown split '{name}'")
		return getattr(self, name)

	def label_set(self) -> Tuple[int, ...]:
		"""Label indices admissible in this task (those occurring in any split)."""
		labels = np.concatenate([self.train.labels, self.val.labels, self.test.labels])
		return tuple(int(v) for v in np.unique(labels))

	def concept_values(self) -> List[Tuple[int, ...]]:
		"""Per slot, the concept values occurring in this task."""
		concepts = np.concatenate([self.train.concepts, self.val.concepts, self.test.concepts])
		return [tuple(int(v) for v in np.unique(concepts[:, j])) for j in range(concepts.shape[1])]


@dataclass
class TaskStream:
	benchmark: str
	tasks: List[Task]
	ood: Optional[Dataset] = None
	_compiled: Dict[str, CompiledKnowledge] = field(default_factory=dict, repr=False)

	def __post_init__(self) -> None:
		ids = [t.task_id for t in self.tasks]
		if any(b <= a for a, b in zip(ids, ids[1:])):
			raise ConfigurationError(f"TaskStream: task ids must be strictly increasing, got {ids}")

	def __len__(self) -> int:
		return len(self.tasks)

	def __iter__(self):
		return iter(self.tasks)

	def compiled(self, task: Task) -> CompiledKnowledge:
		"""Compiled knowledge of ``task``.

		Tasks whose knowledge has the same registry name and schema share one
		set of tables; each still carries its own task-tagged spec.
		"""
		spec = task.knowledge
		if spec.identifier not in self._compiled:
			base_key = f"{spec.name}|{spec.schema.signature()}"
			if base_key not in self._compiled:
				self._compiled[base_key] = compile(spec)
			self._compiled[spec.identifier] = replace(self._compiled[base_key], spec=spec)
		return self._compiled[spec.identifier]

	def check_consistency(self) -> List[str]:
		"""Records whose (concepts, label) violate their task's knowledge, as messages."""
		problems: List[str] = []
		for task in self.tasks:
			ck = self.compiled(task)
			for split in SPLITS:
				data = task.split(split)
				for i, (c, y) in enumerate(zip(data.concepts, data.labels)):
					if not ck.satisfies(c, ck.index_to_label(y)):
						problems.append(f"task={task.task_id} split={split} record={i}")
		if self.ood is not None and self.tasks:
			ck = self.compiled(self.tasks[0])
			for i, (c, y) in enumerate(zip(self.ood.concepts, self.ood.labels)):
				if not ck.satisfies(c, ck.index_to_label(y)):
					problems.append(f"split=ood record={i}")
		return problems

	def merged(self) -> "TaskStream":
		"""Single task formed by the union of all tasks (the Offline upper bound)."""
		if not self.tasks:
			return self
		first = self.tasks[0]
		union = Task(
			task_id=0,
			knowledge=first.knowledge.with_tag("union"),
			train=Dataset.concat([t.train for t in self.tasks]),
			val=Dataset.concat([t.val for t in self.tasks]),
			test=Dataset.concat([t.test for t in self.tasks]),
			name="union",
		)
		return TaskStream(self.benchmark, [union], self.ood)


def attach_supervision(dataset: Dataset, fraction: float, rng: np.random.Generator) -> Dataset:
	"""Fully annotate a uniformly random ``ceil(fraction * N)`` subset; clear every other mask.

	Raises:
		ConfigurationError: If ``fraction`` is outside [0, 1]
	"""
	if not 0.0 <= fraction <= 1.0:
		raise ConfigurationError(f"supervision fraction must be in [0, 1], got {fraction}")
	n = len(dataset)
	count = min(n, math.ceil(round(fraction * n, 9)))
	mask = np.zeros(dataset.concepts.shape, dtype=bool)
	if count:
		mask[rng.choice(n, size=count, replace=False)] = True
	return replace(dataset, sup_mask=mask)
