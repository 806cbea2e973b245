"""Reservoir-sampled replay buffer.

Reservoir sampling (algorithm R): the first ``capacity`` items are kept;
afterwards item number ``n`` (1-based) replaces a uniformly random slot with
probability ``capacity / n``. Every item of the stream ends up retained with
probability ``capacity / stream_count``.

Items store what the model said about them at insertion time (concept
marginals and label scores) together with the knowledge of the task they
came from; stored values are copies and never change afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import ConfigurationError
from ..knowledge.compiled import CompiledKnowledge

SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class BufferItem:
	x: np.ndarray
	y: int
	task_id: int
	knowledge_key: str
	concept_marginals: Tuple[np.ndarray, ...]
	label_scores: np.ndarray
	concepts: Optional[np.ndarray] = None
	concept_mask: Optional[np.ndarray] = None

	def __post_init__(self) -> None:
		for q in self.concept_marginals:
			if abs(float(q.sum()) - 1.0) > SUM_TOLERANCE:
				raise ConfigurationError(f"BufferItem: stored marginal sums to {float(q.sum())}, not 1")
			q.setflags(write=False)
		self.x.setflags(write=False)
		self.label_scores.setflags(write=False)


@dataclass
class ReplayBatch:
	"""Stacked buffer items; ``groups`` maps a knowledge key to row indices."""

	x: np.ndarray
	y: np.ndarray
	task_ids: np.ndarray
	concept_marginals: List[np.ndarray]
	label_scores: np.ndarray
	concepts: np.ndarray
	concept_mask: np.ndarray
	groups: Dict[str, np.ndarray]

	def __len__(self) -> int:
		return int(self.y.shape[0])

	@classmethod
	def from_items(cls, items: Sequence[BufferItem]) -> "ReplayBatch":
		k = len(items[0].concept_marginals)
		concepts = np.stack(
			[it.concepts if it.concepts is not None else np.zeros(k, dtype=np.int64) for it in items]
		)
		mask = np.stack(
			[it.concept_mask if it.concept_mask is not None else np.zeros(k, dtype=bool) for it in items]
		)
		groups: Dict[str, List[int]] = {}
		for i, it in enumerate(items):
			groups.setdefault(it.knowledge_key, []).append(i)
		return cls(
			x=np.stack([it.x for it in items]),
			y=np.array([it.y for it in items], dtype=np.int64),
			task_ids=np.array([it.task_id for it in items], dtype=np.int64),
			concept_marginals=[np.stack([it.concept_marginals[j] for it in items]) for j in range(k)],
			label_scores=np.stack([it.label_scores for it in items]),
			concepts=concepts.astype(np.int64),
			concept_mask=mask.astype(bool),
			groups={key: np.array(rows, dtype=np.int64) for key, rows in groups.items()},
		)


@dataclass
class ReplayBuffer:
	capacity: int
	items: List[BufferItem] = field(default_factory=list)
	stream_count: int = 0
	knowledge: Dict[str, CompiledKnowledge] = field(default_factory=dict)

	def __post_init__(self) -> None:
		if self.capacity < 0:
			raise ConfigurationError(f"buffer capacity must be >= 0, got {self.capacity}")

	def __len__(self) -> int:
		return len(self.items)

	def __iter__(self) -> Iterator[BufferItem]:
		return iter(self.items)

	def remember(self, ck: CompiledKnowledge) -> str:
		"""Keep the knowledge of a task so its items can be replayed under it later."""
		self.knowledge.setdefault(ck.name, ck)
		return ck.name

	def task_distribution(self) -> Dict[int, int]:
		dist: Dict[int, int] = {}
		for item in self.items:
			dist[item.task_id] = dist.get(item.task_id, 0) + 1
		return dist

	def sample(self, n: int, rng: np.random.Generator) -> Optional[ReplayBatch]:
		"""Uniform sample of ``min(n, len(buffer))`` distinct items; ``None`` when empty."""
		size = min(int(n), len(self.items))
		if size <= 0:
			return None
		chosen = rng.choice(len(self.items), size=size, replace=False)
		return ReplayBatch.from_items([self.items[i] for i in chosen])


def reservoir_insert(buf: ReplayBuffer, item: BufferItem, rng: np.random.Generator) -> ReplayBuffer:
	"""Offer one item to the buffer (algorithm R); returns the same buffer."""
	buf.stream_count += 1
	if buf.capacity == 0:
		return buf
	if len(buf.items) < buf.capacity:
		buf.items.append(item)
	else:
		j = int(rng.integers(0, buf.stream_count))
		if j < buf.capacity:
			buf.items[j] = item
	return buf


def make_items(
	x: np.ndarray,
	y: np.ndarray,
	task_id: int,
	knowledge_key: str,
	marginals: Sequence[np.ndarray],
	label_scores: np.ndarray,
	concepts: Optional[np.ndarray] = None,
	concept_mask: Optional[np.ndarray] = None,
) -> List[BufferItem]:
	"""Detached per-example buffer items from one forward pass."""
	items: List[BufferItem] = []
	for i in range(len(y)):
		items.append(
			BufferItem(
				x=np.array(x[i], dtype=np.float64),
				y=int(y[i]),
				task_id=int(task_id),
				knowledge_key=knowledge_key,
				concept_marginals=tuple(np.array(m[i], dtype=np.float64) for m in marginals),
				label_scores=np.array(label_scores[i], dtype=np.float64),
				concepts=None if concepts is None else np.array(concepts[i], dtype=np.int64),
				concept_mask=None if concept_mask is None else np.array(concept_mask[i], dtype=bool),
			)
		)
	return items
