"""Brute-force enumeration of reasoning shortcuts.

- ``enumerate_additive_shortcuts``: every digit assignment satisfying a set
  of ``c_a + c_b = s`` observations (what a model trained on those sums
  could have learned)
- ``enumerate_map_shortcuts``: deterministic concept maps consistent with
  same / different observations; only the partition a map induces on the
  observed values matters, so partitions are enumerated as
  restricted-growth strings over the union-find components of the
  "same" observations and counted with the falling factorial
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from ..benchmarks.streams import SHORTCUT_TASK1_PAIRS
from ..config import enumeration_cap
from ..exceptions import ConfigurationError, EnumerationCapError
from ..logger_utils import get_resilient_logger

MAX_MAP_CARDINALITY = 10
MAX_EXAMPLES = 5

SumConstraint = Tuple[Tuple[int, int], int]
PairObservation = Tuple[Tuple[int, int], bool]

# Sum observations of the first mnadd-shortcut task
SHORTCUT_SYSTEM: List[SumConstraint] = [((a, b), a + b) for a, b in SHORTCUT_TASK1_PAIRS]


def _log():
	return get_resilient_logger("nesycl.analysis")


@dataclass
class ShortcutSolutionSet:
	variables: Tuple[int, ...]
	solutions: List[Tuple[int, ...]]
	ground_truth: Tuple[int, ...]
	constraints: List[SumConstraint] = field(default_factory=list)

	def __len__(self) -> int:
		return len(self.solutions)

	def matches_ground_truth(self) -> List[bool]:
		return [s == self.ground_truth for s in self.solutions]

	def as_dicts(self) -> List[Dict[int, int]]:
		return [dict(zip(self.variables, s)) for s in self.solutions]

	def shortcuts(self) -> List[Tuple[int, ...]]:
		return [s for s in self.solutions if s != self.ground_truth]

	def self_check(self) -> bool:
		"""Substitute every solution back into every constraint."""
		for assignment in self.as_dicts():
			for (a, b), total in self.constraints:
				if assignment[a] + assignment[b] != total:
					return False
		return True


def enumerate_additive_shortcuts(
	constraints: Sequence[SumConstraint],
	domain: Sequence[int] = tuple(range(10)),
	cap: Optional[int] = None,
) -> ShortcutSolutionSet:
	"""All assignments of the constrained digits that satisfy every observed sum.

	Args:
		constraints: ``((a, b), s)`` meaning the digits ``a`` and ``b`` must
			be mapped to values summing to ``s``
		domain: Candidate values of every digit
		cap: Maximum number of assignments to try (default ``NESYCL_ENUM_CAP``)

	Returns:
		ShortcutSolutionSet; the ground truth maps every digit to itself

	Raises:
		EnumerationCapError: If ``|domain| ** n_variables`` exceeds ``cap``

	Example:
		>>> system = [((0, 6), 6), ((4, 6), 10), ((2, 8), 10), ((4, 8), 12)]
		>>> len(enumerate_additive_shortcuts(system))
		6
	"""
	constraints = [((int(a), int(b)), int(s)) for (a, b), s in constraints]
	variables = tuple(sorted({v for (a, b), _ in constraints for v in (a, b)}))
	domain = tuple(int(v) for v in domain)
	cap = enumeration_cap() if cap is None else int(cap)
	total = len(domain) ** len(variables)
	if total > cap:
		raise EnumerationCapError("additive shortcut assignments", total, cap)

	position = {v: i for i, v in enumerate(variables)}
	checks = [(position[a], position[b], s) for (a, b), s in constraints]
	solutions = [
		values
		for values in itertools.product(domain, repeat=len(variables))
		if all(values[i] + values[j] == s for i, j, s in checks)
	]
	result = ShortcutSolutionSet(variables, solutions, variables, constraints)
	_log().info(
		f"Additive shortcuts: variables={len(variables)} tried={total} solutions={len(solutions)} "
		f"non_ground_truth={len(result.shortcuts())}"
	)
	return result


class _UnionFind:
	def __init__(self, items: Sequence[int]):
		self.parent = {i: i for i in items}

	def find(self, i: int) -> int:
		while self.parent[i] != i:
			self.parent[i] = self.parent[self.parent[i]]
			i = self.parent[i]
		return i

	def union(self, a: int, b: int) -> None:
		ra, rb = self.find(a), self.find(b)
		if ra != rb:
			self.parent[max(ra, rb)] = min(ra, rb)


def bell_number(n: int) -> int:
	"""Number of set partitions of ``n`` items (Bell triangle)."""
	row = [1]
	for _ in range(n):
		nxt = [row[-1]]
		for value in row:
			nxt.append(nxt[-1] + value)
		row = nxt
	return row[0]


def restricted_growth_strings(n: int) -> Iterator[Tuple[int, ...]]:
	"""Every set partition of ``n`` items as a restricted-growth string."""
	if n == 0:
		yield ()
		return
	labels = [0] * n

	def extend(i: int, blocks: int) -> Iterator[Tuple[int, ...]]:
		if i == n:
			yield tuple(labels)
			return
		for b in range(blocks + 1):
			labels[i] = b
			yield from extend(i + 1, max(blocks, b + 1))

	labels[0] = 0
	yield from extend(1, 1)


def _falling(n: int, k: int) -> int:
	return math.perm(n, k) if k <= n else 0


@dataclass
class MapShortcutReport:
	count: int
	injective_count: int
	injective_on_observed: bool
	examples: List[Tuple[int, ...]]

	@property
	def non_injective_exists(self) -> bool:
		return self.count > self.injective_count


def enumerate_map_shortcuts(
	observations: Sequence[PairObservation],
	domain_size: int = 10,
	codomain_size: Optional[int] = None,
	cap: Optional[int] = None,
) -> MapShortcutReport:
	"""Count maps ``pi: {0..domain_size-1} -> {0..codomain_size-1}`` with
	``pi(a) == pi(b)`` exactly when an observation says ``(a, b)`` are the same.

	Returns:
		MapShortcutReport with the number of consistent maps, how many of them
		are injective on the whole domain, whether every consistent map is
		injective on the observed values, and a few example maps

	Raises:
		ConfigurationError: If a cardinality exceeds 10 or a value is out of range
		EnumerationCapError: If the partitions to enumerate exceed ``cap``
	"""
	n_dom = int(domain_size)
	n_cod = int(codomain_size if codomain_size is not None else domain_size)
	if not (1 <= n_dom <= MAX_MAP_CARDINALITY and 1 <= n_cod <= MAX_MAP_CARDINALITY):
		raise ConfigurationError(f"map cardinalities must be in 1..{MAX_MAP_CARDINALITY}, got {n_dom} -> {n_cod}")
	obs = [((int(a), int(b)), bool(same)) for (a, b), same in observations]
	for (a, b), _ in obs:
		if not (0 <= a < n_dom and 0 <= b < n_dom):
			raise ConfigurationError(f"observation ({a}, {b}) outside 0..{n_dom - 1}")

	observed = sorted({v for (a, b), _ in obs for v in (a, b)})
	uf = _UnionFind(observed)
	for (a, b), same in obs:
		if same:
			uf.union(a, b)
	components = sorted({uf.find(v) for v in observed})
	cap = enumeration_cap() if cap is None else int(cap)
	partitions = bell_number(len(components))
	if partitions > cap:
		raise EnumerationCapError("concept-map partitions", partitions, cap)

	index = {c: i for i, c in enumerate(components)}
	different = [(index[uf.find(a)], index[uf.find(b)]) for (a, b), same in obs if not same]
	free = n_dom - len(observed)
	count = 0
	injective = 0
	only_discrete = True
	examples: List[Tuple[int, ...]] = []
	for rgs in restricted_growth_strings(len(components)):
		if any(rgs[i] == rgs[j] for i, j in different):
			continue
		blocks = (max(rgs) + 1) if rgs else 0
		count += _falling(n_cod, blocks) * n_cod**free
		discrete = blocks == len(observed)
		if discrete:
			injective += _falling(n_cod, n_dom)
		else:
			only_discrete = False
		if len(examples) < MAX_EXAMPLES and _falling(n_cod, blocks):
			mapping = [0] * n_dom
			for v in observed:
				mapping[v] = rgs[index[uf.find(v)]]
			examples.append(tuple(mapping))
	_log().info(
		f"Map shortcuts: observations={len(obs)} observed_values={len(observed)} consistent={count} "
		f"injective={injective}"
	)
	return MapShortcutReport(count, injective, only_discrete and count > 0, examples)
