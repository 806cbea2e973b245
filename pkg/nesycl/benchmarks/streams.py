"""Task-stream generators, registered under their benchmark names.

- ``mnadd-seq``: nine addition tasks, task ``t`` has sums ``{2t, 2t+1}``
- ``mnadd-shortcut``: even-digit sums then odd-digit sums, with an OOD split
  of mixed-parity and unseen even pairs
- ``clevr-like``: five same-shape / same-color tasks over disjoint
  (shape, color) vocabularies, with a cross-task OOD split

Within a task the label is drawn uniformly from the task's admissible
labels, then the concepts uniformly among those producing it. Concept
annotations are attached to the training split only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..knowledge.builtin import addition_knowledge, clevr_knowledge, xor_toy
from ..knowledge.compiled import compile
from ..logger_utils import get_resilient_logger
from ..registry import register_benchmark
from .glyphs import ObjectFeatureGenerator, SyntheticGlyphGenerator, make_digit_generator, make_object_generator
from .tasks import Dataset, Task, TaskStream, attach_supervision

COLORS = ("red", "gray", "green", "blue", "brown", "purple", "yellow", "cyan", "orange", "pink")
SHAPES = (
	"sphere",
	"cube",
	"cylinder",
	"tetrahedron",
	"cone",
	"triangular prism",
	"pyramid",
	"toroid",
	"diamond",
	"star prism",
)
# (colors, shapes) available in each task, by index into COLORS / SHAPES
CLEVR_TASKS: Tuple[Tuple[Tuple[int, int], Tuple[int, int]], ...] = (
	((0, 1), (0, 1)),
	((2, 3), (2, 3)),
	((4, 5), (4, 5)),
	((6, 7), (6, 7)),
	((8, 9), (8, 9)),
)

MNADD_SEQ_TASKS = 9
SHORTCUT_TASK1_PAIRS = ((0, 6), (4, 6), (2, 8), (4, 8))
ODD_DIGITS = (1, 3, 5, 7, 9)
EVEN_DIGITS = (0, 2, 4, 6, 8)


def _log():
	return get_resilient_logger("nesycl.benchmarks")


@dataclass(frozen=True)
class StreamSizes:
	train: int = 600
	val: int = 120
	test: int = 200
	ood: int = 200

	def of(self, split: str) -> int:
		return int(getattr(self, split))


def _rngs(seed: int, n: int) -> List[np.random.Generator]:
	return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _render(sample: Callable[..., np.ndarray], attributes: np.ndarray, dim: int, rng) -> np.ndarray:
	"""Feature array (N, n_objects, dim) for per-object attribute tuples ``attributes`` (N, n_objects, a)."""
	n, n_obj = attributes.shape[:2]
	x = np.zeros((n, n_obj, dim))
	for obj in range(n_obj):
		keys = [tuple(int(v) for v in row) for row in attributes[:, obj]]
		for key in sorted(set(keys)):
			idx = np.array([i for i, k in enumerate(keys) if k == key], dtype=np.int64)
			x[idx, obj] = sample(*key, len(idx), rng)
	return x


def _addition_split(
	gen,
	pairs_by_label: Dict[int, Sequence[Tuple[int, int]]],
	n: int,
	rng: np.random.Generator,
) -> Dataset:
	labels = sorted(pairs_by_label)
	chosen = rng.choice(len(labels), size=n)
	concepts = np.zeros((n, 2), dtype=np.int64)
	y = np.zeros(n, dtype=np.int64)
	for i, li in enumerate(chosen):
		options = pairs_by_label[labels[li]]
		concepts[i] = options[int(rng.integers(len(options)))]
		y[i] = labels[li]
	x = _render(gen.sample, concepts[:, :, None], gen.dim, rng)
	return Dataset(x, concepts, y)


def _pairs_by_sum(pairs: Sequence[Tuple[int, int]]) -> Dict[int, List[Tuple[int, int]]]:
	grouped: Dict[int, List[Tuple[int, int]]] = {}
	for a, b in pairs:
		grouped.setdefault(a + b, []).append((a, b))
	return grouped


def _build_task(
	task_id: int,
	knowledge,
	make_split: Callable[[int, np.random.Generator], Dataset],
	sizes: StreamSizes,
	sup_fraction: float,
	rng: np.random.Generator,
	name: str,
) -> Task:
	train = attach_supervision(make_split(sizes.train, rng), sup_fraction, rng)
	return Task(task_id, knowledge, train, make_split(sizes.val, rng), make_split(sizes.test, rng), name)


@register_benchmark("mnadd-seq")
def gen_mnadd_seq(
	gen=None,
	sizes: StreamSizes = StreamSizes(),
	sup_fraction: float = 0.0,
	seed: int = 0,
) -> TaskStream:
	"""Nine addition tasks; task ``t`` (0-based) contains every digit pair summing to 2t or 2t+1."""
	gen = gen if gen is not None else make_digit_generator(seed=seed)
	all_pairs = list(itertools.product(range(10), repeat=2))
	rngs = _rngs(seed, MNADD_SEQ_TASKS)
	tasks = []
	for t in range(MNADD_SEQ_TASKS):
		grouped = {s: p for s, p in _pairs_by_sum(all_pairs).items() if s in (2 * t, 2 * t + 1)}
		tasks.append(
			_build_task(
				t,
				addition_knowledge(f"task{t}"),
				lambda n, rng, g=grouped: _addition_split(gen, g, n, rng),
				sizes,
				sup_fraction,
				rngs[t],
				f"sums {2 * t},{2 * t + 1}",
			)
		)
	_log().info(f"Generated mnadd-seq: tasks={len(tasks)} train={sizes.train} seed={seed}")
	return TaskStream("mnadd-seq", tasks)


def shortcut_task_pairs() -> Tuple[List[Tuple[int, int]], List[Tuple[int, int]], List[Tuple[int, int]]]:
	"""Ordered digit pairs of task 1, task 2 and the OOD split."""
	task1 = sorted({p for a, b in SHORTCUT_TASK1_PAIRS for p in ((a, b), (b, a))})
	task2 = list(itertools.product(ODD_DIGITS, repeat=2))
	mixed = [(a, b) for a, b in itertools.product(range(10), repeat=2) if (a + b) % 2 == 1]
	unseen_even = [p for p in itertools.product(EVEN_DIGITS, repeat=2) if p not in set(task1)]
	return task1, task2, mixed + unseen_even


@register_benchmark("mnadd-shortcut")
def gen_mnadd_shortcut(
	gen=None,
	sizes: StreamSizes = StreamSizes(),
	sup_fraction: float = 0.0,
	seed: int = 0,
) -> TaskStream:
	"""Two tasks that admit the 4<->9 shortcut, plus an OOD split that exposes it.

	Task 1 draws uniformly over the four sum types 0+6, 4+6, 2+8, 4+8 (digit
	order randomised); task 2 over all ordered odd-digit pairs.
	"""
	gen = gen if gen is not None else make_digit_generator(confusable=True, seed=seed)
	if (4, 9) not in getattr(gen, "confusable_pairs", ()):
		_log().warning("mnadd-shortcut generated without the (4, 9) confusable pair")
	_, task2_pairs, ood_pairs = shortcut_task_pairs()
	rngs = _rngs(seed, 3)

	def task1_split(n: int, rng: np.random.Generator) -> Dataset:
		kinds = rng.choice(len(SHORTCUT_TASK1_PAIRS), size=n)
		swap = rng.integers(0, 2, size=n).astype(bool)
		concepts = np.array([SHORTCUT_TASK1_PAIRS[k] for k in kinds], dtype=np.int64)
		concepts[swap] = concepts[swap][:, ::-1]
		x = _render(gen.sample, concepts[:, :, None], gen.dim, rng)
		return Dataset(x, concepts, concepts.sum(axis=1))

	def uniform_pairs_split(pairs: Sequence[Tuple[int, int]]) -> Callable[[int, np.random.Generator], Dataset]:
		def make(n: int, rng: np.random.Generator) -> Dataset:
			concepts = np.array([pairs[i] for i in rng.choice(len(pairs), size=n)], dtype=np.int64).reshape(n, 2)
			x = _render(gen.sample, concepts[:, :, None], gen.dim, rng)
			return Dataset(x, concepts, concepts.sum(axis=1))

		return make

	tasks = [
		_build_task(0, addition_knowledge("task0"), task1_split, sizes, sup_fraction, rngs[0], "even sums"),
		_build_task(
			1, addition_knowledge("task1"), uniform_pairs_split(task2_pairs), sizes, sup_fraction, rngs[1], "odd sums"
		),
	]
	ood = uniform_pairs_split(ood_pairs)(sizes.ood, rngs[2])
	_log().info(f"Generated mnadd-shortcut: train={sizes.train} ood={len(ood)} seed={seed}")
	return TaskStream("mnadd-shortcut", tasks, ood)


def _clevr_split(
	gen: ObjectFeatureGenerator,
	ck,
	colors: Sequence[int],
	shapes: Sequence[int],
	n: int,
	rng: np.random.Generator,
) -> Dataset:
	"""Scenes of two objects whose shapes and colors come from one task's vocabulary.

	Classes (different / same color only / same shape only / same) are
	balanced; objects of a class are drawn uniformly among the matching pairs.
	"""
	objects = list(itertools.product(shapes, colors))
	by_class: Dict[Tuple[int, int, int], List[Tuple[Tuple[int, int], Tuple[int, int]]]] = {}
	for o1, o2 in itertools.product(objects, repeat=2):
		same_shape, same_color = int(o1[0] == o2[0]), int(o1[1] == o2[1])
		by_class.setdefault((same_shape, same_color, same_shape & same_color), []).append((o1, o2))
	classes = sorted(by_class)
	attributes = np.zeros((n, 2, 2), dtype=np.int64)
	labels = np.zeros(n, dtype=np.int64)
	for i, k in enumerate(rng.choice(len(classes), size=n)):
		options = by_class[classes[k]]
		o1, o2 = options[int(rng.integers(len(options)))]
		attributes[i] = (o1, o2)
		labels[i] = ck.label_to_index(classes[k])
	return _clevr_dataset(gen, attributes, labels, rng)


def _clevr_dataset(gen: ObjectFeatureGenerator, attributes: np.ndarray, labels: np.ndarray, rng) -> Dataset:
	x = _render(gen.sample, attributes, gen.dim, rng)
	# slot order: shape1, shape2, color1, color2
	concepts = np.stack([attributes[:, 0, 0], attributes[:, 1, 0], attributes[:, 0, 1], attributes[:, 1, 1]], axis=1)
	return Dataset(x, concepts, labels)


@register_benchmark("clevr-like")
def gen_clevr_like(
	gen: Optional[ObjectFeatureGenerator] = None,
	sizes: StreamSizes = StreamSizes(),
	sup_fraction: float = 0.0,
	seed: int = 0,
) -> TaskStream:
	"""Five tasks over disjoint (color, shape) vocabularies; OOD pairs objects from different tasks."""
	gen = gen if gen is not None else make_object_generator(seed=seed)
	rngs = _rngs(seed, len(CLEVR_TASKS) + 1)
	ck = compile(clevr_knowledge())
	tasks = []
	for t, (colors, shapes) in enumerate(CLEVR_TASKS):
		knowledge = clevr_knowledge(f"task{t}")
		tasks.append(
			_build_task(
				t,
				knowledge,
				lambda n, rng, c=colors, s=shapes, k=ck: _clevr_split(gen, k, c, s, n, rng),
				sizes,
				sup_fraction,
				rngs[t],
				f"{COLORS[colors[0]]}/{COLORS[colors[1]]} {SHAPES[shapes[0]]}/{SHAPES[shapes[1]]}",
			)
		)

	# OOD: each object comes from a different task, so shapes and colors both differ
	ood_rng = rngs[-1]
	task_objects = [list(itertools.product(s, c)) for c, s in CLEVR_TASKS]
	attributes = np.zeros((sizes.ood, 2, 2), dtype=np.int64)
	for i in range(sizes.ood):
		t1, t2 = ood_rng.choice(len(CLEVR_TASKS), size=2, replace=False)
		o1 = task_objects[t1][int(ood_rng.integers(len(task_objects[t1])))]
		o2 = task_objects[t2][int(ood_rng.integers(len(task_objects[t2])))]
		attributes[i] = (o1, o2)
	ood_labels = np.full(sizes.ood, ck.label_to_index((0, 0, 0)), dtype=np.int64)
	ood = _clevr_dataset(gen, attributes, ood_labels, ood_rng)
	_log().info(f"Generated clevr-like: tasks={len(tasks)} train={sizes.train} ood={len(ood)} seed={seed}")
	return TaskStream("clevr-like", tasks, ood)


def xor_stream(
	n_tasks: int = 1,
	sizes: StreamSizes = StreamSizes(train=64, val=16, test=32, ood=0),
	dim: int = 4,
	sigma: float = 0.5,
	seed: int = 0,
) -> TaskStream:
	"""Toy stream over the XOR knowledge: two bit glyphs, label = bit1 xor bit2.

	Not a registered benchmark; used by the likelihood-maxima checks and their tests.
	"""
	gen = SyntheticGlyphGenerator(n_classes=2, dim=dim, sigma=sigma, seed=seed)
	rngs = _rngs(seed, n_tasks)
	grouped = {0: [(0, 0), (1, 1)], 1: [(0, 1), (1, 0)]}
	tasks = [
		_build_task(
			t,
			xor_toy(f"task{t}"),
			lambda n, rng: _addition_split(gen, grouped, n, rng),
			sizes,
			0.0,
			rngs[t],
			"xor",
		)
		for t in range(n_tasks)
	]
	return TaskStream("xor", tasks)
