"""Input sources: seeded Gaussian-prototype glyphs and real MNIST digits.

A source turns a concept value into feature vectors through
``sample(cls, n, rng) -> (n, dim)``. The synthetic generator keeps the
causal structure of image benchmarks (concepts cause features, p(C|X) is
stable across tasks) at a fraction of the cost, and exposes a
confusability knob: listed class pairs get prototypes only ``1.5 sigma``
apart, every other pair is at least ``4 sigma`` apart.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from ..exceptions import ConfigurationError

PROTOTYPE_DISTANCE = 6.0
CONFUSABLE_DISTANCE = 1.5
MIN_DISTANCE = 4.0


@dataclass
class SyntheticGlyphGenerator:
	"""Class prototypes plus isotropic Gaussian noise.

	Prototypes are the scaled standard basis under a seeded random rotation,
	so all non-confusable pairs sit at ``PROTOTYPE_DISTANCE * sigma``. The
	second class of each confusable pair is moved to
	``CONFUSABLE_DISTANCE * sigma`` from the first; by the triangle inequality it
	stays at least ``MIN_DISTANCE * sigma`` from every other class.
	"""

	n_classes: int = 10
	dim: int = 16
	sigma: float = 1.0
	confusable_pairs: Tuple[Tuple[int, int], ...] = ()
	seed: int = 0
	prototypes: np.ndarray = field(init=False, repr=False)

	def __post_init__(self) -> None:
		if self.n_classes > self.dim:
			raise ConfigurationError(f"glyph dim {self.dim} must be >= number of classes {self.n_classes}")
		if self.sigma <= 0:
			raise ConfigurationError(f"glyph sigma must be > 0, got {self.sigma}")
		self.confusable_pairs = tuple((int(a), int(b)) for a, b in self.confusable_pairs)
		moved = [b for _, b in self.confusable_pairs]
		if len(set(moved)) != len(moved) or set(moved) & {a for a, _ in self.confusable_pairs}:
			raise ConfigurationError("confusable pairs must not chain or share their second class")

		rng = np.random.default_rng(self.seed)
		rotation, _ = np.linalg.qr(rng.normal(size=(self.dim, self.dim)))
		scale = PROTOTYPE_DISTANCE * self.sigma / np.sqrt(2.0)
		protos = scale * rotation[:, : self.n_classes].T
		for a, b in self.confusable_pairs:
			direction = rng.normal(size=self.dim)
			direction /= np.linalg.norm(direction)
			protos[b] = protos[a] + CONFUSABLE_DISTANCE * self.sigma * direction
		self.prototypes = protos

	@property
	def confusable(self) -> bool:
		return bool(self.confusable_pairs)

	def sample(self, cls: int, n: int, rng: np.random.Generator) -> np.ndarray:
		return self.prototypes[int(cls)] + self.sigma * rng.normal(size=(int(n), self.dim))

	def pairwise_distances(self) -> np.ndarray:
		diff = self.prototypes[:, None, :] - self.prototypes[None, :, :]
		return np.linalg.norm(diff, axis=-1)


class IdxGlyphSource:
	"""Real digit images (flattened, scaled to [0, 1]) behind the glyph interface.

	Args:
		features: (N, 784) array as returned by ``load_mnist_idx``
		labels: (N,) class labels
	"""

	def __init__(self, features: np.ndarray, labels: np.ndarray):
		self.features = np.asarray(features, dtype=np.float64)
		self.labels = np.asarray(labels, dtype=np.int64)
		if self.features.shape[0] != self.labels.shape[0]:
			raise ConfigurationError("IdxGlyphSource: features and labels have different lengths")
		self.dim = int(self.features.shape[1])
		self.n_classes = int(self.labels.max()) + 1 if self.labels.size else 0
		self.confusable_pairs: Tuple[Tuple[int, int], ...] = ()
		self._by_class: Dict[int, np.ndarray] = {
			c: np.flatnonzero(self.labels == c) for c in range(self.n_classes)
		}

	@property
	def confusable(self) -> bool:
		return False

	def sample(self, cls: int, n: int, rng: np.random.Generator) -> np.ndarray:
		pool = self._by_class.get(int(cls))
		if pool is None or pool.size == 0:
			raise ConfigurationError(f"IdxGlyphSource: no images of class {cls}")
		return self.features[rng.choice(pool, size=int(n), replace=True)]


@dataclass
class ObjectFeatureGenerator:
	"""Two-attribute objects: ``[shape glyph | color glyph | nuisance]``.

	The nuisance block one-hot encodes material and size (two values each),
	drawn at random; they never influence the label.
	"""

	shapes: SyntheticGlyphGenerator
	colors: SyntheticGlyphGenerator
	nuisance_sigma: float = 0.1

	N_NUISANCE = 4

	@property
	def dim(self) -> int:
		return self.shapes.dim + self.colors.dim + self.N_NUISANCE

	def sample(self, shape: int, color: int, n: int, rng: np.random.Generator) -> np.ndarray:
		n = int(n)
		nuisance = np.zeros((n, self.N_NUISANCE))
		material = rng.integers(0, 2, size=n)
		size = rng.integers(0, 2, size=n)
		nuisance[np.arange(n), material] = 1.0
		nuisance[np.arange(n), 2 + size] = 1.0
		nuisance += self.nuisance_sigma * rng.normal(size=nuisance.shape)
		return np.concatenate(
			[self.shapes.sample(shape, n, rng), self.colors.sample(color, n, rng), nuisance], axis=1
		)


def make_digit_generator(
	dim: int = 16, sigma: float = 1.0, confusable: bool = False, seed: int = 0
) -> SyntheticGlyphGenerator:
	"""Digit glyphs; ``confusable`` moves 9 next to 4."""
	pairs: Sequence[Tuple[int, int]] = ((4, 9),) if confusable else ()
	return SyntheticGlyphGenerator(n_classes=10, dim=dim, sigma=sigma, confusable_pairs=tuple(pairs), seed=seed)


def make_object_generator(dim: int = 16, sigma: float = 1.0, seed: int = 0) -> ObjectFeatureGenerator:
	return ObjectFeatureGenerator(
		shapes=SyntheticGlyphGenerator(n_classes=10, dim=dim, sigma=sigma, seed=seed),
		colors=SyntheticGlyphGenerator(n_classes=10, dim=dim, sigma=sigma, seed=seed + 1),
	)
