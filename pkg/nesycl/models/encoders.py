"""Factorised concept extractors.

Each concept slot reads the input fragment of its own object through the
MLP of its head; slots that share a head share weights (the two digits of
an addition, the two objects of a scene). Marginals are row-wise softmaxes
of the head logits, so p(C|x) factorises as prod_j p(C_j|x_j).
"""

from __future__ import annotations

import copy
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import Tensor, as_tensor, softmax_rows
from ..exceptions import ConfigurationError
from ..knowledge.schema import ConceptSchema
from ..logger_utils import get_resilient_logger


def _log():
	return get_resilient_logger("nesycl.models")


class MLP:
	"""Fully connected ReLU network emitting unnormalised logits."""

	def __init__(
		self,
		input_dim: int,
		hidden: Sequence[int],
		output_dim: int,
		rng: np.random.Generator,
		zero_init_last: bool = False,
	):
		self.sizes: Tuple[int, ...] = (int(input_dim), *(int(h) for h in hidden), int(output_dim))
		self.zero_init_last = zero_init_last
		self.weights: List[Tensor] = []
		self.biases: List[Tensor] = []
		self.reinitialize(rng)

	def reinitialize(self, rng: np.random.Generator) -> None:
		"""He-normal weights, zero biases; the last layer is zero when ``zero_init_last``."""
		self.weights, self.biases = [], []
		n_layers = len(self.sizes) - 1
		for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
			if i == n_layers - 1 and self.zero_init_last:
				w = np.zeros((fan_in, fan_out))
			else:
				w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
			self.weights.append(Tensor(w, requires_grad=True))
			self.biases.append(Tensor(np.zeros(fan_out), requires_grad=True))

	def parameters(self) -> List[Tensor]:
		params: List[Tensor] = []
		for w, b in zip(self.weights, self.biases):
			params.extend((w, b))
		return params

	def __call__(
		self,
		x: Tensor,
		dropout: float = 0.0,
		rng: Optional[np.random.Generator] = None,
	) -> Tensor:
		h = x
		last = len(self.weights) - 1
		for i, (w, b) in enumerate(zip(self.weights, self.biases)):
			h = h @ w + b
			if i < last:
				h = h.relu()
				if dropout > 0.0 and rng is not None:
					keep = (rng.random(h.shape) >= dropout) / (1.0 - dropout)
					h = h * keep
		return h


class ConceptModel:
	"""Per-slot factorised encoders producing concept marginals.

	Inputs are arrays of shape ``(batch, n_objects, input_dim)``; slot ``j``
	only sees ``x[:, schema.slots[j].obj, :]``.

	Args:
		schema: Concept schema (slots, objects, heads)
		input_dim: Feature dimension of one object fragment
		hidden: Hidden layer widths of every head
		rng: Initialisation generator
		zero_init_last: Zero final layer, giving uniform starting marginals
		dropout: Dropout probability on hidden layers during training (default off)
		noise_std: Std of Gaussian noise added to head outputs during training (default off)
	"""

	def __init__(
		self,
		schema: ConceptSchema,
		input_dim: int,
		hidden: Sequence[int] = (64,),
		rng: Optional[np.random.Generator] = None,
		zero_init_last: bool = False,
		dropout: float = 0.0,
		noise_std: float = 0.0,
	):
		self.schema = schema
		self.input_dim = int(input_dim)
		self.hidden = tuple(int(h) for h in hidden)
		self.zero_init_last = zero_init_last
		self.dropout = float(dropout)
		self.noise_std = float(noise_std)
		self.frozen = False
		self.train_rng: Optional[np.random.Generator] = None

		head_sizes: Dict[str, int] = {}
		for slot in schema.slots:
			size = head_sizes.setdefault(slot.head, slot.cardinality)
			if size != slot.cardinality:
				raise ConfigurationError(
					f"ConceptModel: head '{slot.head}' is shared by slots of different cardinality"
				)
		self.head_names: Tuple[str, ...] = tuple(head_sizes)
		rng = rng if rng is not None else np.random.default_rng(0)
		self.heads: Dict[str, MLP] = {
			name: MLP(self.input_dim, self.hidden, head_sizes[name], rng, zero_init_last)
			for name in self.head_names
		}

	def parameters(self) -> List[Tensor]:
		"""Parameters in declaration order (heads in first-use order, layer by layer)."""
		params: List[Tensor] = []
		for name in self.head_names:
			params.extend(self.heads[name].parameters())
		return params

	def reinitialize(self, rng: np.random.Generator) -> None:
		for name in self.head_names:
			self.heads[name].reinitialize(rng)

	def _check_input(self, x: np.ndarray) -> np.ndarray:
		x = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
		if x.ndim != 3 or x.shape[1] < self.schema.n_objects or x.shape[2] != self.input_dim:
			raise ConfigurationError(
				f"ConceptModel: expected input (batch, >={self.schema.n_objects}, {self.input_dim}), got {x.shape}"
			)
		return x

	def logits(self, x: np.ndarray, train: bool = False) -> List[Tensor]:
		"""Per-slot logits; a (head, object) pair is evaluated once and reused."""
		x = self._check_input(x)
		rng = self.train_rng if train else None
		dropout = self.dropout if train else 0.0
		cache: Dict[Tuple[str, int], Tensor] = {}
		out: List[Tensor] = []
		for slot in self.schema.slots:
			key = (slot.head, slot.obj)
			if key not in cache:
				h = self.heads[slot.head](as_tensor(x[:, slot.obj, :]), dropout=dropout, rng=rng)
				if train and self.noise_std > 0.0 and rng is not None:
					h = h + rng.normal(0.0, self.noise_std, size=h.shape)
				cache[key] = h
			out.append(cache[key])
		return out

	def encode(self, x: np.ndarray, train: bool = False) -> List[Tensor]:
		return [softmax_rows(z) for z in self.logits(x, train=train)]

	def snapshot(self) -> "ConceptModel":
		"""Deep, frozen copy; training the original never touches it."""
		clone = copy.deepcopy(self)
		clone.train_rng = None
		for p in clone.parameters():
			p.requires_grad = False
			p.grad = None
		clone.frozen = True
		return clone

	def state(self) -> List[np.ndarray]:
		return [p.data.copy() for p in self.parameters()]

	def load_state(self, arrays: Sequence[np.ndarray]) -> None:
		params = self.parameters()
		if len(arrays) != len(params):
			raise ConfigurationError(f"load_state: expected {len(params)} arrays, got {len(arrays)}")
		for p, a in zip(params, arrays):
			if p.shape != tuple(a.shape):
				raise ConfigurationError(f"load_state: shape {a.shape} does not match {p.shape}")
			p.data = np.array(a, dtype=np.float64)


def encode_concepts(model: ConceptModel, x: np.ndarray, train: bool = False) -> List[Tensor]:
	"""One probability vector per slot and example (list of ``batch x cardinality`` tensors)."""
	return model.encode(x, train=train)


def concept_supervision_from_marginals(
	marginals: Sequence[Tensor],
	c_true: np.ndarray,
	mask: np.ndarray,
) -> Tensor:
	"""Mean of ``-log p(c_true_j)`` over the annotated (example, slot) entries; 0 when none are."""
	c_true = np.asarray(c_true, dtype=np.int64)
	mask = np.asarray(mask, dtype=bool)
	count = int(mask.sum())
	if count == 0:
		return Tensor(0.0)
	total: Optional[Tensor] = None
	for j, marginal in enumerate(marginals):
		if not mask[:, j].any():
			continue
		nll_j = -marginal.pick(c_true[:, j]).log()
		term = (nll_j * mask[:, j].astype(np.float64)).sum()
		total = term if total is None else total + term
	return total * (1.0 / count)


def concept_supervision_loss(model: ConceptModel, x: np.ndarray, c_true: np.ndarray, mask: np.ndarray) -> Tensor:
	return concept_supervision_from_marginals(model.encode(x), c_true, mask)


def snapshot(model):
	"""Frozen deep copy of a concept model or predictor."""
	return model.snapshot()
