"""Reverse-mode automatic differentiation over dense float64 arrays.

A ``Tensor`` wraps a numpy array and, when it takes part in a computation
that requires gradients, records the operation that produced it. Operations
executed inside a ``Tape`` context are also appended to the tape in creation
order, which is a valid topological order for the backward sweep.

Only what the concept encoders, reasoning layer, bilinear head and the
continual losses need is implemented: elementwise arithmetic with
broadcasting, matmul, reductions, exp/log/relu/tanh, gathers, reshapes and
concatenation.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import ConfigurationError

EPS = 1e-12

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]

_TAPE_STACK: List["Tape"] = []
_GRAD_ENABLED: List[bool] = [True]


class Tape:
	"""Append-only record of the operations executed while it is active.

	Nodes are appended as they are created, so every node's parents precede
	it. ``backward(loss, tape)`` sweeps the tape in reverse and visits each
	node exactly once.
	"""

	def __init__(self) -> None:
		self.nodes: List[Tensor] = []

	def record(self, node: "Tensor") -> None:
		self.nodes.append(node)

	def __len__(self) -> int:
		return len(self.nodes)

	def __contains__(self, node: object) -> bool:
		return any(n is node for n in self.nodes)

	def __enter__(self) -> "Tape":
		_TAPE_STACK.append(self)
		return self

	def __exit__(self, *exc) -> None:
		_TAPE_STACK.remove(self)


@contextmanager
def no_grad() -> Iterator[None]:
	"""Evaluate without recording operations (inference, buffer snapshots)."""
	_GRAD_ENABLED.append(False)
	try:
		yield
	finally:
		_GRAD_ENABLED.pop()


def grad_enabled() -> bool:
	return _GRAD_ENABLED[-1]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
	"""Sum ``grad`` over the axes that broadcasting expanded to reach ``shape``."""
	if grad.shape == shape:
		return grad
	while grad.ndim > len(shape):
		grad = grad.sum(axis=0)
	for axis, size in enumerate(shape):
		if size == 1 and grad.shape[axis] != 1:
			grad = grad.sum(axis=axis, keepdims=True)
	return grad.reshape(shape)


def as_tensor(value: ArrayLike) -> "Tensor":
	if isinstance(value, Tensor):
		return value
	return Tensor(value)


class Tensor:
	"""Dense float64 array with an optional gradient.

	Leaf tensors created with ``requires_grad=True`` are parameters; their
	``grad`` array is allocated up front and accumulated into by
	``backward``. Callers zero it between optimisation steps.
	"""

	def __init__(
		self,
		data: ArrayLike,
		requires_grad: bool = False,
		_parents: Tuple["Tensor", ...] = (),
		_op: str = "",
	):
		if isinstance(data, Tensor):
			data = data.data
		self.data: np.ndarray = np.array(data, dtype=np.float64)
		self.requires_grad = bool(requires_grad)
		self.grad: Optional[np.ndarray] = np.zeros_like(self.data) if self.requires_grad else None
		self._parents = _parents
		self._op = _op
		self._backward: Optional[Callable[[np.ndarray], None]] = None

	# ------------------------------------------------------------------
	# basic properties
	# ------------------------------------------------------------------

	@property
	def shape(self) -> Tuple[int, ...]:
		return self.data.shape

	@property
	def ndim(self) -> int:
		return self.data.ndim

	@property
	def size(self) -> int:
		return int(self.data.size)

	def item(self) -> float:
		if self.data.size != 1:
			raise ConfigurationError(f"item: tensor of shape {self.shape} is not a scalar")
		return float(self.data.reshape(-1)[0])

	def numpy(self) -> np.ndarray:
		return self.data.copy()

	def zero_grad(self) -> None:
		if self.requires_grad:
			self.grad = np.zeros_like(self.data)

	def detach(self) -> "Tensor":
		return Tensor(self.data.copy())

	def __repr__(self) -> str:
		return f"Tensor(shape={self.shape}, op={self._op or 'leaf'}, requires_grad={self.requires_grad})"

	# ------------------------------------------------------------------
	# graph plumbing
	# ------------------------------------------------------------------

	def _accumulate(self, grad: np.ndarray) -> None:
		grad = _unbroadcast(np.asarray(grad, dtype=np.float64), self.shape)
		if self.grad is None:
			self.grad = grad.copy()
		else:
			self.grad = self.grad + grad

	@staticmethod
	def _result(
		data: np.ndarray,
		parents: Tuple["Tensor", ...],
		op: str,
		backward: Callable[[np.ndarray], None],
	) -> "Tensor":
		out = Tensor.__new__(Tensor)
		out.data = np.asarray(data, dtype=np.float64)
		out._op = op
		needs_grad = grad_enabled() and any(p.requires_grad for p in parents)
		out.requires_grad = needs_grad
		out.grad = None
		if needs_grad:
			out._parents = parents
			out._backward = backward
			if _TAPE_STACK:
				_TAPE_STACK[-1].record(out)
		else:
			out._parents = ()
			out._backward = None
		return out

	# ------------------------------------------------------------------
	# arithmetic
	# ------------------------------------------------------------------

	def __add__(self, other: ArrayLike) -> "Tensor":
		other = as_tensor(other)

		def _backward(g: np.ndarray) -> None:
			if self.requires_grad:
				self._accumulate(g)
			if other.requires_grad:
				other._accumulate(g)

		return Tensor._result(self.data + other.data, (self, other), "add", _backward)

	def __radd__(self, other: ArrayLike) -> "Tensor":
		return as_tensor(other) + self

	def __neg__(self) -> "Tensor":
		def _backward(g: np.ndarray) -> None:
			self._accumulate(-g)

		return Tensor._result(-self.data, (self,), "neg", _backward)

	def __sub__(self, other: ArrayLike) -> "Tensor":
		other = as_tensor(other)

		def _backward(g: np.ndarray) -> None:
			if self.requires_grad:
				self._accumulate(g)
			if other.requires_grad:
				other._accumulate(-g)

		return Tensor._result(self.data - other.data, (self, other), "sub", _backward)

	def __rsub__(self, other: ArrayLike) -> "Tensor":
		return as_tensor(other) - self

	def __mul__(self, other: ArrayLike) -> "Tensor":
		other = as_tensor(other)

		def _backward(g: np.ndarray) -> None:
			if self.requires_grad:
				self._accumulate(g * other.data)
			if other.requires_grad:
				other._accumulate(g * self.data)

		return Tensor._result(self.data * other.data, (self, other), "mul", _backward)

	def __rmul__(self, other: ArrayLike) -> "Tensor":
		return as_tensor(other) * self

	def __truediv__(self, other: ArrayLike) -> "Tensor":
		other = as_tensor(other)

		def _backward(g: np.ndarray) -> None:
			if self.requires_grad:
				self._accumulate(g / other.data)
			if other.requires_grad:
				other._accumulate(-g * self.data / (other.data ** 2))

		return Tensor._result(self.data / other.data, (self, other), "div", _backward)

	def __rtruediv__(self, other: ArrayLike) -> "Tensor":
		return as_tensor(other) / self

	def __pow__(self, exponent: float) -> "Tensor":
		if isinstance(exponent, Tensor):
			raise ConfigurationError("pow: only constant exponents are supported")
		exponent = float(exponent)

		def _backward(g: np.ndarray) -> None:
			self._accumulate(g * exponent * self.data ** (exponent - 1.0))

		return Tensor._result(self.data ** exponent, (self,), "pow", _backward)

	def __matmul__(self, other: ArrayLike) -> "Tensor":
		return matmul(self, other)

	# ------------------------------------------------------------------
	# reductions and pointwise functions
	# ------------------------------------------------------------------

	def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
		def _backward(g: np.ndarray) -> None:
			if axis is not None and not keepdims:
				g = np.expand_dims(g, axis)
			self._accumulate(np.broadcast_to(g, self.shape))

		return Tensor._result(self.data.sum(axis=axis, keepdims=keepdims), (self,), "sum", _backward)

	def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
		count = self.data.size if axis is None else self.data.shape[axis]
		return self.sum(axis=axis, keepdims=keepdims) * (1.0 / max(count, 1))

	def exp(self) -> "Tensor":
		out_data = np.exp(self.data)

		def _backward(g: np.ndarray) -> None:
			self._accumulate(g * out_data)

		return Tensor._result(out_data, (self,), "exp", _backward)

	def log(self, floor: float = EPS) -> "Tensor":
		"""Natural log of ``max(x, floor)``; the gradient is zero where the floor is active."""
		clipped = np.maximum(self.data, floor)
		active = self.data > floor

		def _backward(g: np.ndarray) -> None:
			self._accumulate(np.where(active, g / clipped, 0.0))

		return Tensor._result(np.log(clipped), (self,), "log", _backward)

	def relu(self) -> "Tensor":
		mask = self.data > 0

		def _backward(g: np.ndarray) -> None:
			self._accumulate(g * mask)

		return Tensor._result(self.data * mask, (self,), "relu", _backward)

	def tanh(self) -> "Tensor":
		out_data = np.tanh(self.data)

		def _backward(g: np.ndarray) -> None:
			self._accumulate(g * (1.0 - out_data ** 2))

		return Tensor._result(out_data, (self,), "tanh", _backward)

	# ------------------------------------------------------------------
	# shape manipulation
	# ------------------------------------------------------------------

	def reshape(self, *shape: int) -> "Tensor":
		if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
			shape = tuple(shape[0])
		original = self.shape

		def _backward(g: np.ndarray) -> None:
			self._accumulate(g.reshape(original))

		return Tensor._result(self.data.reshape(shape), (self,), "reshape", _backward)

	@property
	def T(self) -> "Tensor":
		def _backward(g: np.ndarray) -> None:
			self._accumulate(g.T)

		return Tensor._result(self.data.T, (self,), "transpose", _backward)

	def take(self, indices: Union[np.ndarray, Sequence[int]], axis: int = -1) -> "Tensor":
		"""Gather entries along ``axis`` (repeated indices allowed)."""
		idx = np.asarray(indices, dtype=np.int64)
		axis = axis % self.ndim

		def _backward(g: np.ndarray) -> None:
			full = np.zeros_like(self.data)
			moved = np.moveaxis(full, axis, 0)
			np.add.at(moved, idx, np.moveaxis(g, axis, 0))
			self._accumulate(full)

		return Tensor._result(np.take(self.data, idx, axis=axis), (self,), "take", _backward)

	def pick(self, columns: Union[np.ndarray, Sequence[int]]) -> "Tensor":
		"""Select one column per row of a rank-2 tensor: ``out[i] = self[i, columns[i]]``."""
		cols = np.asarray(columns, dtype=np.int64)
		rows = np.arange(self.shape[0])

		def _backward(g: np.ndarray) -> None:
			full = np.zeros_like(self.data)
			np.add.at(full, (rows, cols), g)
			self._accumulate(full)

		return Tensor._result(self.data[rows, cols], (self,), "pick", _backward)


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
	"""Matrix product of two rank-2 tensors; gradients flow into both operands."""
	a, b = as_tensor(a), as_tensor(b)
	if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
		raise ConfigurationError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

	def _backward(g: np.ndarray) -> None:
		if a.requires_grad:
			a._accumulate(g @ b.data.T)
		if b.requires_grad:
			b._accumulate(a.data.T @ g)

	return Tensor._result(a.data @ b.data, (a, b), "matmul", _backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
	parts = [as_tensor(t) for t in tensors]
	sizes = [p.shape[axis] for p in parts]
	bounds = np.cumsum([0] + sizes)

	def _backward(g: np.ndarray) -> None:
		for part, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
			if part.requires_grad:
				part._accumulate(np.take(g, np.arange(lo, hi), axis=axis))

	return Tensor._result(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), "concat", _backward)


def segment_sum(values: ArrayLike, segment_ids: Union[np.ndarray, Sequence[int]], n_segments: int) -> Tensor:
	"""Sum the columns of a rank-2 tensor into ``n_segments`` groups.

	``segment_ids`` assigns each column to a group and must be sorted
	(non-decreasing); groups without columns sum to zero.
	"""
	values = as_tensor(values)
	ids = np.asarray(segment_ids, dtype=np.int64)
	if values.ndim != 2 or values.shape[1] != ids.size:
		raise ConfigurationError(f"segment_sum: {values.shape} does not match {ids.size} segment ids")
	out = np.zeros((values.shape[0], n_segments))
	if ids.size:
		starts = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]])
		out[:, ids[starts]] = np.add.reduceat(values.data, starts, axis=1)

	def _backward(g: np.ndarray) -> None:
		values._accumulate(g[:, ids])

	return Tensor._result(out, (values,), "segment_sum", _backward)


def _topological_order(root: Tensor) -> List[Tensor]:
	order: List[Tensor] = []
	visited = set()
	stack: List[Tuple[Tensor, bool]] = [(root, False)]
	while stack:
		node, expanded = stack.pop()
		if expanded:
			order.append(node)
			continue
		if id(node) in visited:
			continue
		visited.add(id(node))
		stack.append((node, True))
		for parent in node._parents:
			if id(parent) not in visited:
				stack.append((parent, False))
	return order


def backward(loss: Tensor, tape: Optional[Tape] = None) -> None:
	"""Populate gradients of ``loss`` with respect to every tensor that requires them.

	With a tape the sweep walks the recorded nodes in reverse creation
	order; without one the graph reachable from ``loss`` is sorted
	topologically. Parameter gradients accumulate; the caller zeroes them
	between steps.

	Raises:
		ConfigurationError: If ``loss`` is not a scalar
	"""
	if loss.size != 1:
		raise ConfigurationError(f"backward: loss must be a scalar, got shape {loss.shape}")
	if not loss.requires_grad:
		return
	if tape is not None and loss._backward is not None and loss not in tape:
		raise ConfigurationError("backward: loss was not recorded on the given tape")

	order = tape.nodes if tape is not None else _topological_order(loss)
	loss.grad = np.ones_like(loss.data)
	for node in reversed(order):
		if node._backward is not None and node.grad is not None:
			node._backward(node.grad)
