"""Continual-learning metrics over accuracy matrices.

``A[e][s]`` is the accuracy of the model obtained after training task ``e``
on the test set of task ``s`` (0-based). With ``T`` tasks:

- Class-IL = mean_s A[T-1][s]
- Task-IL = the same on the matrix evaluated with predictions masked to each
  task's admissible values
- FWT = mean_{t<T-1} A[t][t+1] - A_rand[t+1]
- BWT = mean_t A[t][t] - A[T-1][t]; positive values mean forgetting
"""

from __future__ import annotations

from typing import List, Optional, Sequence

import numpy as np

from ..exceptions import ConfigurationError


class AccuracyMatrix:
	"""Rows are training stages, columns are evaluated tasks; unset entries are NaN."""

	def __init__(self, n_rows: int, n_tasks: Optional[int] = None, random_row: Optional[Sequence[float]] = None):
		self.n_rows = int(n_rows)
		self.n_tasks = int(n_tasks if n_tasks is not None else n_rows)
		self.values = np.full((self.n_rows, self.n_tasks), np.nan)
		self.random = (
			np.asarray(random_row, dtype=np.float64) if random_row is not None else np.full(self.n_tasks, np.nan)
		)

	@classmethod
	def from_rows(cls, rows: Sequence[Sequence[float]], random_row: Optional[Sequence[float]] = None) -> "AccuracyMatrix":
		rows = np.asarray(rows, dtype=np.float64)
		matrix = cls(rows.shape[0], rows.shape[1], random_row)
		matrix.values[:] = rows
		return matrix

	def set(self, e: int, s: int, value: float) -> None:
		if not 0.0 <= value <= 1.0:
			raise ConfigurationError(f"accuracy must be in [0, 1], got {value}")
		self.values[e, s] = value

	def set_row(self, e: int, values: Sequence[float]) -> None:
		for s, v in enumerate(values):
			self.set(e, s, float(v))

	def row(self, e: int) -> np.ndarray:
		return self.values[e].copy()

	def row_complete(self, e: int) -> bool:
		return bool(np.all(np.isfinite(self.values[e])))

	def rows(self) -> List[List[float]]:
		return self.values.tolist()


def _last_row(A: AccuracyMatrix, T: int) -> np.ndarray:
	if T < 1 or T > A.n_tasks:
		raise ConfigurationError(f"T={T} outside 1..{A.n_tasks}")
	last = A.n_rows - 1
	row = A.values[last, :T]
	if not np.all(np.isfinite(row)):
		raise ConfigurationError(f"accuracy matrix row {last} is incomplete")
	return row


def class_il(A: AccuracyMatrix, T: Optional[int] = None) -> float:
	"""Mean accuracy of the final model over the first ``T`` tasks."""
	return float(np.mean(_last_row(A, T or A.n_tasks)))


def task_il(A_masked: AccuracyMatrix, T: Optional[int] = None) -> float:
	"""Class-IL of a matrix whose predictions were masked to each task's admissible labels."""
	return float(np.mean(_last_row(A_masked, T or A_masked.n_tasks)))


def fwt(A: AccuracyMatrix, A_rand: Optional[Sequence[float]] = None, T: Optional[int] = None) -> Optional[float]:
	"""Forward transfer; ``None`` (absent) when fewer than two stages exist."""
	T = T or A.n_tasks
	if T < 2 or A.n_rows < T:
		return None
	rand = np.asarray(A_rand if A_rand is not None else A.random, dtype=np.float64)
	gains = [A.values[t, t + 1] - rand[t + 1] for t in range(T - 1)]
	if not np.all(np.isfinite(gains)):
		raise ConfigurationError("fwt: missing entries above the diagonal or in the random baseline")
	return float(np.mean(gains))


def bwt(A: AccuracyMatrix, T: Optional[int] = None) -> Optional[float]:
	"""Backward transfer as the average drop from the diagonal to the last row; ``None`` when T < 2."""
	T = T or A.n_tasks
	if T < 2 or A.n_rows < T:
		return None
	diag = np.array([A.values[t, t] for t in range(T)])
	last = _last_row(A, T)
	if not np.all(np.isfinite(diag)):
		raise ConfigurationError("bwt: diagonal is incomplete")
	return float(np.mean(diag - last))
