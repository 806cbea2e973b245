"""Run metrics as CSV rows ``strategy,seed,metric,task,value``.

Per-stage accuracies are written as ``acc_y_after_{e}`` / ``acc_c_after_{e}``
(and their ``_masked`` variants) with ``task`` set to the evaluated task;
aggregates use ``task = -1``. Every file carries the run's config hash: a
``config_hash`` row in metrics files, a leading comment in confusion files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from ..exceptions import ConfigurationError
from .continual import AccuracyMatrix
from .evaluation import ConfusionMatrix

COLUMNS = ["strategy", "seed", "metric", "task", "value"]
AGGREGATE_TASK = -1
CONFIG_HASH_METRIC = "config_hash"
CONFUSION_HASH_PREFIX = "# config_hash="


def _format(value: Any) -> str:
	if isinstance(value, (float, np.floating)):
		return repr(float(value))
	return str(value)


@dataclass
class EvalReport:
	strategy: str
	seed: int
	rows: List[Dict[str, Any]] = field(default_factory=list)

	def add(self, metric: str, value: Any, task: int = AGGREGATE_TASK) -> None:
		"""Append one row; ``None`` values (absent metrics) are skipped."""
		if value is None:
			return
		self.rows.append(
			{"strategy": self.strategy, "seed": int(self.seed), "metric": metric, "task": int(task), "value": _format(value)}
		)

	def add_matrix(self, prefix: str, matrix: AccuracyMatrix) -> None:
		for e in range(matrix.n_rows):
			for s in range(matrix.n_tasks):
				if np.isfinite(matrix.values[e, s]):
					self.add(f"{prefix}_after_{e}", float(matrix.values[e, s]), task=s)

	def to_frame(self) -> pd.DataFrame:
		return pd.DataFrame(self.rows, columns=COLUMNS)

	def value(self, metric: str, task: int = AGGREGATE_TASK) -> Optional[str]:
		for row in self.rows:
			if row["metric"] == metric and row["task"] == task:
				return row["value"]
		return None

	def write_csv(self, path: Union[str, Path]) -> Path:
		path = Path(path)
		path.parent.mkdir(parents=True, exist_ok=True)
		self.to_frame().to_csv(path, index=False, lineterminator="\n")
		return path


def read_metrics_csv(path: Union[str, Path]) -> pd.DataFrame:
	"""Metrics file as a frame with ``value`` kept as text (hash rows are not numeric)."""
	try:
		frame = pd.read_csv(path, dtype={"value": str})
	except (OSError, pd.errors.ParserError) as exc:
		raise ConfigurationError(f"Cannot read metrics file {path}: {exc}") from exc
	missing = [c for c in COLUMNS if c not in frame.columns]
	if missing:
		raise ConfigurationError(f"Metrics file {path} lacks columns {missing}")
	return frame


def numeric_metrics(frame: pd.DataFrame) -> pd.DataFrame:
	"""Rows whose value parses as a number, with a float ``value`` column."""
	out = frame[frame["metric"] != CONFIG_HASH_METRIC].copy()
	out["value"] = pd.to_numeric(out["value"], errors="coerce")
	return out.dropna(subset=["value"])


def write_confusion_csv(path: Union[str, Path], matrix: ConfusionMatrix, config_hash: str) -> Path:
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	d = matrix.counts.shape[1]
	frame = pd.DataFrame(matrix.counts, columns=[f"pred_{i}" for i in range(d)])
	frame.insert(0, "true", np.arange(matrix.counts.shape[0]))
	with open(path, "w", encoding="utf-8", newline="") as fh:
		fh.write(f"{CONFUSION_HASH_PREFIX}{config_hash}\n")
		frame.to_csv(fh, index=False, lineterminator="\n")
	return path


def read_confusion_csv(path: Union[str, Path]) -> tuple:
	"""``(config_hash, counts)`` of a file written by ``write_confusion_csv``."""
	path = Path(path)
	with open(path, encoding="utf-8") as fh:
		first = fh.readline().strip()
	if not first.startswith(CONFUSION_HASH_PREFIX):
		raise ConfigurationError(f"{path}: missing config hash header")
	frame = pd.read_csv(path, comment="#")
	counts = frame[[c for c in frame.columns if c.startswith("pred_")]].to_numpy(dtype=np.int64)
	return first[len(CONFUSION_HASH_PREFIX) :], counts
