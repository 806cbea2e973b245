"""Dataset files: one CSV per task, an OOD CSV, and a JSON manifest.

CSV header::

	split,task,slot,feat_0..feat_{d-1},concept_0..concept_{k-1},label,supervised

One row per object; the rows of a record are consecutive with ``slot``
running over the object index. ``concept_*`` hold the record's full concept
tuple, ``label`` its label index and ``supervised`` whether the record is
concept-annotated.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from ..config import hash_config_dict
from ..exceptions import ConfigurationError
from ..logger_utils import get_resilient_logger
from ..registry import get_knowledge
from .tasks import SPLITS, Dataset, Task, TaskStream

MANIFEST_NAME = "manifest.json"
OOD_FILE = "ood.csv"
OOD_TASK_ID = -1


def _log():
	return get_resilient_logger("nesycl.benchmarks")


def task_file(task_id: int) -> str:
	return f"task_{task_id}.csv"


def dataset_frame(data: Dataset, split: str, task_id: int) -> pd.DataFrame:
	n, n_obj, dim = data.x.shape
	k = data.concepts.shape[1]
	frame = pd.DataFrame(
		{
			"split": np.repeat(split, n * n_obj),
			"task": np.full(n * n_obj, task_id, dtype=np.int64),
			"slot": np.tile(np.arange(n_obj, dtype=np.int64), n),
		}
	)
	feats = pd.DataFrame(data.x.reshape(n * n_obj, dim), columns=[f"feat_{i}" for i in range(dim)])
	concepts = pd.DataFrame(
		np.repeat(data.concepts, n_obj, axis=0), columns=[f"concept_{j}" for j in range(k)]
	)
	tail = pd.DataFrame(
		{
			"label": np.repeat(data.labels, n_obj),
			"supervised": np.repeat(data.annotated().astype(np.int64), n_obj),
		}
	)
	return pd.concat([frame, feats, concepts, tail], axis=1)


def frame_dataset(frame: pd.DataFrame, n_objects: int) -> Dataset:
	feat_cols = [c for c in frame.columns if c.startswith("feat_")]
	concept_cols = [c for c in frame.columns if c.startswith("concept_")]
	if len(frame) % n_objects:
		raise ConfigurationError(f"dataset rows ({len(frame)}) are not a multiple of n_objects={n_objects}")
	n = len(frame) // n_objects
	x = frame[feat_cols].to_numpy(dtype=np.float64).reshape(n, n_objects, len(feat_cols))
	firsts = frame.iloc[::n_objects]
	concepts = firsts[concept_cols].to_numpy(dtype=np.int64)
	mask = np.repeat(firsts["supervised"].to_numpy(dtype=bool)[:, None], len(concept_cols), axis=1)
	return Dataset(x, concepts, firsts["label"].to_numpy(dtype=np.int64), mask)


def _read_frame(path: Path) -> pd.DataFrame:
	try:
		return pd.read_csv(path, float_precision="round_trip")
	except (OSError, pd.errors.ParserError) as exc:
		raise ConfigurationError(f"Cannot read dataset file {path}: {exc}") from exc


def write_stream(
	stream: TaskStream,
	out_dir: Union[str, Path],
	config: Optional[Dict[str, Any]] = None,
) -> Path:
	"""Write every task (and the OOD split) plus a manifest; returns the manifest path."""
	out = Path(out_dir)
	out.mkdir(parents=True, exist_ok=True)
	files: List[str] = []
	for task in stream.tasks:
		frame = pd.concat([dataset_frame(task.split(s), s, task.task_id) for s in SPLITS], ignore_index=True)
		frame.to_csv(out / task_file(task.task_id), index=False)
		files.append(task_file(task.task_id))
	if stream.ood is not None:
		dataset_frame(stream.ood, "ood", OOD_TASK_ID).to_csv(out / OOD_FILE, index=False)
		files.append(OOD_FILE)

	first = stream.tasks[0].train if stream.tasks else stream.ood
	config = dict(config or {})
	manifest = {
		"benchmark": stream.benchmark,
		"config": config,
		"config_hash": hash_config_dict(config),
		"n_objects": first.n_objects if first is not None else 0,
		"feature_dim": first.dim if first is not None else 0,
		"tasks": [
			{"id": t.task_id, "name": t.name, "knowledge": t.knowledge.name, "task_tag": t.knowledge.task_tag}
			for t in stream.tasks
		],
		"files": files,
	}
	path = out / MANIFEST_NAME
	path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
	_log().info(f"Wrote {stream.benchmark} dataset to {out} ({len(files)} files)")
	return path


def read_manifest(data_dir: Union[str, Path]) -> Dict[str, Any]:
	path = Path(data_dir) / MANIFEST_NAME
	try:
		return json.loads(path.read_text(encoding="utf-8"))
	except (OSError, json.JSONDecodeError) as exc:
		raise ConfigurationError(f"Cannot read dataset manifest {path}: {exc}") from exc


def read_stream(data_dir: Union[str, Path]) -> TaskStream:
	"""Rebuild a ``TaskStream`` from files written by ``write_stream``."""
	data_dir = Path(data_dir)
	manifest = read_manifest(data_dir)
	n_objects = int(manifest["n_objects"])
	tasks = []
	for entry in manifest["tasks"]:
		frame = _read_frame(data_dir / task_file(entry["id"]))
		splits = {s: frame_dataset(frame[frame["split"] == s].reset_index(drop=True), n_objects) for s in SPLITS}
		knowledge = get_knowledge(entry["knowledge"])(entry.get("task_tag", ""))
		tasks.append(Task(int(entry["id"]), knowledge, splits["train"], splits["val"], splits["test"], entry.get("name", "")))
	ood = None
	if OOD_FILE in manifest.get("files", []):
		ood = frame_dataset(_read_frame(data_dir / OOD_FILE), n_objects)
	return TaskStream(manifest["benchmark"], tasks, ood)
