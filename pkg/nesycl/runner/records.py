"""Run records (``run.json``) and tamper detection of run directories.

A run directory holds ``metrics.csv``, one ``confusion_<slot>.csv`` per
concept slot, the checkpoints ``ckpt_task<t>.bin`` and ``run.json``. The
record stores the full config, its hash and the SHA-256 of every output
file; ``verify_run_dir`` recomputes all of them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from .. import __version__
from ..benchmarks.io import MANIFEST_NAME, read_manifest
from ..config import PATH_FIELDS, RunConfig, config_from_dict, hash_config_dict
from ..exceptions import CheckpointError, ConfigurationError
from ..logger_utils import get_resilient_logger
from ..metrics.report import CONFIG_HASH_METRIC, read_confusion_csv, read_metrics_csv

RUN_RECORD = "run.json"
METRICS_FILE = "metrics.csv"
EVAL_FILE = "eval.csv"


def _log():
	return get_resilient_logger("nesycl.runner")


def file_digest(path: Union[str, Path]) -> str:
	digest = hashlib.sha256()
	with open(path, "rb") as fh:
		for chunk in iter(lambda: fh.read(1 << 16), b""):
			digest.update(chunk)
	return digest.hexdigest()


def run_dir_for(out: Union[str, Path], config: RunConfig) -> Path:
	"""``<out>/<benchmark>/<strategy>/<seed>``"""
	return Path(out) / config.benchmark / config.strategy / str(config.seed)


def confusion_file(slot: str) -> str:
	return f"confusion_{slot}.csv"


@dataclass
class RunRecord:
	config: Dict[str, Any]
	config_hash: str
	rows_y: List[List[float]]
	rows_c: List[List[float]]
	final_metrics: Dict[str, Optional[float]]
	wall_clock: float
	checkpoints: List[str]
	files: Dict[str, str] = field(default_factory=dict)
	dataset_dir: Optional[str] = None
	dataset_hash: Optional[str] = None
	version: str = __version__

	@property
	def run_config(self) -> RunConfig:
		return config_from_dict(self.config)

	def to_dict(self) -> Dict[str, Any]:
		return asdict(self)

	@classmethod
	def from_dict(cls, payload: Dict[str, Any]) -> "RunRecord":
		try:
			return cls(**payload)
		except TypeError as exc:
			raise ConfigurationError(f"malformed run record: {exc}") from exc


def write_run_record(run_dir: Union[str, Path], record: RunRecord, overwrite: bool = False) -> Path:
	"""Hash every listed output file into the record and write ``run.json``.

	Raises:
		ConfigurationError: If a record already exists and ``overwrite`` is False
	"""
	run_dir = Path(run_dir)
	path = run_dir / RUN_RECORD
	if path.exists() and not overwrite:
		raise ConfigurationError(f"{path} already exists; run records are written once")
	record.files = {name: file_digest(run_dir / name) for name in sorted(record.files)}
	path.write_text(json.dumps(record.to_dict(), indent=2, sort_keys=True), encoding="utf-8")
	return path


def read_run_record(run_dir: Union[str, Path]) -> RunRecord:
	path = Path(run_dir) / RUN_RECORD
	try:
		payload = json.loads(path.read_text(encoding="utf-8"))
	except (OSError, json.JSONDecodeError) as exc:
		raise ConfigurationError(f"Cannot read run record {path}: {exc}") from exc
	return RunRecord.from_dict(payload)


def final_checkpoint(run_dir: Union[str, Path], record: RunRecord) -> Path:
	"""Path of the last checkpoint of a run.

	Raises:
		CheckpointError: If the run has no checkpoint or the file is missing
	"""
	if not record.checkpoints:
		raise CheckpointError(f"{run_dir}: run recorded no checkpoints")
	path = Path(run_dir) / record.checkpoints[-1]
	if not path.exists():
		raise CheckpointError(f"{path}: checkpoint missing")
	return path


def verify_run_dir(run_dir: Union[str, Path]) -> List[str]:
	"""Problems found in a run directory (empty when everything matches).

	Checks the config hash against a re-hash of the stored config, the
	digest of every recorded file, the ``config_hash`` carried inside the
	metrics and confusion files, and the dataset manifest when still present.
	"""
	run_dir = Path(run_dir)
	record = read_run_record(run_dir)
	problems: List[str] = []
	rehash = hash_config_dict({k: v for k, v in record.config.items() if k not in PATH_FIELDS})
	if rehash != record.config_hash:
		problems.append(f"{RUN_RECORD}: config hash {record.config_hash[:12]} != re-hash {rehash[:12]}")

	for name, digest in record.files.items():
		path = run_dir / name
		if not path.exists():
			problems.append(f"{name}: missing")
		elif file_digest(path) != digest:
			problems.append(f"{name}: content changed since the run")

	metrics = run_dir / METRICS_FILE
	if metrics.exists():
		frame = read_metrics_csv(metrics)
		hashes = set(frame.loc[frame["metric"] == CONFIG_HASH_METRIC, "value"])
		if hashes != {record.config_hash}:
			problems.append(f"{METRICS_FILE}: config hash rows {sorted(hashes)} do not match the record")
	for path in sorted(run_dir.glob("confusion_*.csv")):
		stored, _ = read_confusion_csv(path)
		if stored != record.config_hash:
			problems.append(f"{path.name}: config hash does not match the record")

	if record.dataset_dir and record.dataset_hash and (Path(record.dataset_dir) / MANIFEST_NAME).exists():
		manifest = read_manifest(record.dataset_dir)
		if hash_config_dict(manifest.get("config", {})) != record.dataset_hash:
			problems.append(f"dataset manifest in {record.dataset_dir} changed since the run")

	for problem in problems:
		_log().warning(f"verify {run_dir}: {problem}")
	return problems
