from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from .exceptions import ConfigurationError
from .logger_utils import get_resilient_logger

# Environment keys
NESYCL_DATA_DIR = "NESYCL_DATA_DIR"
NESYCL_OUT_DIR = "NESYCL_OUT_DIR"
NESYCL_LOG_DIR = "NESYCL_LOG_DIR"
NESYCL_LOG_LEVEL = "NESYCL_LOG_LEVEL"
NESYCL_ENUM_CAP = "NESYCL_ENUM_CAP"

DEFAULT_ENUM_CAP = 1_000_000
DEFAULT_DATA_DIR = "./data"
DEFAULT_OUT_DIR = "./runs"

MODEL_FAMILIES = ("nesy", "cbm")

# Desk-scale protocol per benchmark (epochs per task, buffer capacity)
BENCHMARK_PROTOCOLS: Dict[str, Dict[str, Any]] = {
	"mnadd-seq": {"epochs": 25, "buffer_capacity": 1000},
	"mnadd-shortcut": {"epochs": 100, "buffer_capacity": 1000, "confusable": True},
	"clevr-like": {"epochs": 50, "buffer_capacity": 250},
}

# Excluded from the config hash: they move outputs, not results
PATH_FIELDS = ("data_dir", "out_dir")


def _log():
	"""Get logger for config module."""
	return get_resilient_logger("nesycl.config")


def enumeration_cap() -> int:
	"""Configured enumeration cap (``NESYCL_ENUM_CAP``, default 10^6)."""
	raw = os.environ.get(NESYCL_ENUM_CAP, "").strip()
	if not raw:
		return DEFAULT_ENUM_CAP
	try:
		cap = int(float(raw))
	except ValueError as exc:
		raise ConfigurationError(f"{NESYCL_ENUM_CAP} must be an integer, got '{raw}'") from exc
	if cap < 1:
		raise ConfigurationError(f"{NESYCL_ENUM_CAP} must be positive, got {cap}")
	return cap


def data_dir() -> Path:
	return Path(os.environ.get(NESYCL_DATA_DIR) or DEFAULT_DATA_DIR)


def out_dir() -> Path:
	return Path(os.environ.get(NESYCL_OUT_DIR) or DEFAULT_OUT_DIR)


@dataclass
class RunConfig:
	"""Everything that determines a run, given a dataset.

	JSON config keys mirror these field names exactly.
	"""

	benchmark: str = "mnadd-seq"
	strategy: str = "naive"
	model: str = "nesy"
	seed: int = 0

	# optimisation
	epochs: int = 25
	lr: float = 1e-3
	lr_decay: float = 0.95
	batch_size: int = 32
	replay_batch_size: int = 0

	# strategy weights
	alpha: float = 1.0
	beta_replay: float = 1.0
	lambda_ewc: float = 1.0
	lambda_lwf: float = 1.0
	lwf_temperature: float = 2.0
	w_c: float = 1.0
	buffer_capacity: int = 1000

	# encoders
	hidden: List[int] = field(default_factory=lambda: [64])
	zero_init_last: bool = False
	dropout: float = 0.0
	noise_std: float = 0.0

	# data
	sup_fraction: float = 0.0
	train_size: int = 600
	val_size: int = 120
	test_size: int = 200
	ood_size: int = 200
	feature_dim: int = 16
	sigma: float = 1.0
	confusable: bool = False
	data_seed: Optional[int] = None

	# analysis
	shortcut_threshold: float = 0.95

	data_dir: str = DEFAULT_DATA_DIR
	out_dir: str = DEFAULT_OUT_DIR

	def __post_init__(self) -> None:
		self.hidden = [int(h) for h in self.hidden]

	@property
	def effective_replay_batch(self) -> int:
		return self.replay_batch_size or self.batch_size

	@property
	def effective_data_seed(self) -> int:
		return self.seed if self.data_seed is None else int(self.data_seed)

	def validate(self) -> "RunConfig":
		"""Check ranges; registry names are validated where they are resolved.

		Raises:
			ConfigurationError: If any field is out of range
		"""
		if self.model not in MODEL_FAMILIES:
			raise ConfigurationError(f"model must be one of {MODEL_FAMILIES}, got '{self.model}'")
		for name in ("alpha", "beta_replay", "lambda_ewc", "lambda_lwf", "w_c", "dropout", "noise_std"):
			if getattr(self, name) < 0:
				raise ConfigurationError(f"{name} must be >= 0, got {getattr(self, name)}")
		if not 0.0 <= self.sup_fraction <= 1.0:
			raise ConfigurationError(f"sup_fraction must be in [0, 1], got {self.sup_fraction}")
		if self.dropout >= 1.0:
			raise ConfigurationError(f"dropout must be < 1, got {self.dropout}")
		if self.lwf_temperature <= 0:
			raise ConfigurationError(f"lwf_temperature must be > 0, got {self.lwf_temperature}")
		for name in ("epochs", "batch_size", "train_size", "test_size", "feature_dim"):
			if getattr(self, name) < 1:
				raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
		if self.buffer_capacity < 0 or self.replay_batch_size < 0:
			raise ConfigurationError("buffer_capacity and replay_batch_size must be >= 0")
		if self.lr <= 0 or not 0 < self.lr_decay <= 1:
			raise ConfigurationError(f"lr must be > 0 and lr_decay in (0, 1], got {self.lr}, {self.lr_decay}")
		return self

	def to_dict(self) -> Dict[str, Any]:
		return asdict(self)

	def hashable_dict(self) -> Dict[str, Any]:
		return {k: v for k, v in self.to_dict().items() if k not in PATH_FIELDS}

	def config_hash(self) -> str:
		"""SHA-256 of the canonical (sorted-key) JSON, output paths excluded."""
		return hash_config_dict(self.hashable_dict())

	def replace(self, **changes: Any) -> "RunConfig":
		values = self.to_dict()
		values.update(changes)
		return config_from_dict(values)


def hash_config_dict(values: Mapping[str, Any]) -> str:
	canonical = json.dumps(dict(values), sort_keys=True, separators=(",", ":"))
	return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _known_fields() -> Tuple[str, ...]:
	return tuple(f.name for f in fields(RunConfig))


def _check_keys(values: Mapping[str, Any], source: str) -> None:
	unknown = sorted(set(values) - set(_known_fields()))
	if unknown:
		raise ConfigurationError(f"Unknown config keys in {source}: {', '.join(unknown)}")


def config_from_dict(values: Mapping[str, Any]) -> RunConfig:
	_check_keys(values, "config")
	return RunConfig(**dict(values)).validate()


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
	"""Read a JSON config file; an absent path yields an empty layer.

	Raises:
		ConfigurationError: If the file cannot be parsed or is not an object
	"""
	if not path:
		return {}
	try:
		with open(path, encoding="utf-8") as fh:
			payload = json.load(fh)
	except (OSError, json.JSONDecodeError) as exc:
		raise ConfigurationError(f"Cannot read config file {path}: {exc}") from exc
	if not isinstance(payload, dict):
		raise ConfigurationError(f"Config file {path} must contain a JSON object")
	_check_keys(payload, path)
	return payload


def _environment_layer(env: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
	env = os.environ if env is None else env
	layer: Dict[str, Any] = {}
	if env.get(NESYCL_DATA_DIR):
		layer["data_dir"] = env[NESYCL_DATA_DIR]
	if env.get(NESYCL_OUT_DIR):
		layer["out_dir"] = env[NESYCL_OUT_DIR]
	return layer


def build_config(
	config_file: Optional[str] = None,
	overrides: Optional[Mapping[str, Any]] = None,
	env: Optional[Mapping[str, str]] = None,
) -> RunConfig:
	"""Merge configuration sources into a validated ``RunConfig``.

	Precedence order (later overrides earlier):
	1. ``RunConfig`` defaults
	2. Benchmark protocol defaults (``BENCHMARK_PROTOCOLS``)
	3. JSON config file
	4. Environment (``NESYCL_DATA_DIR``, ``NESYCL_OUT_DIR``)
	5. Explicit overrides (CLI flags); ``None`` values are ignored

	Raises:
		ConfigurationError: On unknown keys or out-of-range values
	"""
	file_layer = load_config_file(config_file)
	env_layer = _environment_layer(env)
	cli_layer = {k: v for k, v in (overrides or {}).items() if v is not None}
	_check_keys(cli_layer, "overrides")

	benchmark = cli_layer.get("benchmark") or file_layer.get("benchmark") or RunConfig.benchmark
	merged: Dict[str, Any] = RunConfig().to_dict()
	merged.update(BENCHMARK_PROTOCOLS.get(benchmark, {}))
	merged.update(file_layer)
	merged.update(env_layer)
	merged.update(cli_layer)

	config = config_from_dict(merged)
	_log().debug(f"Built config benchmark={config.benchmark} strategy={config.strategy} hash={config.config_hash()[:12]}")
	return config
