"""Flat binary checkpoints.

Layout (all integers little-endian uint32):

- magic ``b"NSCL"``
- format version
- 32-byte SHA-256 schema hash
- family tag length + UTF-8 family tag (``nesy`` / ``cbm``)
- tensor count, then per tensor: rank, dims
- parameter data in declaration order, 64-bit little-endian reals
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from ..exceptions import CheckpointError
from ..logger_utils import get_resilient_logger
from .predictors import Predictor

MAGIC = b"NSCL"
VERSION = 1
_U32 = np.dtype("<u4")
_F64 = np.dtype("<f8")


def _log():
	return get_resilient_logger("nesycl.models")


def _u32(*values: int) -> bytes:
	return np.array(values, dtype=_U32).tobytes()


def save_checkpoint(path: Union[str, Path], predictor: Predictor) -> Path:
	"""Write the predictor's parameters to ``path``."""
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	params = predictor.parameters()
	family = predictor.family.encode("utf-8")
	header = bytearray(MAGIC)
	header += _u32(VERSION)
	header += predictor.schema.schema_hash()
	header += _u32(len(family)) + family
	header += _u32(len(params))
	for p in params:
		header += _u32(p.ndim, *p.shape)
	with open(path, "wb") as fh:
		fh.write(bytes(header))
		for p in params:
			fh.write(np.ascontiguousarray(p.data, dtype=_F64).tobytes())
	_log().debug(f"Saved checkpoint {path} ({len(params)} tensors)")
	return path


class _Reader:
	def __init__(self, blob: bytes, path: Path):
		self.blob = blob
		self.path = path
		self.offset = 0

	def take(self, n: int) -> bytes:
		if self.offset + n > len(self.blob):
			raise CheckpointError(f"{self.path}: truncated checkpoint at byte {self.offset}")
		chunk = self.blob[self.offset : self.offset + n]
		self.offset += n
		return chunk

	def u32(self, count: int = 1) -> Tuple[int, ...]:
		return tuple(int(v) for v in np.frombuffer(self.take(4 * count), dtype=_U32))


def read_checkpoint(path: Union[str, Path]) -> Tuple[bytes, str, List[np.ndarray]]:
	"""Parse a checkpoint into (schema hash, family, arrays).

	Raises:
		CheckpointError: On bad magic, unsupported version or truncation
	"""
	path = Path(path)
	try:
		blob = path.read_bytes()
	except OSError as exc:
		raise CheckpointError(f"Cannot read checkpoint {path}: {exc}") from exc
	reader = _Reader(blob, path)
	if reader.take(4) != MAGIC:
		raise CheckpointError(f"{path}: bad magic, not a checkpoint")
	(version,) = reader.u32()
	if version != VERSION:
		raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
	schema_hash = reader.take(32)
	(family_len,) = reader.u32()
	family = reader.take(family_len).decode("utf-8")
	(count,) = reader.u32()
	shapes = []
	for _ in range(count):
		(rank,) = reader.u32()
		shapes.append(reader.u32(rank) if rank else ())
	arrays = []
	for shape in shapes:
		size = int(np.prod(shape)) if shape else 1
		arrays.append(np.frombuffer(reader.take(8 * size), dtype=_F64).reshape(shape).astype(np.float64))
	if reader.offset != len(blob):
		raise CheckpointError(f"{path}: {len(blob) - reader.offset} trailing bytes")
	return schema_hash, family, arrays


def load_checkpoint(path: Union[str, Path], predictor: Predictor) -> Predictor:
	"""Load parameters into ``predictor`` in place.

	Raises:
		CheckpointError: On format errors, schema hash or family mismatch
	"""
	schema_hash, family, arrays = read_checkpoint(path)
	if schema_hash != predictor.schema.schema_hash():
		raise CheckpointError(f"{path}: schema hash does not match the predictor's schema")
	if family != predictor.family:
		raise CheckpointError(f"{path}: checkpoint family '{family}' != predictor family '{predictor.family}'")
	try:
		predictor.load_state(arrays)
	except ValueError as exc:
		raise CheckpointError(f"{path}: {exc}") from exc
	return predictor
