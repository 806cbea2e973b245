"""MNIST IDX reader and writer.

File layout (big-endian)::

	[offset] [type]          [value]
	0000     32 bit integer  0x00000803 (2051) images / 0x00000801 (2049) labels
	0004     32 bit integer  number of items
	0008     32 bit integer  rows     (images only)
	0012     32 bit integer  columns  (images only)
	....     unsigned byte   pixel / label values

Files ending in ``.gz`` are transparently (de)compressed.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from ..exceptions import IdxParseError
from ..logger_utils import get_resilient_logger

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

PathLike = Union[str, Path]


def _log():
	return get_resilient_logger("nesycl.benchmarks")


def _read_bytes(path: PathLike) -> bytes:
	path = Path(path)
	try:
		if path.suffix == ".gz":
			with gzip.open(path, "rb") as fh:
				return fh.read()
		return path.read_bytes()
	except OSError as exc:
		raise IdxParseError(str(path), 0, f"cannot read file: {exc}") from exc


def _header(blob: bytes, path: PathLike, magic: int, n_dims: int) -> Tuple[int, ...]:
	needed = 4 * (1 + n_dims)
	if len(blob) < 4:
		raise IdxParseError(str(path), len(blob), "truncated file: missing magic number")
	(found,) = struct.unpack(">I", blob[:4])
	if found != magic:
		raise IdxParseError(str(path), 0, f"bad magic number 0x{found:08x}, expected 0x{magic:08x}")
	if len(blob) < needed:
		raise IdxParseError(str(path), len(blob), f"truncated header: expected {needed} bytes")
	return struct.unpack(f">{n_dims}I", blob[4:needed])


def read_idx_images(path: PathLike) -> np.ndarray:
	"""Raw uint8 images of shape (N, rows, cols)."""
	blob = _read_bytes(path)
	count, rows, cols = _header(blob, path, IMAGES_MAGIC, 3)
	start, size = 16, count * rows * cols
	if len(blob) - start < size:
		raise IdxParseError(str(path), len(blob), f"truncated data: expected {size} pixel bytes after offset {start}")
	return np.frombuffer(blob, dtype=np.uint8, count=size, offset=start).reshape(count, rows, cols)


def read_idx_labels(path: PathLike) -> np.ndarray:
	blob = _read_bytes(path)
	(count,) = _header(blob, path, LABELS_MAGIC, 1)
	start = 8
	if len(blob) - start < count:
		raise IdxParseError(str(path), len(blob), f"truncated data: expected {count} label bytes after offset {start}")
	return np.frombuffer(blob, dtype=np.uint8, count=count, offset=start).copy()


def load_mnist_idx(images_path: PathLike, labels_path: PathLike) -> Tuple[np.ndarray, np.ndarray]:
	"""Flattened features in [0, 1] (N, rows*cols) and integer labels (N,).

	Raises:
		IdxParseError: Bad magic number, truncated file, count mismatch or
			labels outside 0..9; the message names the byte offset
	"""
	images = read_idx_images(images_path)
	labels = read_idx_labels(labels_path)
	if labels.shape[0] != images.shape[0]:
		raise IdxParseError(
			str(labels_path), 4, f"label count {labels.shape[0]} != image count {images.shape[0]}"
		)
	bad = np.flatnonzero(labels > 9)
	if bad.size:
		raise IdxParseError(str(labels_path), 8 + int(bad[0]), f"label {int(labels[bad[0]])} outside 0..9")
	features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
	_log().info(f"Loaded {images.shape[0]} IDX images ({images.shape[1]}x{images.shape[2]}) from {images_path}")
	return features, labels.astype(np.int64)


def _write_bytes(path: PathLike, payload: bytes) -> None:
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	if path.suffix == ".gz":
		with gzip.open(path, "wb") as fh:
			fh.write(payload)
	else:
		path.write_bytes(payload)


def save_mnist_idx(images_path: PathLike, labels_path: PathLike, images: np.ndarray, labels: np.ndarray) -> None:
	"""Write uint8 images (N, rows, cols) and labels (N,) in IDX format."""
	images = np.asarray(images, dtype=np.uint8)
	labels = np.asarray(labels, dtype=np.uint8).reshape(-1)
	count, rows, cols = images.shape
	_write_bytes(images_path, struct.pack(">IIII", IMAGES_MAGIC, count, rows, cols) + images.tobytes())
	_write_bytes(labels_path, struct.pack(">II", LABELS_MAGIC, labels.shape[0]) + labels.tobytes())
