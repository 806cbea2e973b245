"""Exception hierarchy for nesycl.

Validation problems are ``ValueError`` subclasses and failed lookups are
``KeyError`` subclasses, so callers that already catch the builtin types keep
working.
"""

from __future__ import annotations


class NesyclError(Exception):
	"""Base class for all nesycl errors."""


class ConfigurationError(NesyclError, ValueError):
	"""Fatal misconfiguration: shape mismatch, bad slot count, NaN input, bad config key."""


class EnumerationCapError(ConfigurationError):
	"""An exhaustive enumeration would exceed the configured cap."""

	def __init__(self, what: str, count: int, cap: int):
		self.count = int(count)
		self.cap = int(cap)
		super().__init__(f"{what}: {self.count} configurations exceed the enumeration cap of {self.cap}")


class IdxParseError(NesyclError, ValueError):
	"""Malformed IDX file. ``offset`` is the byte offset where parsing failed."""

	def __init__(self, path: str, offset: int, reason: str):
		self.path = str(path)
		self.offset = int(offset)
		super().__init__(f"{self.path}: {reason} (at byte offset {self.offset})")


class CheckpointError(NesyclError, ValueError):
	"""Unreadable or incompatible model checkpoint."""


class UnknownNameError(NesyclError, KeyError):
	"""A strategy, knowledge or benchmark name is not registered."""

	def __str__(self) -> str:
		# KeyError quotes its argument; keep the message readable
		return str(self.args[0]) if self.args else ""


class TrainingError(NesyclError, RuntimeError):
	"""A component failed during training; the message carries task/epoch context."""
