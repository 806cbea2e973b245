"""Logger utility for nesycl.

Provides resilient logger creation that falls back to console logging
if the log directory is not writable.
"""

import logging
import os
from typing import Optional, Set

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
LOG_FILE_NAME = "nesycl.log"

_CONFIGURED: Set[str] = set()


def _level_from_env() -> int:
	name = (os.environ.get("NESYCL_LOG_LEVEL") or "INFO").strip().upper()
	return getattr(logging, name, logging.INFO)


def get_resilient_logger(module_name: str, log_dir: Optional[str] = None) -> logging.Logger:
	"""Get a logger that works even with permission issues.

	Tries to log to ``<log_dir>/nesycl.log`` first (``log_dir`` defaults to
	``$NESYCL_LOG_DIR``). Falls back to console/stream logging if the
	directory is missing, not configured, or not writable.

	Args:
		module_name: Logger name (e.g., "nesycl.trainer")
		log_dir: Optional directory overriding ``$NESYCL_LOG_DIR``

	Returns:
		Logger instance

	Examples:
		logger = get_resilient_logger("nesycl.trainer")
		logger.info("task=1 epoch=3 loss=0.412")
	"""
	logger = logging.getLogger(module_name)
	if module_name in _CONFIGURED:
		return logger

	logger.setLevel(_level_from_env())
	formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)
	target_dir = log_dir or os.environ.get("NESYCL_LOG_DIR")

	if target_dir:
		try:
			os.makedirs(target_dir, exist_ok=True)
			handler: logging.Handler = logging.FileHandler(os.path.join(target_dir, LOG_FILE_NAME), encoding="utf-8")
			handler.setFormatter(formatter)
			logger.addHandler(handler)
			_CONFIGURED.add(module_name)
			return logger
		except (PermissionError, OSError) as e:
			fallback_reason: Optional[Exception] = e
	else:
		fallback_reason = None

	# Fallback to console logger
	if not logger.handlers:
		handler = logging.StreamHandler()
		handler.setFormatter(formatter)
		logger.addHandler(handler)
		if fallback_reason is not None:
			logger.warning(
				f"Using console logger due to file permission error: {fallback_reason}. "
				f"Logs will not be saved to file."
			)
	_CONFIGURED.add(module_name)
	return logger
