"""Name registries for knowledge bases, continual strategies and benchmarks.

This module provides a centralized registry so that components can be
selected by the textual names used in config files, CLI flags and CSV
output ("mnadd-seq", "cool", "mnist-add", ...).

Knowledge constructors build a ``KnowledgeSpec``. Strategies are classes
implementing the continual-training hooks. Benchmarks are stream
generators returning a ``TaskStream``.
"""

from __future__ import annotations

import importlib
from typing import Any, Callable, Dict, List, Optional

from .exceptions import UnknownNameError

# Global registries
_KNOWLEDGE_REGISTRY: Dict[str, Callable[..., Any]] = {}
_STRATEGY_REGISTRY: Dict[str, Any] = {}
_BENCHMARK_REGISTRY: Dict[str, Callable[..., Any]] = {}

# Modules whose import registers the built-in components
_BUILTIN_MODULES = (
	"nesycl.knowledge.builtin",
	"nesycl.continual.strategies",
	"nesycl.benchmarks.streams",
)
_DISCOVERED: bool = False


def _discover_builtins() -> None:
	global _DISCOVERED
	if _DISCOVERED:
		return
	_DISCOVERED = True
	for module_path in _BUILTIN_MODULES:
		importlib.import_module(module_path)


def _clean_name(kind: str, name: Optional[str]) -> str:
	clean = (name or "").strip()
	if not clean:
		raise ValueError(f"register_{kind}: name cannot be empty")
	return clean


def _lookup(kind: str, registry: Dict[str, Any], name: str) -> Any:
	_discover_builtins()
	clean = (name or "").strip()
	if not clean:
		raise UnknownNameError(f"get_{kind}: name cannot be empty")
	if clean not in registry:
		raise UnknownNameError(f"Unknown {kind} '{clean}'; registered: {', '.join(sorted(registry))}")
	return registry[clean]


def register_knowledge(name: str) -> Callable[[Callable[..., Any]], Callable[..., Any]]:
	"""Register a ``KnowledgeSpec`` constructor under a registry name.

	Example:
		@register_knowledge("xor")
		def xor_toy() -> KnowledgeSpec:
			...
	"""
	knowledge_name = _clean_name("knowledge", name)

	def decorator(func: Callable[..., Any]) -> Callable[..., Any]:
		if not callable(func):
			raise ValueError("register_knowledge: constructor must be callable")
		_KNOWLEDGE_REGISTRY[knowledge_name] = func
		return func

	return decorator


def get_knowledge(name: str) -> Callable[..., Any]:
	"""Retrieve a knowledge constructor by name.

	Raises:
		UnknownNameError: If name is empty or not registered
	"""
	return _lookup("knowledge", _KNOWLEDGE_REGISTRY, name)


def list_knowledge() -> List[str]:
	_discover_builtins()
	return sorted(_KNOWLEDGE_REGISTRY.keys())


def register_strategy(cls: Any) -> Any:
	"""Register a strategy class under its ``name`` attribute."""
	strategy_name = _clean_name("strategy", getattr(cls, "name", ""))
	_STRATEGY_REGISTRY[strategy_name] = cls
	return cls


def get_strategy(name: str) -> Any:
	"""Retrieve a strategy class by name.

	Raises:
		UnknownNameError: If name is empty or not registered
	"""
	return _lookup("strategy", _STRATEGY_REGISTRY, name)


def list_strategies() -> List[str]:
	_discover_builtins()
	return sorted(_STRATEGY_REGISTRY.keys())


def register_benchmark(name: str) -> Callable[[Callable[..., Any]], Callable[..., Any]]:
	"""Register a task-stream generator under a benchmark name."""
	benchmark_name = _clean_name("benchmark", name)

	def decorator(func: Callable[..., Any]) -> Callable[..., Any]:
		_BENCHMARK_REGISTRY[benchmark_name] = func
		return func

	return decorator


def get_benchmark(name: str) -> Callable[..., Any]:
	"""Retrieve a benchmark generator by name.

	Raises:
		UnknownNameError: If name is empty or not registered
	"""
	return _lookup("benchmark", _BENCHMARK_REGISTRY, name)


def list_benchmarks() -> List[str]:
	_discover_builtins()
	return sorted(_BENCHMARK_REGISTRY.keys())
