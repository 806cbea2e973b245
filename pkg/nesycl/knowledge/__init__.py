from __future__ import annotations

from ..registry import get_knowledge
from .builtin import addition_knowledge, clevr_knowledge, xor_toy
from .compiled import (
	CompiledKnowledge,
	compile,
	joint_concepts,
	label_distribution,
	label_given_concepts,
	map_label,
	satisfying_mass,
)
from .schema import ConceptSchema, ConceptSlot, KnowledgeSpec


def compile_named(name: str, task_tag: str = "") -> CompiledKnowledge:
	"""Compile a registered knowledge by its registry name."""
	return compile(get_knowledge(name)(task_tag))


__all__ = [
	"CompiledKnowledge",
	"ConceptSchema",
	"ConceptSlot",
	"KnowledgeSpec",
	"addition_knowledge",
	"clevr_knowledge",
	"compile",
	"compile_named",
	"joint_concepts",
	"label_distribution",
	"label_given_concepts",
	"map_label",
	"satisfying_mass",
	"xor_toy",
]
