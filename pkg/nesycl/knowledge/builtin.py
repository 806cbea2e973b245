"""Built-in knowledge specifications, registered by name.

- ``mnist-add``: two digits and their sum (19 labels)
- ``clevr-samecolor-sameshape``: two objects with shape and color concepts;
  labels (same_shape, same_color, same) with ``same <-> same_shape and same_color``
- ``xor``: two bits and their exclusive or
"""

from __future__ import annotations

from ..registry import register_knowledge
from .schema import ConceptSchema, ConceptSlot, ConceptTuple, KnowledgeSpec, LabelTuple

N_DIGITS = 10
N_SUMS = 2 * N_DIGITS - 1
N_SHAPES = 10
N_COLORS = 10


def _addition(c: ConceptTuple, y: LabelTuple) -> bool:
	return c[0] + c[1] == y[0]


@register_knowledge("mnist-add")
def addition_knowledge(task_tag: str = "") -> KnowledgeSpec:
	schema = ConceptSchema(
		slots=(
			ConceptSlot("digit1", N_DIGITS, obj=0, head="digit"),
			ConceptSlot("digit2", N_DIGITS, obj=1, head="digit"),
		),
		label_cardinalities=(N_SUMS,),
		label_names=("sum",),
	)
	return KnowledgeSpec(schema, _addition, "mnist-add", task_tag)


def _same_color_same_shape(c: ConceptTuple, y: LabelTuple) -> bool:
	shape1, shape2, color1, color2 = c
	same_shape, same_color, same = y
	return (
		same_shape == int(shape1 == shape2)
		and same_color == int(color1 == color2)
		and same == int(same_shape and same_color)
	)


@register_knowledge("clevr-samecolor-sameshape")
def clevr_knowledge(task_tag: str = "") -> KnowledgeSpec:
	"""Two-object scenes: shape and color slots per object, shared heads across objects.

	Only four of the eight label tuples are reachable:
	(0,0,0), (0,1,0), (1,0,0) and (1,1,1).
	"""
	schema = ConceptSchema(
		slots=(
			ConceptSlot("shape1", N_SHAPES, obj=0, head="shape"),
			ConceptSlot("shape2", N_SHAPES, obj=1, head="shape"),
			ConceptSlot("color1", N_COLORS, obj=0, head="color"),
			ConceptSlot("color2", N_COLORS, obj=1, head="color"),
		),
		label_cardinalities=(2, 2, 2),
		label_names=("same_shape", "same_color", "same"),
	)
	return KnowledgeSpec(schema, _same_color_same_shape, "clevr-samecolor-sameshape", task_tag)


def _xor(c: ConceptTuple, y: LabelTuple) -> bool:
	return y[0] == (c[0] ^ c[1])


@register_knowledge("xor")
def xor_toy(task_tag: str = "") -> KnowledgeSpec:
	schema = ConceptSchema(
		slots=(ConceptSlot("bit1", 2, obj=0, head="bit"), ConceptSlot("bit2", 2, obj=1, head="bit")),
		label_cardinalities=(2,),
		label_names=("xor",),
	)
	return KnowledgeSpec(schema, _xor, "xor", task_tag)
