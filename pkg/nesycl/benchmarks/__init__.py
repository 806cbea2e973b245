from __future__ import annotations

from .glyphs import (
	IdxGlyphSource,
	ObjectFeatureGenerator,
	SyntheticGlyphGenerator,
	make_digit_generator,
	make_object_generator,
)
from .idx import load_mnist_idx, read_idx_images, read_idx_labels, save_mnist_idx
from .io import read_manifest, read_stream, write_stream
from .streams import (
	CLEVR_TASKS,
	COLORS,
	SHAPES,
	StreamSizes,
	gen_clevr_like,
	gen_mnadd_seq,
	gen_mnadd_shortcut,
	shortcut_task_pairs,
	xor_stream,
)
from .tasks import Dataset, Task, TaskStream, attach_supervision

__all__ = [
	"CLEVR_TASKS",
	"COLORS",
	"SHAPES",
	"Dataset",
	"IdxGlyphSource",
	"ObjectFeatureGenerator",
	"StreamSizes",
	"SyntheticGlyphGenerator",
	"Task",
	"TaskStream",
	"attach_supervision",
	"gen_clevr_like",
	"gen_mnadd_seq",
	"gen_mnadd_shortcut",
	"load_mnist_idx",
	"make_digit_generator",
	"make_object_generator",
	"read_idx_images",
	"read_idx_labels",
	"read_manifest",
	"read_stream",
	"save_mnist_idx",
	"shortcut_task_pairs",
	"write_stream",
	"xor_stream",
]
