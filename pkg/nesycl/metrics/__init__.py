from __future__ import annotations

from .continual import AccuracyMatrix, bwt, class_il, fwt, task_il
from .evaluation import ConfusionMatrix, TaskEvaluation, confusion, evaluate, masked_argmax
from .report import EvalReport, read_confusion_csv, read_metrics_csv, write_confusion_csv
from .semantics import (
	SemanticReport,
	ShortcutDiagnosis,
	apply_concept_map,
	semantic_equivalence,
	shortcut_report,
)

__all__ = [
	"AccuracyMatrix",
	"ConfusionMatrix",
	"EvalReport",
	"SemanticReport",
	"ShortcutDiagnosis",
	"TaskEvaluation",
	"apply_concept_map",
	"bwt",
	"class_il",
	"confusion",
	"evaluate",
	"fwt",
	"masked_argmax",
	"read_confusion_csv",
	"read_metrics_csv",
	"semantic_equivalence",
	"shortcut_report",
	"task_il",
	"write_confusion_csv",
]
