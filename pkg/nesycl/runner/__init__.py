from __future__ import annotations

from .commands import (
	AnalysisOutcome,
	EvalOutcome,
	SweepCell,
	SweepOutcome,
	SweepPlan,
	SweepRun,
	aggregate_sweep,
	cmd_analyze,
	cmd_eval,
	cmd_generate,
	cmd_sweep,
	cmd_train,
	dataset_config,
	load_stream,
	load_sweep_plan,
	stream_from_config,
)
from .records import (
	RunRecord,
	file_digest,
	final_checkpoint,
	read_run_record,
	run_dir_for,
	verify_run_dir,
	write_run_record,
)

__all__ = [
	"AnalysisOutcome",
	"EvalOutcome",
	"RunRecord",
	"SweepCell",
	"SweepOutcome",
	"SweepPlan",
	"SweepRun",
	"aggregate_sweep",
	"cmd_analyze",
	"cmd_eval",
	"cmd_generate",
	"cmd_sweep",
	"cmd_train",
	"dataset_config",
	"file_digest",
	"final_checkpoint",
	"load_stream",
	"load_sweep_plan",
	"read_run_record",
	"run_dir_for",
	"stream_from_config",
	"verify_run_dir",
	"write_run_record",
]
