"""Experiment commands behind the ``nesycl`` CLI.

- ``cmd_generate``: write a benchmark stream to CSV files plus a manifest
- ``cmd_train``: one (config, seed) run; writes metrics, confusion matrices,
  checkpoints and ``run.json`` into ``<out>/<benchmark>/<strategy>/<seed>``
- ``cmd_eval``: reload the final checkpoint and re-evaluate every split
- ``cmd_analyze``: likelihood-maxima, bound and shortcut checks on a finished run
- ``cmd_sweep``: every grid cell times every seed, run in isolated
  processes, aggregated into ``sweep.csv``
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..analysis import (
	drift_bound_check,
	enumerate_additive_shortcuts,
	pinsker_check,
	risk_gap_check,
	slot_pinsker_check,
	verify_likelihood_maxima,
)
from ..analysis.shortcuts import SHORTCUT_SYSTEM
from ..benchmarks.glyphs import IdxGlyphSource, make_digit_generator, make_object_generator
from ..benchmarks.idx import load_mnist_idx
from ..benchmarks.io import MANIFEST_NAME, read_manifest, read_stream, write_stream
from ..benchmarks.streams import StreamSizes
from ..benchmarks.tasks import Dataset, TaskStream
from ..config import RunConfig, build_config, hash_config_dict
from ..continual.trainer import build_run_predictor, run_stream, spawn_rngs
from ..exceptions import ConfigurationError, NesyclError
from ..logger_utils import get_resilient_logger
from ..metrics.evaluation import collect_outputs, evaluate
from ..metrics.report import AGGREGATE_TASK, EvalReport, numeric_metrics, read_metrics_csv, write_confusion_csv
from ..metrics.semantics import shortcut_report
from ..models.checkpoint import load_checkpoint
from ..models.predictors import NesyPredictor, Predictor
from ..registry import get_benchmark
from .records import (
	EVAL_FILE,
	METRICS_FILE,
	RUN_RECORD,
	RunRecord,
	confusion_file,
	final_checkpoint,
	read_run_record,
	run_dir_for,
	write_run_record,
)

ANALYSIS_FILE = "analysis.csv"
ANALYSIS_SUMMARY = "analysis.txt"
SWEEP_FILE = "sweep.csv"
SELECTION_METRIC = "val_class_il_y"
EVAL_TOLERANCE = 1e-12
DIGIT_BENCHMARKS = ("mnadd-seq", "mnadd-shortcut")

# RunConfig fields that shape the generated dataset
DATASET_FIELDS = (
	"benchmark",
	"sup_fraction",
	"train_size",
	"val_size",
	"test_size",
	"ood_size",
	"feature_dim",
	"sigma",
	"confusable",
)


def _log():
	return get_resilient_logger("nesycl.runner")


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


def dataset_config(config: RunConfig) -> Dict[str, Any]:
	values = {name: getattr(config, name) for name in DATASET_FIELDS}
	values["data_seed"] = config.effective_data_seed
	return values


def stream_from_config(config: RunConfig, idx_source: Optional[IdxGlyphSource] = None) -> TaskStream:
	"""Generate the benchmark stream a config describes.

	Args:
		config: Run configuration (benchmark, sizes, generator settings, data seed)
		idx_source: Real digit images replacing the synthetic digit generator

	Raises:
		UnknownNameError: If the benchmark is not registered
	"""
	generate = get_benchmark(config.benchmark)
	seed = config.effective_data_seed
	if config.benchmark in DIGIT_BENCHMARKS:
		gen = idx_source or make_digit_generator(config.feature_dim, config.sigma, config.confusable, seed)
	elif idx_source is not None:
		raise ConfigurationError(f"IDX digit images cannot drive benchmark '{config.benchmark}'")
	else:
		gen = make_object_generator(config.feature_dim, config.sigma, seed)
	sizes = StreamSizes(config.train_size, config.val_size, config.test_size, config.ood_size)
	return generate(gen=gen, sizes=sizes, sup_fraction=config.sup_fraction, seed=seed)


def cmd_generate(
	config: RunConfig,
	out: Optional[Union[str, Path]] = None,
	mnist: Optional[Tuple[str, str]] = None,
) -> Path:
	"""Write the benchmark stream to ``out`` (default ``<data_dir>/<benchmark>``).

	Args:
		config: Run configuration
		out: Target directory
		mnist: Optional ``(images, labels)`` IDX paths used instead of synthetic digits

	Returns:
		Path of the written manifest
	"""
	target = Path(out) if out else Path(config.data_dir) / config.benchmark
	idx_source = IdxGlyphSource(*load_mnist_idx(*mnist)) if mnist else None
	stream = stream_from_config(config, idx_source)
	values = dataset_config(config)
	if mnist:
		values["mnist"] = [str(p) for p in mnist]
	manifest = write_stream(stream, target, values)
	_log().info(f"Generated benchmark={config.benchmark} tasks={len(stream.tasks)} into {target}")
	return manifest


def load_stream(config: RunConfig, dataset_dir: Optional[Union[str, Path]] = None) -> Tuple[TaskStream, Optional[str], str]:
	"""Stream for a run, read from a dataset directory or generated in memory.

	Without ``dataset_dir`` the default root ``<data_dir>/<benchmark>`` is used
	when it holds a manifest written for the same dataset settings; otherwise
	the stream is generated.

	Returns:
		``(stream, dataset_dir or None, dataset hash)``
	"""
	if dataset_dir is None:
		dataset_dir = _default_dataset(config)
		if dataset_dir is None:
			return stream_from_config(config), None, hash_config_dict(dataset_config(config))
	if not (Path(dataset_dir) / MANIFEST_NAME).exists():
		raise ConfigurationError(f"{dataset_dir}: no dataset manifest; run 'nesycl generate' first")
	manifest = read_manifest(dataset_dir)
	if manifest.get("benchmark") != config.benchmark:
		raise ConfigurationError(
			f"dataset in {dataset_dir} is '{manifest.get('benchmark')}', config asks for '{config.benchmark}'"
		)
	return read_stream(dataset_dir), str(dataset_dir), hash_config_dict(manifest.get("config", {}))


def _default_dataset(config: RunConfig) -> Optional[Path]:
	root = Path(config.data_dir) / config.benchmark
	if not (root / MANIFEST_NAME).exists():
		return None
	stored = {k: v for k, v in read_manifest(root).get("config", {}).items() if k != "mnist"}
	if stored != dataset_config(config):
		_log().warning(f"Ignoring dataset in {root}: written for other settings; generating in memory")
		return None
	_log().info(f"Using dataset in {root}")
	return root


# ---------------------------------------------------------------------------
# train / eval
# ---------------------------------------------------------------------------


def cmd_train(
	config: RunConfig,
	dataset_dir: Optional[Union[str, Path]] = None,
	out: Optional[Union[str, Path]] = None,
	force: bool = False,
) -> Tuple[Path, RunRecord]:
	"""Run one configuration through its task stream and persist every artifact.

	Raises:
		ConfigurationError: If the run directory already holds a record and ``force`` is False
		TrainingError: On failures inside training (with task / epoch context)
	"""
	run_dir = run_dir_for(out or config.out_dir, config)
	if (run_dir / RUN_RECORD).exists() and not force:
		raise ConfigurationError(f"{run_dir} already holds a finished run (use --force to replace it)")
	run_dir.mkdir(parents=True, exist_ok=True)

	stream, data_path, data_hash = load_stream(config, dataset_dir)
	config_hash = config.config_hash()
	_log().info(
		f"Train benchmark={config.benchmark} strategy={config.strategy} model={config.model} "
		f"seed={config.seed} hash={config_hash[:12]} -> {run_dir}"
	)
	result = run_stream(stream, config, run_dir)

	files = [METRICS_FILE] + list(result.checkpoints)
	result.report(config_hash).write_csv(run_dir / METRICS_FILE)
	for matrix in result.confusion:
		write_confusion_csv(run_dir / confusion_file(matrix.slot), matrix, config_hash)
		files.append(confusion_file(matrix.slot))

	record = RunRecord(
		config=config.to_dict(),
		config_hash=config_hash,
		rows_y=result.acc_y.rows(),
		rows_c=result.acc_c.rows(),
		final_metrics=result.final_metrics(),
		wall_clock=result.wall_clock,
		checkpoints=list(result.checkpoints),
		files={name: "" for name in files},
		dataset_dir=data_path,
		dataset_hash=data_hash,
	)
	write_run_record(run_dir, record, overwrite=force)
	metrics = record.final_metrics
	_log().info(
		f"Finished strategy={config.strategy} seed={config.seed}: class_il_y={metrics['class_il_y']:.3f} "
		f"class_il_c={metrics['class_il_c']:.3f} wall_clock={result.wall_clock:.1f}s"
	)
	return run_dir, record


def _initial_predictor(config: RunConfig, stream: TaskStream) -> Predictor:
	"""The untrained model of a run (same init stream as ``run_stream``)."""
	return build_run_predictor(config, stream, spawn_rngs(config.seed)["init"])


def _restore(run_dir: Path, record: RunRecord) -> Tuple[RunConfig, TaskStream, Predictor]:
	config = record.run_config
	if record.dataset_dir:
		stream, _, _ = load_stream(config, record.dataset_dir)
	else:
		stream = stream_from_config(config)
	predictor = load_checkpoint(final_checkpoint(run_dir, record), _initial_predictor(config, stream))
	return config, stream, predictor


@dataclass
class EvalOutcome:
	report: EvalReport
	mismatches: List[str] = field(default_factory=list)

	@property
	def ok(self) -> bool:
		return not self.mismatches


def cmd_eval(run_dir: Union[str, Path]) -> EvalOutcome:
	"""Re-evaluate the final checkpoint and compare with the last accuracy row.

	Writes ``eval.csv`` with per-task ``acc_y`` / ``acc_c`` (and masked) rows
	plus OOD accuracies.
	"""
	run_dir = Path(run_dir)
	record = read_run_record(run_dir)
	config, stream, predictor = _restore(run_dir, record)

	report = EvalReport(config.strategy, config.seed)
	for s, task in enumerate(stream.tasks):
		ev = evaluate(predictor, task.test, stream.compiled(task), task.label_set(), task.concept_values())
		report.add("acc_y", ev.acc_y, task=s)
		report.add("acc_c", ev.acc_c, task=s)
		report.add("acc_y_masked", ev.acc_y_masked, task=s)
		report.add("acc_c_masked", ev.acc_c_masked, task=s)
	if stream.ood is not None:
		ood = evaluate(predictor, stream.ood, stream.compiled(stream.tasks[0]))
		report.add("ood_acc_y", ood.acc_y)
		report.add("ood_acc_c", ood.acc_c)
	report.add("config_hash", record.config_hash)
	report.write_csv(run_dir / EVAL_FILE)

	metrics = numeric_metrics(read_metrics_csv(run_dir / METRICS_FILE))
	last = len(record.checkpoints) - 1
	mismatches: List[str] = []
	for name in ("acc_y", "acc_c", "acc_y_masked", "acc_c_masked"):
		stored = metrics[metrics["metric"] == f"{name}_after_{last}"].set_index("task")["value"]
		for s in range(len(stream.tasks)):
			fresh = float(report.value(name, task=s))
			if s not in stored.index or abs(float(stored[s]) - fresh) > EVAL_TOLERANCE:
				mismatches.append(f"{name} task={s}: metrics.csv {stored.get(s)} != re-evaluated {fresh}")
	for problem in mismatches:
		_log().warning(f"eval {run_dir}: {problem}")
	_log().info(f"Evaluated {run_dir}: tasks={len(stream.tasks)} mismatches={len(mismatches)}")
	return EvalOutcome(report, mismatches)


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


@dataclass
class AnalysisOutcome:
	report: EvalReport
	failures: List[str] = field(default_factory=list)
	notes: List[str] = field(default_factory=list)

	@property
	def ok(self) -> bool:
		return not self.failures


def _pinsker_rows(report: EvalReport, live: Predictor, reference: Predictor, data: Dataset) -> bool:
	_, now = collect_outputs(live, data)
	_, before = collect_outputs(reference, data)
	per_slot = pinsker_check(zip(now, before))
	aggregate = slot_pinsker_check(now, before)
	report.add("pinsker_pairs", per_slot.n)
	report.add("pinsker_violations", per_slot.violations + aggregate.violations)
	report.add("pinsker_min_slack", min(per_slot.min_slack, aggregate.min_slack))
	return per_slot.holds and aggregate.holds


def _buffer_pinsker_rows(report: EvalReport, run_dir: Path) -> bool:
	"""Copy the training-time buffer checks from ``metrics.csv``; runs without concept rehearsal have none."""
	frame = numeric_metrics(read_metrics_csv(run_dir / METRICS_FILE))
	metrics = frame[frame["task"] == AGGREGATE_TASK].set_index("metric")["value"]
	names = ("buffer_pinsker_checks", "buffer_pinsker_violations", "buffer_pinsker_min_slack")
	if not all(name in metrics.index for name in names):
		return True
	report.add("buffer_pinsker_checks", int(metrics[names[0]]))
	report.add("buffer_pinsker_violations", int(metrics[names[1]]))
	report.add("buffer_pinsker_min_slack", float(metrics[names[2]]))
	return int(metrics[names[1]]) == 0


def cmd_analyze(run_dir: Union[str, Path]) -> AnalysisOutcome:
	"""Likelihood-maxima, drift-bound, Pinsker and shortcut checks on a finished run.

	Writes ``analysis.csv`` (metrics-file layout) and a readable
	``analysis.txt``. Bound and likelihood-maxima checks need the NeSy model family;
	for CBM runs they are reported as not applicable.

	Raises:
		CheckpointError: If a recorded checkpoint is missing or unreadable
	"""
	run_dir = Path(run_dir)
	record = read_run_record(run_dir)
	config, stream, final = _restore(run_dir, record)
	outcome = AnalysisOutcome(EvalReport(config.strategy, config.seed))
	report = outcome.report
	tasks = stream.tasks
	everything = Dataset.concat([t.test for t in tasks])

	snapshots = [load_checkpoint(run_dir / name, _initial_predictor(config, stream)) for name in record.checkpoints]
	initial = _initial_predictor(config, stream)
	reference = snapshots[-2] if len(snapshots) > 1 else initial
	if not _pinsker_rows(report, final, reference, everything):
		outcome.failures.append("Pinsker inequality violated")
	if not _buffer_pinsker_rows(report, run_dir):
		outcome.failures.append("Pinsker inequality violated on replayed buffer items")

	if isinstance(final, NesyPredictor):
		for s, task in enumerate(tasks):
			maxima = verify_likelihood_maxima(final, task.test, stream.compiled(task))
			report.add("maxima_forward_violations", len(maxima.forward_violations), task=s)
			report.add("maxima_converse_violations", len(maxima.converse_violations), task=s)
			report.add("maxima_not_applicable", maxima.converse_not_applicable, task=s)
			if not maxima.holds:
				outcome.failures.append(f"likelihood characterisation violated on task {s}")

		# Offline trains on a merged task; its checkpoints do not follow the stream
		if len(snapshots) == len(tasks):
			for t in range(1, len(snapshots)):
				drift = drift_bound_check(snapshots[t], snapshots[t - 1], stream, t=t + 1)
				report.add("drift_bound_lhs", drift.lhs, task=t)
				report.add("drift_bound_rhs", drift.rhs, task=t)
				report.add("drift_bound_applicable", int(drift.applicable), task=t)
				if not drift.holds:
					outcome.failures.append(f"drift bound violated after task {t}")
			if len(snapshots) > 1:
				gap = risk_gap_check(snapshots[-1], snapshots[-2], stream)
				report.add("risk_gap_lhs", gap.lhs)
				report.add("risk_gap_rhs", gap.rhs)
				report.add("risk_gap_applicable", int(gap.applicable))
				if not gap.holds:
					outcome.failures.append("risk-gap bound violated")
		else:
			outcome.notes.append("drift bound skipped: checkpoints do not follow the task stream")
	else:
		outcome.notes.append(f"likelihood-maxima and bound checks not applicable to model '{config.model}'")

	flagged = False
	for s, task in enumerate(tasks):
		diag = shortcut_report(final, task.test, stream.compiled(task), config.shortcut_threshold)
		report.add("shortcut_label_agreement", diag.label_agreement, task=s)
		report.add("shortcut_concept_agreement", diag.concept_agreement, task=s)
		flagged = flagged or diag.flagged
	report.add("shortcut_flagged", int(flagged))
	if stream.ood is not None and len(stream.ood):
		diag = shortcut_report(final, stream.ood, stream.compiled(tasks[0]), config.shortcut_threshold)
		report.add("ood_label_agreement", diag.label_agreement)
		report.add("ood_concept_agreement", diag.concept_agreement)

	if config.benchmark == "mnadd-shortcut":
		solutions = enumerate_additive_shortcuts(SHORTCUT_SYSTEM)
		report.add("additive_shortcut_solutions", len(solutions))
		report.add("additive_shortcut_self_check", int(solutions.self_check()))

	report.add("config_hash", record.config_hash)
	report.write_csv(run_dir / ANALYSIS_FILE)
	_write_summary(run_dir / ANALYSIS_SUMMARY, outcome, flagged)
	level = _log().info if outcome.ok else _log().error
	level(f"Analyzed {run_dir}: failures={len(outcome.failures)} shortcut_flagged={flagged}")
	return outcome


def _write_summary(path: Path, outcome: AnalysisOutcome, flagged: bool) -> None:
	lines = ["=" * 60, "ANALYSIS", "=" * 60]
	lines.append(f"checks passed: {outcome.ok}")
	lines.append(f"shortcut flagged: {flagged}")
	lines += [f"FAIL {f}" for f in outcome.failures]
	lines += [f"note {n}" for n in outcome.notes]
	path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepCell:
	index: int
	params: Dict[str, Any]

	@property
	def label(self) -> str:
		return f"cell{self.index:03d}"


@dataclass
class SweepRun:
	cell: int
	seed: int
	run_dir: Optional[str]
	error: Optional[str] = None

	@property
	def ok(self) -> bool:
		return self.error is None


@dataclass
class SweepPlan:
	base: Dict[str, Any]
	grid: Dict[str, List[Any]]
	seeds: List[int]

	def cells(self) -> List[SweepCell]:
		keys = sorted(self.grid)
		combos = itertools.product(*(self.grid[k] for k in keys))
		return [SweepCell(i, dict(zip(keys, values))) for i, values in enumerate(combos)]


def load_sweep_plan(path: str, overrides: Optional[Mapping[str, Any]] = None) -> SweepPlan:
	"""Sweep file: ``{"base": {...}, "grid": {field: [values]}, "seeds": [..]}``.

	Keys outside ``grid`` / ``seeds`` / ``base`` are treated as base config
	keys, so a plain run config is a sweep of one cell. ``overrides`` (CLI
	flags) win over the file; every cell is validated up front.
	"""
	try:
		with open(path, encoding="utf-8") as fh:
			payload = json.load(fh)
	except (OSError, json.JSONDecodeError) as exc:
		raise ConfigurationError(f"Cannot read sweep file {path}: {exc}") from exc
	if not isinstance(payload, dict):
		raise ConfigurationError(f"Sweep file {path} must contain a JSON object")
	base = {k: v for k, v in payload.items() if k not in ("base", "grid", "seeds")}
	base.update(payload.get("base", {}))
	base.update({k: v for k, v in (overrides or {}).items() if v is not None})
	grid = {k: list(v) if isinstance(v, (list, tuple)) else [v] for k, v in payload.get("grid", {}).items()}
	if any(not values for values in grid.values()):
		raise ConfigurationError(f"Sweep file {path}: every grid axis needs at least one value")
	seeds = [int(s) for s in payload.get("seeds", [base.get("seed", 0)])]
	plan = SweepPlan(base, grid, seeds)
	for cell in plan.cells():
		build_config(overrides={**base, **cell.params})
	return plan


def _sweep_worker(args: Tuple[Dict[str, Any], Optional[str], str, bool, int]) -> SweepRun:
	values, dataset_dir, out, force, cell = args
	config = build_config(overrides=values)
	try:
		run_dir, _ = cmd_train(config, dataset_dir, out, force)
	except (NesyclError, ValueError, ArithmeticError, OSError) as exc:
		return SweepRun(cell, config.seed, None, f"{type(exc).__name__}: {exc}")
	return SweepRun(cell, config.seed, str(run_dir))


def aggregate_sweep(
	cells: Sequence[SweepCell],
	runs: Sequence[SweepRun],
	selection_metric: str = SELECTION_METRIC,
) -> pd.DataFrame:
	"""Mean and std per (cell, metric) over the per-run metrics files.

	Only aggregate (``task = -1``) numeric metrics are summarised. The cell
	with the best mean ``selection_metric`` gets ``selected = 1`` (ties go to
	the lowest cell index). Failed runs appear as a ``runs_failed`` row of
	their cell.
	"""
	columns = ["cell", "params", "metric", "mean", "std", "n", "formatted", "selected"]
	frames = []
	for run in runs:
		if run.ok:
			frame = numeric_metrics(read_metrics_csv(Path(run.run_dir) / METRICS_FILE))
			frames.append(frame[frame["task"] == -1][["metric", "value"]].assign(cell=run.cell))
	failed = [run.cell for run in runs if not run.ok]
	if failed:
		counts = pd.Series(failed).value_counts()
		frames.append(pd.DataFrame({"metric": "runs_failed", "value": counts.values.astype(float), "cell": counts.index}))
	if not frames:
		return pd.DataFrame(columns=columns)

	data = pd.concat(frames, ignore_index=True)
	stats = (
		data.groupby(["cell", "metric"])["value"]
		.agg(mean="mean", std=lambda v: float(np.std(v)), n="count")
		.reset_index()
	)
	params = {c.index: json.dumps(c.params, sort_keys=True) for c in cells}
	stats["params"] = stats["cell"].map(params)
	stats["formatted"] = [f"{m:.4f} ± {s:.4f}" for m, s in zip(stats["mean"], stats["std"])]

	stats["selected"] = 0
	ranking = stats[stats["metric"] == selection_metric].sort_values(["mean", "cell"], ascending=[False, True])
	if not ranking.empty:
		stats.loc[stats["cell"] == ranking.iloc[0]["cell"], "selected"] = 1
	return stats.sort_values(["cell", "metric"]).reset_index(drop=True)[columns]


@dataclass
class SweepOutcome:
	table: pd.DataFrame
	runs: List[SweepRun]
	path: Path

	@property
	def ok(self) -> bool:
		return all(run.ok for run in self.runs)


def cmd_sweep(
	plan: SweepPlan,
	out: Union[str, Path],
	parallel: int = 1,
	dataset_dir: Optional[Union[str, Path]] = None,
	force: bool = False,
) -> SweepOutcome:
	"""Run every (cell, seed) pair and write ``<out>/sweep.csv``.

	Each run lives in ``<out>/cell<i>/<benchmark>/<strategy>/<seed>`` and
	shares nothing with the others; with ``parallel > 1`` runs execute in
	separate processes. A failing run is recorded against its cell and the
	sweep continues.
	"""
	out = Path(out)
	cells = plan.cells()
	jobs = [
		({**plan.base, **cell.params, "seed": seed}, str(dataset_dir) if dataset_dir else None, str(out / cell.label), force, cell.index)
		for cell in cells
		for seed in plan.seeds
	]
	_log().info(f"Sweep: cells={len(cells)} seeds={len(plan.seeds)} runs={len(jobs)} parallel={parallel}")
	if parallel > 1 and len(jobs) > 1:
		with ProcessPoolExecutor(max_workers=parallel) as pool:
			runs = list(pool.map(_sweep_worker, jobs))
	else:
		runs = [_sweep_worker(job) for job in jobs]

	for run in runs:
		if run.ok:
			_log().info(f"Sweep cell={run.cell} seed={run.seed} finished")
		else:
			_log().warning(f"Sweep cell={run.cell} seed={run.seed} failed: {run.error}")
	table = aggregate_sweep(cells, runs)
	out.mkdir(parents=True, exist_ok=True)
	path = out / SWEEP_FILE
	table.to_csv(path, index=False, lineterminator="\n")
	return SweepOutcome(table, runs, path)
