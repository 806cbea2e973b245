"""Training loop over a task stream.

``run_stream`` trains one predictor through every task of a stream with a
given strategy and evaluates it on all test sets after each task, filling
the label and concept accuracy matrices. Randomness is split into
independent generators (data order, buffer, initialisation, dropout) so
that strategies which only touch the buffer do not perturb the rest of the
trajectory.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..analysis.bounds import PinskerReport, slot_pinsker_check
from ..autodiff import OptimizerState, adam_step, backward, zero_grad
from ..benchmarks.tasks import Dataset, Task, TaskStream
from ..config import RunConfig
from ..exceptions import ConfigurationError, NesyclError, TrainingError
from ..knowledge.compiled import CompiledKnowledge
from ..logger_utils import get_resilient_logger
from ..metrics.continual import AccuracyMatrix, bwt, class_il, fwt, task_il
from ..metrics.evaluation import ConfusionMatrix, TaskEvaluation, confusion, evaluate
from ..metrics.report import EvalReport
from ..models.checkpoint import save_checkpoint
from ..models.encoders import concept_supervision_from_marginals
from ..models.predictors import Predictor, build_predictor
from .buffer import ReplayBuffer, make_items, reservoir_insert
from .losses import FisherDiag
from .strategies import Strategy, StrategyConfig, build_strategy

RNG_STREAMS = ("data", "buffer", "init", "dropout")


def _log():
	return get_resilient_logger("nesycl.continual")


def spawn_rngs(seed: int) -> Dict[str, np.random.Generator]:
	"""One independent generator per concern, all derived from ``seed``."""
	children = np.random.SeedSequence(int(seed)).spawn(len(RNG_STREAMS))
	return {name: np.random.default_rng(child) for name, child in zip(RNG_STREAMS, children)}


@dataclass
class TrainingContext:
	"""Mutable state of one run, owned by a single ``run_stream`` call."""

	predictor: Predictor
	strategy: Strategy
	rngs: Dict[str, np.random.Generator]
	optimizer: OptimizerState
	buffer: Optional[ReplayBuffer] = None
	past: Optional[Predictor] = None
	fisher: Optional[FisherDiag] = None
	tasks_seen: int = 0
	epoch_losses: List[Tuple[int, int, float]] = field(default_factory=list)
	replay_checks: PinskerReport = field(default_factory=lambda: PinskerReport(0, 0, 0.0))

	@property
	def config(self) -> StrategyConfig:
		return self.strategy.config

	@property
	def init_rng(self) -> np.random.Generator:
		return self.rngs["init"]

	def resolve(self, key: str) -> Optional[CompiledKnowledge]:
		return self.buffer.knowledge.get(key) if self.buffer is not None else None

	def check_replay(self, live: Sequence[np.ndarray], stored: Sequence[np.ndarray]) -> PinskerReport:
		"""Slot-aggregate Pinsker check of live against stored buffer marginals, added to the run tally."""
		found = slot_pinsker_check(live, stored)
		tally = self.replay_checks
		min_slack = min(tally.min_slack, found.min_slack) if tally.n else found.min_slack
		self.replay_checks = PinskerReport(tally.n + found.n, tally.violations + found.violations, min_slack)
		if not found.holds:
			_log().error(
				f"Pinsker check failed on {found.violations}/{found.n} replayed items (min_slack={found.min_slack:.3e})"
			)
		return found


def _step(ctx: TrainingContext, data: Dataset, idx: np.ndarray, ck: CompiledKnowledge, task_id: int, key: str) -> float:
	predictor, cfg = ctx.predictor, ctx.config
	params = predictor.parameters()
	x, y = data.x[idx], data.labels[idx]
	zero_grad(params)

	live = predictor.forward(x, train=True, knowledge=ck)
	loss = predictor.label_nll(live, y)
	mask = data.sup_mask[idx]
	if cfg.w_c > 0 and mask.any():
		loss = loss + concept_supervision_from_marginals(live.marginals, data.concepts[idx], mask) * cfg.w_c

	replay = None
	if ctx.strategy.uses_buffer and ctx.buffer is not None:
		replay = ctx.buffer.sample(cfg.replay_batch, ctx.rngs["buffer"])
	extra = ctx.strategy.extra_loss(ctx, x, live, replay)
	if extra is not None:
		loss = loss + extra

	value = loss.item()
	if not np.isfinite(value):
		raise TrainingError(f"non-finite loss {value}")
	backward(loss)
	adam_step(params, ctx.optimizer)

	if ctx.strategy.uses_buffer and ctx.buffer is not None:
		items = make_items(
			x,
			y,
			task_id,
			key,
			[m.data for m in live.marginals],
			live.distill_scores.data,
			data.concepts[idx],
			mask,
		)
		for item in items:
			reservoir_insert(ctx.buffer, item, ctx.rngs["buffer"])
	return value


def train_task(
	predictor: Predictor,
	task: Task,
	strategy: Strategy,
	buffer: Optional[ReplayBuffer],
	past_snapshot: Optional[Predictor],
	context: TrainingContext,
	ck: CompiledKnowledge,
) -> Tuple[Predictor, Optional[ReplayBuffer], Predictor]:
	"""Train ``predictor`` on one task; returns (model, buffer, frozen snapshot).

	Raises:
		TrainingError: Any component failure, with task and epoch context
	"""
	context.predictor, context.strategy = predictor, strategy
	context.buffer, context.past = buffer, past_snapshot
	cfg = strategy.config
	epoch = -1
	try:
		strategy.before_task(context, task, ck)
		context.optimizer.reset_for_task()
		key = buffer.remember(ck) if buffer is not None else ck.name
		n = len(task.train)
		for epoch in range(cfg.epochs):
			order = context.rngs["data"].permutation(n)
			losses = [
				_step(context, task.train, order[start : start + cfg.batch_size], ck, task.task_id, key)
				for start in range(0, n, cfg.batch_size)
			]
			lr = context.optimizer.effective_lr
			context.optimizer.end_epoch()
			mean_loss = float(np.mean(losses)) if losses else 0.0
			context.epoch_losses.append((task.task_id, epoch, mean_loss))
			_log().info(f"strategy={strategy.name} task={task.task_id} epoch={epoch} loss={mean_loss:.4f} lr={lr:.2e}")
		strategy.after_task(context, task, ck)
	except (NesyclError, ValueError, FloatingPointError) as exc:
		raise TrainingError(f"task={task.task_id} epoch={epoch}: {exc}") from exc
	context.tasks_seen += 1
	return predictor, buffer, predictor.snapshot()


@dataclass
class StreamResult:
	"""Everything measured during one run."""

	strategy: str
	seed: int
	acc_y: AccuracyMatrix
	acc_c: AccuracyMatrix
	acc_y_masked: AccuracyMatrix
	acc_c_masked: AccuracyMatrix
	val_acc_y: List[float]
	ood: Optional[TaskEvaluation]
	confusion: List[ConfusionMatrix]
	predictor: Predictor
	checkpoints: List[str] = field(default_factory=list)
	wall_clock: float = 0.0
	replay_checks: Optional[PinskerReport] = None

	@property
	def n_tasks(self) -> int:
		return self.acc_y.n_tasks

	def final_metrics(self) -> Dict[str, Optional[float]]:
		single_row = self.acc_y.n_rows < self.acc_y.n_tasks
		out: Dict[str, Optional[float]] = {
			"class_il_y": class_il(self.acc_y),
			"class_il_c": class_il(self.acc_c),
			"task_il_y": task_il(self.acc_y_masked),
			"task_il_c": task_il(self.acc_c_masked),
			"fwt": None if single_row else fwt(self.acc_y),
			"bwt": None if single_row else bwt(self.acc_y),
			"val_class_il_y": float(np.mean(self.val_acc_y)) if self.val_acc_y else None,
			"random_acc_y": float(np.mean(self.acc_y.random)),
		}
		if self.ood is not None:
			out["ood_acc_y"] = self.ood.acc_y
			out["ood_acc_c"] = self.ood.acc_c
		return out

	def report(self, config_hash: str) -> EvalReport:
		rep = EvalReport(self.strategy, self.seed)
		rep.add_matrix("acc_y", self.acc_y)
		rep.add_matrix("acc_c", self.acc_c)
		rep.add_matrix("acc_y_masked", self.acc_y_masked)
		rep.add_matrix("acc_c_masked", self.acc_c_masked)
		for s, value in enumerate(self.acc_y.random):
			rep.add("random_acc_y", float(value), task=s)
		for name, value in self.final_metrics().items():
			rep.add(name, value)
		if self.replay_checks is not None:
			rep.add("buffer_pinsker_checks", self.replay_checks.n)
			rep.add("buffer_pinsker_violations", self.replay_checks.violations)
			rep.add("buffer_pinsker_min_slack", self.replay_checks.min_slack)
		rep.add("config_hash", config_hash)
		return rep


def _evaluate_row(
	predictor: Predictor, stream: TaskStream, row: int, matrices: Tuple[AccuracyMatrix, ...]
) -> None:
	acc_y, acc_c, acc_y_masked, acc_c_masked = matrices
	for s, task in enumerate(stream.tasks):
		ev = evaluate(predictor, task.test, stream.compiled(task), task.label_set(), task.concept_values())
		acc_y.set(row, s, ev.acc_y)
		acc_c.set(row, s, ev.acc_c)
		acc_y_masked.set(row, s, ev.acc_y_masked)
		acc_c_masked.set(row, s, ev.acc_c_masked)


def build_run_predictor(config: RunConfig, stream: TaskStream, rng: np.random.Generator) -> Predictor:
	if not stream.tasks:
		raise ConfigurationError(f"stream '{stream.benchmark}' has no tasks")
	first = stream.tasks[0]
	return build_predictor(
		config.model,
		stream.compiled(first),
		first.train.dim,
		config.hidden,
		rng,
		zero_init_last=config.zero_init_last,
		dropout=config.dropout,
		noise_std=config.noise_std,
	)


def run_stream(
	stream: TaskStream,
	config: RunConfig,
	run_dir: Optional[Path] = None,
) -> StreamResult:
	"""Train through ``stream`` with ``config.strategy`` and evaluate after every task.

	Offline trains once on the merged stream and yields a single matrix row.
	Checkpoints ``ckpt_task<t>.bin`` are written into ``run_dir`` when given.
	"""
	started = time.perf_counter()
	rngs = spawn_rngs(config.seed)
	strategy = build_strategy(StrategyConfig.from_run_config(config))
	predictor = build_run_predictor(config, stream, rngs["init"])
	predictor.concept_model.train_rng = rngs["dropout"]

	T = len(stream.tasks)
	rand_y = [evaluate(predictor, t.test, stream.compiled(t)).acc_y for t in stream.tasks]
	train_stream = strategy.prepare_stream(stream)
	n_rows = len(train_stream.tasks)
	matrices = (
		AccuracyMatrix(n_rows, T, rand_y),
		AccuracyMatrix(n_rows, T),
		AccuracyMatrix(n_rows, T),
		AccuracyMatrix(n_rows, T),
	)

	buffer = ReplayBuffer(strategy.config.buffer_capacity) if strategy.uses_buffer else None
	ctx = TrainingContext(predictor, strategy, rngs, OptimizerState(base_lr=config.lr, decay=config.lr_decay), buffer)
	past: Optional[Predictor] = None
	checkpoints: List[str] = []
	for row, task in enumerate(train_stream.tasks):
		ck = train_stream.compiled(task)
		predictor, buffer, past = train_task(predictor, task, strategy, buffer, past, ctx, ck)
		_evaluate_row(predictor, stream, row, matrices)
		_log().info(
			f"strategy={strategy.name} after task={task.task_id}: "
			f"acc_y={np.round(matrices[0].row(row), 3).tolist()} acc_c={np.round(matrices[1].row(row), 3).tolist()}"
		)
		if run_dir is not None:
			path = save_checkpoint(Path(run_dir) / f"ckpt_task{row}.bin", predictor)
			checkpoints.append(path.name)

	val_acc = [evaluate(predictor, t.val, stream.compiled(t)).acc_y for t in stream.tasks]
	ood = None
	if stream.ood is not None:
		ood = evaluate(predictor, stream.ood, stream.compiled(stream.tasks[0]))
	matrices_confusion = confusion(predictor, Dataset.concat([t.test for t in stream.tasks]))

	return StreamResult(
		strategy=strategy.name,
		seed=config.seed,
		acc_y=matrices[0],
		acc_c=matrices[1],
		acc_y_masked=matrices[2],
		acc_c_masked=matrices[3],
		val_acc_y=val_acc,
		ood=ood,
		confusion=matrices_confusion,
		predictor=predictor,
		checkpoints=checkpoints,
		wall_clock=time.perf_counter() - started,
		replay_checks=ctx.replay_checks if ctx.replay_checks.n else None,
	)
