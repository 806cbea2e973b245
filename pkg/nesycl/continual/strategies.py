"""Continual strategies.

A strategy plugs into the training loop through four hooks:

- ``prepare_stream``: reshape the task stream before training (Offline)
- ``before_task``: called once per task before the first epoch (Restart)
- ``extra_loss``: terms added to the current-task loss at every step
- ``after_task``: called once the task's epochs are done (EWC)

Strategies that set ``uses_buffer`` get a replay batch sampled before each
step and have the current batch offered to the buffer after it.

Weights: ``alpha`` is the rehearsal weight (COOL concept KL, DER/DER++ score
distillation), ``beta_replay`` the replayed-label weight (COOL, DER++).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Optional

import numpy as np

from ..autodiff import Tensor
from ..benchmarks.tasks import Task, TaskStream
from ..exceptions import ConfigurationError
from ..knowledge.compiled import CompiledKnowledge
from ..models.encoders import concept_supervision_from_marginals
from ..models.predictors import Prediction
from ..registry import get_strategy, register_strategy
from .buffer import ReplayBatch
from .losses import (
	cool_loss,
	der_loss,
	estimate_fisher,
	ewc_penalty,
	lwf_loss,
	replay_forward,
	replay_nll,
	score_distillation,
)

if TYPE_CHECKING:
	from .trainer import TrainingContext


@dataclass(frozen=True)
class StrategyConfig:
	name: str = "naive"
	alpha: float = 1.0
	beta_replay: float = 1.0
	lambda_ewc: float = 1.0
	lambda_lwf: float = 1.0
	lwf_temperature: float = 2.0
	w_c: float = 1.0
	buffer_capacity: int = 1000
	epochs: int = 25
	batch_size: int = 32
	replay_batch_size: int = 0

	def __post_init__(self) -> None:
		for key in ("alpha", "beta_replay", "lambda_ewc", "lambda_lwf", "w_c"):
			if getattr(self, key) < 0:
				raise ConfigurationError(f"StrategyConfig.{key} must be >= 0, got {getattr(self, key)}")
		if self.lwf_temperature <= 0:
			raise ConfigurationError(f"StrategyConfig.lwf_temperature must be > 0, got {self.lwf_temperature}")
		get_strategy(self.name)

	@property
	def replay_batch(self) -> int:
		return self.replay_batch_size or self.batch_size

	@classmethod
	def from_run_config(cls, config: Any) -> "StrategyConfig":
		return cls(
			name=config.strategy,
			alpha=config.alpha,
			beta_replay=config.beta_replay,
			lambda_ewc=config.lambda_ewc,
			lambda_lwf=config.lambda_lwf,
			lwf_temperature=config.lwf_temperature,
			w_c=config.w_c,
			buffer_capacity=config.buffer_capacity,
			epochs=config.epochs,
			batch_size=config.batch_size,
			replay_batch_size=config.replay_batch_size,
		)


class Strategy:
	name = ""
	uses_buffer = False

	def __init__(self, config: StrategyConfig):
		self.config = config

	def prepare_stream(self, stream: TaskStream) -> TaskStream:
		return stream

	def before_task(self, ctx: "TrainingContext", task: Task, ck: CompiledKnowledge) -> None:
		pass

	def extra_loss(
		self,
		ctx: "TrainingContext",
		x: np.ndarray,
		live: Prediction,
		replay: Optional[ReplayBatch],
	) -> Optional[Tensor]:
		return None

	def after_task(self, ctx: "TrainingContext", task: Task, ck: CompiledKnowledge) -> None:
		pass


@register_strategy
class Naive(Strategy):
	"""Plain fine-tuning on each task in turn."""

	name = "naive"


@register_strategy
class Restart(Strategy):
	"""Fit every task from scratch."""

	name = "restart"

	def before_task(self, ctx: "TrainingContext", task: Task, ck: CompiledKnowledge) -> None:
		if ctx.tasks_seen:
			ctx.predictor.reinitialize(ctx.init_rng)


@register_strategy
class Offline(Strategy):
	"""Joint training on the union of all tasks (upper bound)."""

	name = "offline"

	def prepare_stream(self, stream: TaskStream) -> TaskStream:
		return stream.merged()


@register_strategy
class LwF(Strategy):
	name = "lwf"

	def extra_loss(self, ctx, x, live, replay):
		if ctx.past is None or self.config.lambda_lwf == 0:
			return None
		return lwf_loss(ctx.predictor, ctx.past, x, self.config.lwf_temperature, self.config.lambda_lwf, live=live)


@register_strategy
class EWC(Strategy):
	"""Quadratic penalty weighted by the previous task's diagonal Fisher."""

	name = "ewc"

	def extra_loss(self, ctx, x, live, replay):
		if ctx.fisher is None or self.config.lambda_ewc == 0:
			return None
		return ewc_penalty(ctx.predictor, ctx.fisher, self.config.lambda_ewc)

	def after_task(self, ctx: "TrainingContext", task: Task, ck: CompiledKnowledge) -> None:
		ctx.fisher = estimate_fisher(ctx.predictor, task.train, knowledge=ck)


@register_strategy
class ER(Strategy):
	"""Experience replay: buffered examples are replayed with their labels only."""

	name = "er"
	uses_buffer = True

	def extra_loss(self, ctx, x, live, replay):
		if replay is None:
			return None
		return replay_nll(replay_forward(ctx.predictor, replay, ctx.resolve, train=True), replay)


@register_strategy
class DER(Strategy):
	"""Dark experience replay: distil the label scores recorded at insertion time."""

	name = "der"
	uses_buffer = True

	def extra_loss(self, ctx, x, live, replay):
		if replay is None or self.config.alpha == 0:
			return None
		return der_loss(ctx.predictor, replay, ctx.resolve, train=True) * self.config.alpha


@register_strategy
class DERpp(Strategy):
	"""DER plus cross-entropy on the replayed true labels."""

	name = "derpp"
	uses_buffer = True

	def extra_loss(self, ctx, x, live, replay):
		alpha, beta = self.config.alpha, self.config.beta_replay
		if replay is None or (alpha == 0 and beta == 0):
			return None
		forward = replay_forward(ctx.predictor, replay, ctx.resolve, train=True)
		loss: Optional[Tensor] = None
		if alpha:
			loss = score_distillation(forward, replay) * alpha
		if beta:
			term = replay_nll(forward, replay) * beta
			loss = term if loss is None else loss + term
		return loss


@register_strategy
class COOL(Strategy):
	"""Concept-level rehearsal: keep live concept marginals close to the stored
	ones while replaying labels under each item's own knowledge."""

	name = "cool"
	uses_buffer = True

	def extra_loss(self, ctx, x, live, replay):
		alpha, beta, w_c = self.config.alpha, self.config.beta_replay, self.config.w_c
		if replay is None:
			return None
		supervised = w_c > 0 and bool(replay.concept_mask.any())
		if alpha == 0 and beta == 0 and not supervised:
			return None
		forward = replay_forward(ctx.predictor, replay, ctx.resolve, train=True)
		ctx.check_replay([m.data for m in forward.marginals], replay.concept_marginals)
		loss: Optional[Tensor] = None
		if alpha or beta:
			loss = cool_loss(ctx.predictor, replay, ctx.resolve, alpha, beta, live=forward)
		if supervised:
			term = concept_supervision_from_marginals(forward.marginals, replay.concepts, replay.concept_mask) * w_c
			loss = term if loss is None else loss + term
		return loss


def build_strategy(config: StrategyConfig) -> Strategy:
	"""Instantiate the registered strategy named in ``config``."""
	return get_strategy(config.name)(config)
