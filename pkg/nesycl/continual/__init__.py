from __future__ import annotations

from .buffer import BufferItem, ReplayBatch, ReplayBuffer, make_items, reservoir_insert
from .losses import (
	FisherDiag,
	cool_loss,
	der_loss,
	estimate_fisher,
	ewc_penalty,
	lwf_loss,
	replay_forward,
)
from .strategies import Strategy, StrategyConfig, build_strategy
from .trainer import StreamResult, TrainingContext, run_stream, spawn_rngs, train_task

__all__ = [
	"BufferItem",
	"FisherDiag",
	"ReplayBatch",
	"ReplayBuffer",
	"Strategy",
	"StrategyConfig",
	"StreamResult",
	"TrainingContext",
	"build_strategy",
	"cool_loss",
	"der_loss",
	"estimate_fisher",
	"ewc_penalty",
	"lwf_loss",
	"make_items",
	"replay_forward",
	"reservoir_insert",
	"run_stream",
	"spawn_rngs",
	"train_task",
]
