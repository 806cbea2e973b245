"""Strategy registry and hooks, and whole-stream training runs."""

from __future__ import annotations

import numpy as np
import pytest

from nesycl.autodiff import OptimizerState
from nesycl.continual import (
	ReplayBatch,
	StrategyConfig,
	TrainingContext,
	build_strategy,
	make_items,
	run_stream,
	spawn_rngs,
)
from nesycl.continual.trainer import build_run_predictor
from nesycl.exceptions import ConfigurationError, UnknownNameError
from nesycl.metrics import evaluate
from nesycl.models import build_predictor
from nesycl.registry import list_strategies

ALL_STRATEGIES = ["cool", "der", "derpp", "er", "ewc", "lwf", "naive", "offline", "restart"]


def _context(name: str, predictor, **config) -> TrainingContext:
	strategy = build_strategy(StrategyConfig(name=name, **config))
	return TrainingContext(predictor, strategy, spawn_rngs(0), OptimizerState(base_lr=1e-3, decay=0.95))


class TestStrategyConfig:
	def test_registered_names(self):
		assert list_strategies() == ALL_STRATEGIES

	def test_unknown_strategy(self):
		with pytest.raises(UnknownNameError):
			StrategyConfig(name="gem")

	@pytest.mark.parametrize("field", ["alpha", "beta_replay", "lambda_ewc", "lambda_lwf", "w_c"])
	def test_negative_weights(self, field):
		with pytest.raises(ConfigurationError):
			StrategyConfig(**{field: -0.1})

	def test_temperature_must_be_positive(self):
		with pytest.raises(ConfigurationError):
			StrategyConfig(lwf_temperature=0.0)

	def test_replay_batch_defaults_to_batch_size(self):
		assert StrategyConfig(batch_size=12).replay_batch == 12
		assert StrategyConfig(batch_size=12, replay_batch_size=5).replay_batch == 5

	def test_from_run_config(self, tiny_config):
		cfg = StrategyConfig.from_run_config(tiny_config(strategy="der", alpha=0.3))
		assert cfg.name == "der"
		assert cfg.alpha == 0.3
		assert cfg.epochs == 1
		assert cfg.buffer_capacity == 20

	def test_only_replay_strategies_use_the_buffer(self):
		users = {name for name in ALL_STRATEGIES if build_strategy(StrategyConfig(name=name)).uses_buffer}
		assert users == {"cool", "der", "derpp", "er"}


class TestHooks:
	def test_offline_merges_the_stream(self, tiny_xor):
		merged = build_strategy(StrategyConfig(name="offline")).prepare_stream(tiny_xor)
		assert len(merged) == 1
		assert len(merged.tasks[0].train) == 64

	def test_restart_reinitialises_after_the_first_task(self, xor_ck, tiny_xor):
		predictor = build_predictor("nesy", xor_ck, 4, (4,), np.random.default_rng(0))
		ctx = _context("restart", predictor)
		before = [p.data.copy() for p in predictor.parameters()]
		ctx.strategy.before_task(ctx, tiny_xor.tasks[0], xor_ck)
		assert all(np.array_equal(a, p.data) for a, p in zip(before, predictor.parameters()))
		ctx.tasks_seen = 1
		ctx.strategy.before_task(ctx, tiny_xor.tasks[1], xor_ck)
		assert not all(np.array_equal(a, p.data) for a, p in zip(before, predictor.parameters()))

	def test_ewc_records_fisher_after_a_task(self, xor_ck, tiny_xor):
		predictor = build_predictor("nesy", xor_ck, 4, (4,), np.random.default_rng(0))
		ctx = _context("ewc", predictor)
		assert ctx.strategy.extra_loss(ctx, None, None, None) is None
		ctx.strategy.after_task(ctx, tiny_xor.tasks[0], xor_ck)
		assert ctx.fisher is not None
		assert ctx.strategy.extra_loss(ctx, None, None, None).item() == pytest.approx(0.0)

	def test_cool_without_weights_or_supervision_adds_nothing(self, xor_ck):
		predictor = build_predictor("nesy", xor_ck, 4, (4,), np.random.default_rng(0))
		ctx = _context("cool", predictor, alpha=0.0, beta_replay=0.0)
		items = make_items(np.zeros((2, 2, 4)), np.array([0, 1]), 0, "xor", [np.full((2, 2), 0.5)] * 2, np.zeros((2, 2)))
		assert ctx.strategy.extra_loss(ctx, None, None, ReplayBatch.from_items(items)) is None

	def test_cool_supervises_annotated_buffer_items(self, xor_ck):
		predictor = build_predictor("nesy", xor_ck, 4, (4,), np.random.default_rng(0))
		ctx = _context("cool", predictor, alpha=0.0, beta_replay=0.0, w_c=1.0)
		items = make_items(
			np.zeros((2, 2, 4)),
			np.array([0, 1]),
			0,
			"xor",
			[np.full((2, 2), 0.5)] * 2,
			np.zeros((2, 2)),
			concepts=np.array([[0, 0], [0, 1]]),
			concept_mask=np.array([[True, True], [False, False]]),
		)
		loss = ctx.strategy.extra_loss(ctx, None, None, ReplayBatch.from_items(items))
		assert loss is not None
		assert loss.item() > 0
		assert ctx.replay_checks.n == 2
		assert ctx.replay_checks.violations == 0

	def test_replay_check_tally(self, xor_ck):
		predictor = build_predictor("nesy", xor_ck, 4, (4,), np.random.default_rng(0))
		ctx = _context("cool", predictor)
		found = ctx.check_replay([np.array([[0.5, 0.5]])], [np.array([[0.25, 0.75]])])
		# KL = 0.143841, bound = 0.5 * 0.5 ** 2
		assert found.min_slack == pytest.approx(0.143841 - 0.125, abs=1e-6)
		ctx.check_replay([np.array([[0.2, 0.8]])], [np.array([[0.2, 0.8]])])
		assert ctx.replay_checks.n == 2
		assert ctx.replay_checks.violations == 0
		assert ctx.replay_checks.min_slack == pytest.approx(0.0, abs=1e-12)

	@pytest.mark.parametrize("name", ["er", "der", "derpp", "cool"])
	def test_replay_strategies_skip_an_empty_buffer(self, name, xor_ck):
		predictor = build_predictor("nesy", xor_ck, 4, (4,), np.random.default_rng(0))
		ctx = _context(name, predictor)
		assert ctx.strategy.extra_loss(ctx, None, None, None) is None


class TestRunStream:
	def _params(self, result):
		return [p.data for p in result.predictor.parameters()]

	def test_matrices_and_checkpoints(self, tiny_xor, tiny_config, tmp_path):
		result = run_stream(tiny_xor, tiny_config(strategy="naive"), run_dir=tmp_path)
		assert result.acc_y.values.shape == (2, 2)
		assert not np.isnan(result.acc_y.values).any()
		assert result.checkpoints == ["ckpt_task0.bin", "ckpt_task1.bin"]
		assert (tmp_path / "ckpt_task1.bin").exists()
		assert result.wall_clock > 0

	def test_same_seed_same_run(self, tiny_xor, tiny_config):
		config = tiny_config(strategy="cool", seed=4)
		a, b = run_stream(tiny_xor, config), run_stream(tiny_xor, config)
		np.testing.assert_array_equal(a.acc_y.values, b.acc_y.values)
		for pa, pb in zip(self._params(a), self._params(b)):
			np.testing.assert_array_equal(pa, pb)

	def test_cool_with_zero_weights_is_naive(self, tiny_xor, tiny_config):
		naive = run_stream(tiny_xor, tiny_config(strategy="naive"))
		cool = run_stream(tiny_xor, tiny_config(strategy="cool", alpha=0.0, beta_replay=0.0))
		np.testing.assert_array_equal(naive.acc_y.values, cool.acc_y.values)
		for pa, pb in zip(self._params(naive), self._params(cool)):
			np.testing.assert_array_equal(pa, pb)

	def test_offline_has_one_row(self, tiny_xor, tiny_config):
		result = run_stream(tiny_xor, tiny_config(strategy="offline"))
		assert result.acc_y.values.shape == (1, 2)
		metrics = result.final_metrics()
		assert metrics["fwt"] is None
		assert metrics["bwt"] is None
		assert 0.0 <= metrics["class_il_y"] <= 1.0

	def test_cool_checks_pinsker_on_replayed_items(self, tiny_mnadd, tiny_config):
		result = run_stream(tiny_mnadd, tiny_config(strategy="cool"))
		checks = result.replay_checks
		assert checks is not None
		assert checks.n > 0
		assert checks.violations == 0
		assert checks.min_slack > -1e-9
		report = result.report("0" * 64)
		assert report.value("buffer_pinsker_violations") == "0"
		assert int(report.value("buffer_pinsker_checks")) == checks.n

	def test_no_replay_checks_without_concept_rehearsal(self, tiny_mnadd, tiny_config):
		assert run_stream(tiny_mnadd, tiny_config(strategy="der")).replay_checks is None

	def test_task_il_never_below_class_il(self, tiny_mnadd, tiny_config):
		result = run_stream(tiny_mnadd, tiny_config(strategy="naive"))
		assert (result.acc_y_masked.values >= result.acc_y.values).all()
		metrics = result.final_metrics()
		assert metrics["task_il_y"] >= metrics["class_il_y"]

	def test_random_baseline_is_the_initial_model(self, tiny_xor, tiny_config):
		config = tiny_config(seed=9)
		initial = build_run_predictor(config, tiny_xor, spawn_rngs(9)["init"])
		expected = [evaluate(initial, t.test, tiny_xor.compiled(t)).acc_y for t in tiny_xor.tasks]
		result = run_stream(tiny_xor, config)
		np.testing.assert_allclose(result.acc_y.random, expected)

	@pytest.mark.parametrize("name", ALL_STRATEGIES)
	def test_every_strategy_runs(self, name, tiny_mnadd, tiny_config):
		metrics = run_stream(tiny_mnadd, tiny_config(strategy=name)).final_metrics()
		assert 0.0 <= metrics["class_il_y"] <= 1.0
		assert 0.0 <= metrics["class_il_c"] <= 1.0
		assert metrics["val_class_il_y"] is not None

	def test_cbm_family(self, tiny_mnadd, tiny_config):
		result = run_stream(tiny_mnadd, tiny_config(strategy="derpp", model="cbm"))
		assert result.acc_y.values.shape == (9, 9)
		assert len(result.confusion) == 2
