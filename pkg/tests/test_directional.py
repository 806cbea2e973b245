"""Directional claims on desk-scale streams (several seeds; deselected by default).

Run with ``pytest -m slow``.
"""

from __future__ import annotations

import numpy as np
import pytest

from nesycl.continual import run_stream
from nesycl.runner import stream_from_config

pytestmark = pytest.mark.slow

SEEDS = (0, 1, 2)
DESK_RUN = {
	"epochs": 5,
	"hidden": [32],
	"train_size": 200,
	"val_size": 40,
	"test_size": 80,
	"ood_size": 80,
	"feature_dim": 16,
	"buffer_capacity": 200,
}


def _mean_metric(tiny_config, metric, **overrides):
	values = []
	for seed in SEEDS:
		config = tiny_config(**{**DESK_RUN, **overrides, "seed": seed})
		values.append(run_stream(stream_from_config(config), config).final_metrics()[metric])
	return float(np.mean(values))


def test_joint_training_beats_fine_tuning(tiny_config):
	offline = _mean_metric(tiny_config, "class_il_y", strategy="offline")
	naive = _mean_metric(tiny_config, "class_il_y", strategy="naive")
	assert offline > naive


def test_concept_rehearsal_keeps_concepts(tiny_config):
	cool = _mean_metric(tiny_config, "class_il_c", strategy="cool", sup_fraction=0.1)
	naive = _mean_metric(tiny_config, "class_il_c", strategy="naive", sup_fraction=0.1)
	assert cool > naive


def test_replay_beats_fine_tuning(tiny_config):
	er = _mean_metric(tiny_config, "class_il_y", strategy="er")
	naive = _mean_metric(tiny_config, "class_il_y", strategy="naive")
	assert er > naive
