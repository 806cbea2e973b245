"""Shared fixtures: compiled knowledge, tiny streams and desk-sized run configs."""

from __future__ import annotations

import numpy as np
import pytest

from nesycl.benchmarks import StreamSizes, gen_mnadd_seq, make_digit_generator, xor_stream
from nesycl.config import build_config
from nesycl.knowledge import addition_knowledge, clevr_knowledge, compile, xor_toy

# Small enough that a full run finishes in a couple of seconds
TINY_RUN = {
	"epochs": 1,
	"batch_size": 16,
	"hidden": [8],
	"train_size": 24,
	"val_size": 8,
	"test_size": 12,
	"ood_size": 12,
	"feature_dim": 12,
	"buffer_capacity": 20,
}


@pytest.fixture(autouse=True)
def _quiet_env(monkeypatch):
	monkeypatch.delenv("NESYCL_DATA_DIR", raising=False)
	monkeypatch.delenv("NESYCL_OUT_DIR", raising=False)
	monkeypatch.delenv("NESYCL_ENUM_CAP", raising=False)
	monkeypatch.setenv("NESYCL_LOG_LEVEL", "WARNING")


@pytest.fixture
def rng():
	return np.random.default_rng(42)


@pytest.fixture(scope="session")
def xor_ck():
	return compile(xor_toy())


@pytest.fixture(scope="session")
def addition_ck():
	return compile(addition_knowledge())


@pytest.fixture(scope="session")
def clevr_ck():
	return compile(clevr_knowledge())


@pytest.fixture
def tiny_xor():
	return xor_stream(n_tasks=2, sizes=StreamSizes(train=32, val=8, test=16, ood=0), seed=3)


@pytest.fixture
def tiny_mnadd():
	sizes = StreamSizes(train=20, val=6, test=10, ood=0)
	return gen_mnadd_seq(gen=make_digit_generator(dim=12, seed=1), sizes=sizes, sup_fraction=0.25, seed=1)


@pytest.fixture
def tiny_config(tmp_path):
	"""Factory for validated tiny configs writing under ``tmp_path``."""

	def make(**overrides):
		values = {**TINY_RUN, "out_dir": str(tmp_path / "runs"), "data_dir": str(tmp_path / "data")}
		values.update(overrides)
		return build_config(overrides=values, env={})

	return make
