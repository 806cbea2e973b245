"""Likelihood / satisfying-mass checks, drift bounds, Pinsker and shortcut counting."""

from __future__ import annotations

import numpy as np
import pytest

from nesycl.analysis import (
	SHORTCUT_SYSTEM,
	bell_number,
	drift_bound_check,
	enumerate_additive_shortcuts,
	enumerate_map_shortcuts,
	maxima_grid_oracle,
	pinsker_check,
	random_distribution_pairs,
	restricted_growth_strings,
	risk_gap_check,
	slot_pinsker_check,
	uniform_marginals,
	verify_likelihood_maxima,
)
from nesycl.benchmarks import Dataset
from nesycl.exceptions import ConfigurationError, EnumerationCapError
from nesycl.knowledge import ConceptSchema, ConceptSlot, KnowledgeSpec, compile
from nesycl.models import build_predictor


def _one_hot(concepts: np.ndarray, cardinalities) -> list:
	return [np.eye(d)[concepts[:, j]] for j, d in enumerate(cardinalities)]


def _or_free():
	schema = ConceptSchema(
		slots=(ConceptSlot("a", 2, obj=0), ConceptSlot("b", 2, obj=1)),
		label_cardinalities=(2,),
	)
	return compile(KnowledgeSpec(schema, lambda c, y: y[0] == c[0] or c[1] == 1, "or-free"))


def _perturbed(predictor, scale, seed):
	other = predictor.snapshot()
	rng = np.random.default_rng(seed)
	for p in other.parameters():
		p.data = p.data + scale * rng.normal(size=p.data.shape)
	return other


class TestLikelihoodMassEquivalence:
	def test_grid_oracle_on_xor(self, xor_ck):
		report = maxima_grid_oracle(xor_ck)
		assert report.all_satisfy
		assert set(report.optima) == {0, 1}
		assert (0.0, 0.0) in report.optima[0]

	def test_grid_oracle_needs_binary_slots(self, addition_ck):
		with pytest.raises(ConfigurationError):
			maxima_grid_oracle(addition_ck)

	def test_true_concepts_have_full_mass(self, addition_ck):
		concepts = np.array([[3, 4], [0, 0], [9, 9]])
		data = Dataset(np.zeros((3, 2, 1)), concepts, concepts.sum(axis=1))
		report = verify_likelihood_maxima(_one_hot(concepts, (10, 10)), data, addition_ck)
		assert report.holds
		np.testing.assert_allclose(report.satisfying_mass, 1.0)
		np.testing.assert_allclose(report.nll, 0.0, atol=1e-12)

	def test_uniform_marginals_trigger_neither_direction(self, xor_ck):
		data = Dataset(np.zeros((2, 2, 1)), np.array([[0, 1], [1, 1]]), np.array([1, 0]))
		report = verify_likelihood_maxima(uniform_marginals(xor_ck, 2), data, xor_ck)
		np.testing.assert_allclose(report.satisfying_mass, 0.5)
		assert report.holds
		assert report.converse_not_applicable == 0

	def test_converse_skipped_for_multi_model_labels(self):
		ck = _or_free()
		data = Dataset(np.zeros((1, 2, 1)), np.array([[0, 1]]), np.array([0]))
		report = verify_likelihood_maxima(_one_hot(data.concepts, (2, 2)), data, ck)
		assert report.satisfying_mass[0] == pytest.approx(1.0)
		assert report.nll[0] == pytest.approx(np.log(2.0))
		assert report.converse_not_applicable == 1
		assert report.holds

	def test_any_predictor_satisfies_the_biconditional(self, tiny_mnadd):
		task = tiny_mnadd.tasks[4]
		ck = tiny_mnadd.compiled(task)
		predictor = build_predictor("nesy", ck, task.train.dim, (8,), np.random.default_rng(0))
		assert verify_likelihood_maxima(predictor, task.test, ck).holds

	def test_rejects_other_inputs(self, xor_ck, tiny_xor):
		with pytest.raises(ConfigurationError):
			verify_likelihood_maxima("model", tiny_xor.tasks[0].test, xor_ck)


class TestDriftBounds:
	@pytest.fixture
	def pair(self, tiny_xor):
		ck = tiny_xor.compiled(tiny_xor.tasks[0])
		theta = build_predictor("nesy", ck, 4, (6,), np.random.default_rng(1))
		return theta, _perturbed(theta, 0.3, seed=2)

	def test_risk_gap_holds_for_nearby_models(self, pair, tiny_xor):
		report = risk_gap_check(*pair, tiny_xor)
		assert report.applicable
		assert report.holds
		assert report.lhs <= report.rhs
		assert report.constants.zeta == 1

	def test_risk_gap_for_identical_models(self, pair, tiny_xor):
		theta, _ = pair
		report = risk_gap_check(theta, theta.snapshot(), tiny_xor)
		assert report.lhs == pytest.approx(0.0)
		assert report.rhs == pytest.approx(0.0)

	def test_drift_bound_holds(self, pair, tiny_xor):
		report = drift_bound_check(*pair, tiny_xor)
		assert report.applicable
		assert report.holds
		assert report.rhs == pytest.approx(report.current_risk + report.past_risk + report.drift)

	def test_single_task_bound_is_tight(self, pair, tiny_xor):
		report = drift_bound_check(*pair, tiny_xor, t=1)
		assert report.lhs == pytest.approx(report.rhs)
		assert report.drift == 0.0

	def test_task_index_range(self, pair, tiny_xor):
		with pytest.raises(ConfigurationError):
			drift_bound_check(*pair, tiny_xor, t=3)

	def test_cbm_is_rejected(self, tiny_mnadd):
		task = tiny_mnadd.tasks[0]
		cbm = build_predictor("cbm", tiny_mnadd.compiled(task), task.train.dim, (8,), np.random.default_rng(0))
		with pytest.raises(ConfigurationError):
			risk_gap_check(cbm, cbm.snapshot(), tiny_mnadd)


class TestPinsker:
	def test_random_pairs(self):
		report = pinsker_check(random_distribution_pairs(10_000, 5, np.random.default_rng(42)))
		assert report.n == 10_000
		assert report.holds
		assert report.min_slack >= 0.0

	def test_identical_distributions_have_zero_slack(self):
		p = np.array([0.2, 0.3, 0.5])
		report = pinsker_check([(p, p)])
		assert report.min_slack == pytest.approx(0.0)

	def test_zero_in_q_gives_infinite_divergence(self):
		report = pinsker_check([(np.array([0.5, 0.5]), np.array([1.0, 0.0]))])
		assert report.holds
		assert np.isinf(report.min_slack)

	def test_slot_aggregate(self, rng):
		live = [rng.dirichlet(np.ones(10), size=50) for _ in range(2)]
		stored = [rng.dirichlet(np.ones(10), size=50) for _ in range(2)]
		report = slot_pinsker_check(live, stored)
		assert report.n == 50
		assert report.holds


class TestAdditiveShortcuts:
	def test_shortcut_task_has_six_solutions(self):
		result = enumerate_additive_shortcuts(SHORTCUT_SYSTEM)
		assert result.variables == (0, 2, 4, 6, 8)
		assert len(result) == 6
		assert (0, 2, 4, 6, 8) in result.solutions
		assert (5, 7, 9, 1, 3) in result.solutions
		assert len(result.shortcuts()) == 5
		assert result.self_check()
		assert sum(result.matches_ground_truth()) == 1

	def test_cap(self):
		with pytest.raises(EnumerationCapError) as info:
			enumerate_additive_shortcuts(SHORTCUT_SYSTEM, cap=1000)
		assert info.value.count == 100_000

	def test_fully_determined_system(self):
		result = enumerate_additive_shortcuts([((0, 0), 0), ((0, 1), 1)])
		assert result.solutions == [(0, 1)]
		assert result.shortcuts() == []


class TestMapShortcuts:
	def test_one_difference(self):
		report = enumerate_map_shortcuts([((0, 1), False)], domain_size=4)
		assert report.count == 192
		assert report.injective_count == 24
		assert report.injective_on_observed

	def test_all_values_pairwise_different(self):
		obs = [((a, b), False) for a in range(6) for b in range(a + 1, 6)]
		report = enumerate_map_shortcuts(obs, domain_size=6)
		assert report.count == report.injective_count == 720
		assert not report.non_injective_exists

	def test_no_observations(self):
		report = enumerate_map_shortcuts([], domain_size=10)
		assert report.count == 10**10
		assert report.non_injective_exists

	def test_same_observation_collapses_values(self):
		report = enumerate_map_shortcuts([((0, 1), True)], domain_size=3)
		assert report.count == 9
		assert report.injective_count == 0
		assert report.non_injective_exists
		assert all(m[0] == m[1] for m in report.examples)

	def test_cardinality_limits(self):
		with pytest.raises(ConfigurationError):
			enumerate_map_shortcuts([], domain_size=11)
		with pytest.raises(ConfigurationError):
			enumerate_map_shortcuts([((0, 5), False)], domain_size=4)

	def test_partition_cap(self):
		obs = [((a, a + 1), False) for a in range(9)]
		with pytest.raises(EnumerationCapError):
			enumerate_map_shortcuts(obs, cap=1000)


class TestPartitions:
	@pytest.mark.parametrize("n,expected", [(0, 1), (1, 1), (3, 5), (5, 52), (10, 115975)])
	def test_bell_numbers(self, n, expected):
		assert bell_number(n) == expected

	def test_restricted_growth_strings(self):
		strings = list(restricted_growth_strings(4))
		assert len(strings) == len(set(strings)) == bell_number(4)
		assert all(s[0] == 0 for s in strings)
		assert all(max(s[: i + 1]) + 1 >= s[i + 1] for s in strings for i in range(3))
