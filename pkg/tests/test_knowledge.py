"""Knowledge compilation and the exact reasoning layer against brute-force sums."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from nesycl.exceptions import ConfigurationError, EnumerationCapError, UnknownNameError
from nesycl.knowledge import (
	ConceptSchema,
	ConceptSlot,
	KnowledgeSpec,
	addition_knowledge,
	compile,
	compile_named,
	joint_concepts,
	label_distribution,
	label_given_concepts,
	map_label,
	satisfying_mass,
)


def _brute_force(spec: KnowledgeSpec, marginals):
	"""p(y) = sum_c 1[(c,y) |= K] / Z(c) * prod_j p(c_j), straight from the predicate."""
	schema = spec.schema
	labels = list(schema.iter_labels())
	out = np.zeros(len(labels))
	for c in schema.iter_concepts():
		hits = [li for li, y in enumerate(labels) if spec.predicate(c, y)]
		if not hits:
			continue
		weight = np.prod([marginals[j][v] for j, v in enumerate(c)]) / len(hits)
		out[hits] += weight
	return out


def _random_marginals(rng, cardinalities):
	return [rng.dirichlet(np.ones(d)) for d in cardinalities]


def _or_free_spec() -> KnowledgeSpec:
	"""y must equal bit a, unless bit b is set (then both labels are models)."""
	schema = ConceptSchema(
		slots=(ConceptSlot("a", 2, obj=0), ConceptSlot("b", 2, obj=1)),
		label_cardinalities=(2,),
	)
	return KnowledgeSpec(schema, lambda c, y: y[0] == c[0] or c[1] == 1, "or-free")


class TestCompiledTables:
	def test_xor_tables(self, xor_ck):
		assert xor_ck.satisfying_set[(1,)] == ((0, 1), (1, 0))
		assert xor_ck.satisfying_set[(0,)] == ((0, 0), (1, 1))
		np.testing.assert_array_equal(xor_ck.model_counts, np.ones((2, 2)))

	def test_addition_tables(self, addition_ck):
		assert addition_ck.n_labels == 19
		assert len(addition_ck.satisfying_set[(9,)]) == 10
		assert addition_ck.satisfying_set[(0,)] == ((0, 0),)
		assert addition_ck.min_positive_count() == 1
		assert addition_ck.reachable_labels() == list(range(19))

	def test_clevr_reachable_labels(self, clevr_ck):
		reachable = {clevr_ck.index_to_label(i) for i in clevr_ck.reachable_labels()}
		assert reachable == {(0, 0, 0), (0, 1, 0), (1, 0, 0), (1, 1, 1)}
		assert clevr_ck.label_to_index((1, 1, 1)) == 7
		assert clevr_ck.model_count((3, 3, 5, 6)) == 1

	def test_multi_model_counts(self):
		ck = compile(_or_free_spec())
		assert ck.model_count((0, 0)) == 1
		assert ck.model_count((0, 1)) == 2
		assert ck.min_positive_count() == 1
		assert label_given_concepts(1, (1, 1), ck) == pytest.approx(0.5)
		assert label_given_concepts(1, (0, 0), ck) == 0.0

	def test_tables_are_read_only(self, xor_ck):
		with pytest.raises(ValueError):
			xor_ck.model_counts[0, 0] = 5

	def test_enumeration_cap(self):
		with pytest.raises(EnumerationCapError) as info:
			compile(addition_knowledge(), cap=50)
		assert info.value.count == 100

	def test_enumeration_cap_from_environment(self, monkeypatch):
		monkeypatch.setenv("NESYCL_ENUM_CAP", "10")
		with pytest.raises(EnumerationCapError):
			compile(addition_knowledge())

	def test_compile_named(self):
		ck = compile_named("xor", "task3")
		assert ck.name == "xor@task3"
		with pytest.raises(UnknownNameError):
			compile_named("no-such-knowledge")


class TestSchemaValidation:
	def test_cardinality_below_two(self):
		with pytest.raises(ConfigurationError):
			ConceptSchema(slots=(ConceptSlot("a", 1),), label_cardinalities=(2,))

	def test_no_slots(self):
		with pytest.raises(ConfigurationError):
			ConceptSchema(slots=(), label_cardinalities=(2,))

	def test_label_names_length(self):
		with pytest.raises(ConfigurationError):
			ConceptSchema(slots=(ConceptSlot("a", 2),), label_cardinalities=(2,), label_names=("y", "z"))

	def test_head_defaults_to_slot_name(self):
		schema = ConceptSchema(slots=(ConceptSlot("a", 3),), label_cardinalities=(2,))
		assert schema.slots[0].head == "a"
		assert len(schema.schema_hash()) == 32


class TestLabelDistribution:
	@pytest.mark.parametrize("name", ["xor", "mnist-add", "or-free"])
	def test_matches_brute_force(self, name, rng):
		spec = _or_free_spec() if name == "or-free" else compile_named(name).spec
		ck = compile(spec)
		for _ in range(5):
			marginals = _random_marginals(rng, spec.schema.cardinalities)
			np.testing.assert_allclose(
				label_distribution(marginals, ck).data, _brute_force(spec, marginals), atol=1e-12
			)

	def test_clevr_matches_brute_force(self, clevr_ck, rng):
		marginals = _random_marginals(rng, clevr_ck.schema.cardinalities)
		np.testing.assert_allclose(
			clevr_ck.label_distribution(marginals).data, _brute_force(clevr_ck.spec, marginals), atol=1e-12
		)

	def test_batched_rows_match_single(self, addition_ck, rng):
		batch = [rng.dirichlet(np.ones(10), size=4) for _ in range(2)]
		table = addition_ck.label_distribution(batch).data
		assert table.shape == (4, 19)
		for i in range(4):
			np.testing.assert_allclose(table[i], addition_ck.label_distribution([m[i] for m in batch]).data)

	def test_sums_to_one_when_every_concept_is_consistent(self, addition_ck, rng):
		marginals = _random_marginals(rng, (10, 10))
		assert label_distribution(marginals, addition_ck).data.sum() == pytest.approx(1.0, abs=1e-12)

	def test_unreachable_labels_get_zero(self, clevr_ck, rng):
		dist = clevr_ck.label_distribution(_random_marginals(rng, clevr_ck.schema.cardinalities)).data
		unreachable = sorted(set(range(8)) - set(clevr_ck.reachable_labels()))
		np.testing.assert_array_equal(dist[unreachable], 0.0)

	def test_one_hot_concepts_give_point_mass(self, addition_ck):
		dist = addition_ck.label_distribution([np.eye(10)[3], np.eye(10)[8]]).data
		assert dist[11] == pytest.approx(1.0)

	def test_wrong_slot_count(self, addition_ck):
		with pytest.raises(ConfigurationError):
			addition_ck.label_distribution([np.full(10, 0.1)])


class TestFunctionalApi:
	def test_map_label_ties_go_low(self, xor_ck):
		assert map_label([np.array([0.5, 0.5]), np.array([0.5, 0.5])], xor_ck) == (0,)
		assert map_label([np.array([0.1, 0.9]), np.array([0.8, 0.2])], xor_ck) == (1,)

	def test_map_label_batched(self, addition_ck):
		batch = [np.eye(10)[[1, 9]], np.eye(10)[[2, 9]]]
		assert map_label(batch, addition_ck) == [(3,), (18,)]

	def test_satisfying_mass_equals_likelihood_for_single_models(self, addition_ck, rng):
		marginals = _random_marginals(rng, (10, 10))
		probs = addition_ck.label_distribution(marginals).data
		assert satisfying_mass(marginals, 7, addition_ck) == pytest.approx(probs[7], abs=1e-12)

	def test_satisfying_mass_exceeds_likelihood_with_free_models(self, rng):
		ck = compile(_or_free_spec())
		marginals = [np.array([0.6, 0.4]), np.array([0.3, 0.7])]
		assert satisfying_mass(marginals, 0, ck) > ck.label_distribution(marginals).data[0]

	def test_joint_concepts(self, rng):
		a, b = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(4))
		joint = joint_concepts([a, b])
		assert joint.shape == (1, 12)
		np.testing.assert_allclose(joint[0], np.outer(a, b).ravel())

	def test_satisfies_matches_predicate(self, addition_ck):
		for a, b in itertools.product(range(10), repeat=2):
			assert addition_ck.satisfies((a, b), a + b)
			assert not addition_ck.satisfies((a, b), (a + b + 1) % 19)
