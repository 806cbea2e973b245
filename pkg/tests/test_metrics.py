"""Accuracy matrices, continual metrics, evaluation and shortcut diagnostics."""

from __future__ import annotations

import numpy as np
import pytest

from nesycl.benchmarks import Dataset, StreamSizes, gen_mnadd_shortcut, make_digit_generator
from nesycl.exceptions import ConfigurationError
from nesycl.metrics import (
	AccuracyMatrix,
	EvalReport,
	apply_concept_map,
	bwt,
	class_il,
	confusion,
	evaluate,
	fwt,
	masked_argmax,
	read_confusion_csv,
	read_metrics_csv,
	semantic_equivalence,
	shortcut_report,
	task_il,
	write_confusion_csv,
)
from nesycl.metrics.evaluation import ConfusionMatrix
from nesycl.metrics.report import COLUMNS, numeric_metrics
from nesycl.models import build_predictor

ROWS = [[0.9, 0.2, 0.1], [0.6, 0.8, 0.3], [0.5, 0.7, 0.9]]
RANDOM = [0.1, 0.15, 0.2]
# Digit map a model trained on the even-sum task may learn instead of the identity
EVEN_SHORTCUT = {0: 5, 2: 7, 4: 9, 6: 1, 8: 3}


class TestContinualMetrics:
	def test_hand_computed_matrix(self):
		A = AccuracyMatrix.from_rows(ROWS, RANDOM)
		assert class_il(A) == pytest.approx(0.7)
		assert fwt(A) == pytest.approx(0.075)
		assert bwt(A) == pytest.approx(0.5 / 3)

	def test_task_il_uses_masked_matrix(self):
		masked = AccuracyMatrix.from_rows([[1.0, 0.5, 0.5], [0.9, 1.0, 0.5], [0.8, 0.9, 1.0]])
		assert task_il(masked) == pytest.approx(0.9)

	def test_explicit_random_baseline(self):
		A = AccuracyMatrix.from_rows(ROWS)
		assert fwt(A, A_rand=[0.0, 0.0, 0.0]) == pytest.approx(0.25)

	def test_prefix_of_the_stream(self):
		A = AccuracyMatrix.from_rows(ROWS, RANDOM)
		assert class_il(A, T=2) == pytest.approx(0.6)
		assert fwt(A, T=2) == pytest.approx(0.05)

	def test_single_row_has_no_transfer(self):
		A = AccuracyMatrix(1, 3)
		A.set_row(0, [0.7, 0.8, 0.9])
		assert class_il(A) == pytest.approx(0.8)
		assert fwt(A) is None
		assert bwt(A) is None

	def test_single_task_has_no_transfer(self):
		A = AccuracyMatrix.from_rows([[0.4]])
		assert fwt(A) is None
		assert bwt(A) is None

	def test_accuracy_range(self):
		A = AccuracyMatrix(2, 2)
		with pytest.raises(ConfigurationError):
			A.set(0, 0, 1.2)

	def test_incomplete_last_row(self):
		A = AccuracyMatrix(2, 2)
		A.set(1, 0, 0.5)
		with pytest.raises(ConfigurationError):
			class_il(A)


class TestEvaluation:
	def _xor_data(self):
		concepts = np.array([[0, 0], [0, 1], [1, 0], [1, 1], [0, 1]])
		labels = concepts[:, 0] ^ concepts[:, 1]
		return Dataset(np.zeros((5, 2, 4)), concepts, labels)

	def test_uniform_model(self, xor_ck):
		predictor = build_predictor("nesy", xor_ck, 4, (4,), np.random.default_rng(0), zero_init_last=True)
		data = self._xor_data()
		ev = evaluate(predictor, data, label_mask=[1], concept_values=[(1,), (1,)])
		assert ev.n == 5
		assert ev.acc_y == pytest.approx(2 / 5)
		assert ev.acc_y_masked == pytest.approx(3 / 5)
		assert ev.acc_c == pytest.approx(np.mean([3 / 5, 2 / 5]))
		assert ev.acc_c_masked == pytest.approx(np.mean([2 / 5, 3 / 5]))

	def test_empty_dataset(self, xor_ck):
		predictor = build_predictor("nesy", xor_ck, 4, (4,), np.random.default_rng(0))
		empty = Dataset(np.zeros((0, 2, 4)), np.zeros((0, 2)), np.zeros(0))
		assert evaluate(predictor, empty).n == 0

	def test_masked_argmax(self):
		scores = np.array([[0.1, 0.5, 0.4], [0.3, 0.3, 0.3]])
		np.testing.assert_array_equal(masked_argmax(scores, [2, 0]), [2, 0])
		np.testing.assert_array_equal(masked_argmax(scores, None), [1, 0])
		with pytest.raises(ConfigurationError):
			masked_argmax(scores, [])

	def test_confusion_rows_are_supports(self, xor_ck):
		predictor = build_predictor("nesy", xor_ck, 4, (4,), np.random.default_rng(0))
		data = self._xor_data()
		for j, matrix in enumerate(confusion(predictor, data)):
			np.testing.assert_array_equal(matrix.supports(), np.bincount(data.concepts[:, j], minlength=2))


class TestReport:
	def test_rows_and_csv(self, tmp_path):
		report = EvalReport("cool", 3)
		report.add_matrix("acc_y", AccuracyMatrix.from_rows([[0.5, 0.25]]))
		report.add("fwt", None)
		report.add("class_il_y", 0.375)
		report.add("config_hash", "abc")
		frame = read_metrics_csv(report.write_csv(tmp_path / "metrics.csv"))
		assert list(frame.columns) == COLUMNS
		assert "fwt" not in set(frame["metric"])
		assert report.value("acc_y_after_0", task=1) == "0.25"
		numeric = numeric_metrics(frame)
		assert "config_hash" not in set(numeric["metric"])
		assert numeric.loc[numeric["metric"] == "class_il_y", "value"].item() == 0.375

	def test_floats_survive_the_file(self, tmp_path):
		report = EvalReport("naive", 0)
		report.add("class_il_y", 1 / 3)
		frame = numeric_metrics(read_metrics_csv(report.write_csv(tmp_path / "m.csv")))
		assert frame["value"].item() == 1 / 3

	def test_confusion_file_carries_hash(self, tmp_path):
		matrix = ConfusionMatrix("digit1", np.array([[3, 1], [0, 2]]))
		path = write_confusion_csv(tmp_path / "confusion_digit1.csv", matrix, "deadbeef")
		stored, counts = read_confusion_csv(path)
		assert stored == "deadbeef"
		np.testing.assert_array_equal(counts, matrix.counts)
		assert matrix.accuracy() == pytest.approx(5 / 6)

	def test_confusion_file_without_hash(self, tmp_path):
		path = tmp_path / "confusion.csv"
		path.write_text("true,pred_0\n0,1\n", encoding="utf-8")
		with pytest.raises(ConfigurationError):
			read_confusion_csv(path)


class TestSemantics:
	@pytest.fixture
	def shortcut_task(self):
		gen = make_digit_generator(dim=12, confusable=True, seed=0)
		return gen_mnadd_shortcut(gen=gen, sizes=StreamSizes(40, 4, 40, 20), seed=0)

	def test_ground_truth_is_equivalent(self, shortcut_task):
		data = shortcut_task.tasks[0].test
		report = semantic_equivalence(data.concepts.copy(), data)
		assert report.equivalent
		assert report.agreement == 1.0

	def test_even_digit_shortcut_is_flagged(self, shortcut_task):
		task = shortcut_task.tasks[0]
		ck = shortcut_task.compiled(task)
		predicted = apply_concept_map(task.test.concepts, EVEN_SHORTCUT)
		diag = shortcut_report(predicted, task.test, ck)
		assert diag.label_agreement == 1.0
		assert diag.concept_agreement == 0.0
		assert diag.flagged

	def test_shortcut_fails_out_of_distribution(self, shortcut_task):
		ood = shortcut_task.ood
		ck = shortcut_task.compiled(shortcut_task.tasks[0])
		predicted = apply_concept_map(ood.concepts, EVEN_SHORTCUT)
		assert shortcut_report(predicted, ood, ck).label_agreement < 1.0

	def test_mapped_ground_truth(self, shortcut_task):
		data = shortcut_task.tasks[0].test
		predicted = apply_concept_map(data.concepts, EVEN_SHORTCUT)
		assert semantic_equivalence(predicted, data, ground_truth_map=EVEN_SHORTCUT).equivalent

	def test_per_slot_maps(self):
		concepts = np.array([[0, 0], [1, 1]])
		out = apply_concept_map(concepts, [{0: 1}, {1: 0}])
		np.testing.assert_array_equal(out, [[1, 0], [1, 0]])
		with pytest.raises(ConfigurationError):
			apply_concept_map(concepts, [{0: 1}])
