"""Task-stream generators, supervision masks, dataset files and the IDX reader."""

from __future__ import annotations

import gzip
import struct

import numpy as np
import pytest

from nesycl.benchmarks import (
	Dataset,
	IdxGlyphSource,
	StreamSizes,
	SyntheticGlyphGenerator,
	TaskStream,
	attach_supervision,
	gen_clevr_like,
	gen_mnadd_seq,
	gen_mnadd_shortcut,
	load_mnist_idx,
	make_digit_generator,
	make_object_generator,
	read_idx_images,
	read_stream,
	save_mnist_idx,
	shortcut_task_pairs,
	write_stream,
)
from nesycl.benchmarks.glyphs import CONFUSABLE_DISTANCE, MIN_DISTANCE
from nesycl.exceptions import ConfigurationError, IdxParseError
from nesycl.registry import get_benchmark, list_benchmarks

SMALL = StreamSizes(train=16, val=4, test=8, ood=10)


def _digits(seed=0, confusable=False):
	return make_digit_generator(dim=12, confusable=confusable, seed=seed)


class TestMnaddSeq:
	def test_nine_tasks_with_two_sums_each(self):
		stream = gen_mnadd_seq(gen=_digits(), sizes=SMALL, seed=0)
		assert len(stream) == 9
		assert stream.ood is None
		for t, task in enumerate(stream.tasks):
			sums = set(task.train.labels) | set(task.test.labels)
			assert sums <= {2 * t, 2 * t + 1}
			np.testing.assert_array_equal(task.train.concepts.sum(axis=1), task.train.labels)

	def test_records_are_consistent_with_knowledge(self):
		assert gen_mnadd_seq(gen=_digits(), sizes=SMALL, seed=0).check_consistency() == []

	def test_same_seed_same_stream(self):
		a = gen_mnadd_seq(gen=_digits(), sizes=SMALL, seed=5)
		b = gen_mnadd_seq(gen=_digits(), sizes=SMALL, seed=5)
		np.testing.assert_array_equal(a.tasks[3].train.x, b.tasks[3].train.x)
		np.testing.assert_array_equal(a.tasks[8].test.labels, b.tasks[8].test.labels)

	def test_shapes(self):
		task = gen_mnadd_seq(gen=_digits(), sizes=SMALL, seed=0).tasks[2]
		assert task.train.x.shape == (16, 2, 12)
		assert task.val.concepts.shape == (4, 2)
		assert task.test.sup_mask.shape == (8, 2)


class TestMnaddShortcut:
	def test_two_tasks_and_ood(self):
		stream = gen_mnadd_shortcut(gen=_digits(confusable=True), sizes=SMALL, seed=0)
		assert len(stream) == 2
		assert len(stream.ood) == 10
		assert stream.check_consistency() == []

	def test_task_vocabularies(self):
		stream = gen_mnadd_shortcut(gen=_digits(confusable=True), sizes=StreamSizes(200, 10, 10, 50), seed=0)
		first = stream.tasks[0].train.concept_combinations()
		assert {tuple(sorted(c)) for c in first} == {(0, 6), (4, 6), (2, 8), (4, 8)}
		assert set(np.unique(stream.tasks[1].train.concepts)) <= {1, 3, 5, 7, 9}

	def test_ood_pairs_are_unseen(self):
		task1, task2, ood = shortcut_task_pairs()
		assert not set(ood) & set(task1)
		assert not set(ood) & set(task2)
		assert len(task1) == 8
		assert len(task2) == 25

	def test_confusable_prototypes(self):
		gen = _digits(confusable=True)
		distances = gen.pairwise_distances()
		assert distances[4, 9] == pytest.approx(CONFUSABLE_DISTANCE)
		others = [distances[a, b] for a in range(10) for b in range(10) if a != b and {a, b} != {4, 9}]
		assert min(others) >= MIN_DISTANCE - 1e-9


class TestClevrLike:
	def test_five_tasks_with_disjoint_vocabularies(self):
		stream = gen_clevr_like(gen=make_object_generator(dim=10), sizes=SMALL, seed=0)
		assert len(stream) == 5
		assert stream.check_consistency() == []
		vocab = [set(np.unique(t.train.concepts[:, :2])) for t in stream.tasks]
		for a in range(5):
			for b in range(a + 1, 5):
				assert not vocab[a] & vocab[b]

	def test_ood_objects_differ(self):
		stream = gen_clevr_like(gen=make_object_generator(dim=10), sizes=SMALL, seed=0)
		ood = stream.ood
		assert (ood.concepts[:, 0] != ood.concepts[:, 1]).all()
		assert (ood.concepts[:, 2] != ood.concepts[:, 3]).all()
		ck = stream.compiled(stream.tasks[0])
		assert {ck.index_to_label(y) for y in ood.labels} == {(0, 0, 0)}

	def test_feature_layout(self):
		gen = make_object_generator(dim=10)
		assert gen.dim == 24
		stream = gen_clevr_like(gen=gen, sizes=SMALL, seed=0)
		assert stream.tasks[0].train.x.shape == (16, 2, 24)


class TestSupervision:
	def test_annotated_count_is_ceil(self, rng):
		data = Dataset(np.zeros((10, 2, 3)), np.zeros((10, 2)), np.zeros(10))
		assert attach_supervision(data, 0.25, rng).annotated().sum() == 3
		assert attach_supervision(data, 0.0, rng).annotated().sum() == 0
		assert attach_supervision(data, 1.0, rng).sup_mask.all()

	def test_whole_records_are_annotated(self, rng):
		data = Dataset(np.zeros((20, 2, 3)), np.zeros((20, 2)), np.zeros(20))
		mask = attach_supervision(data, 0.5, rng).sup_mask
		assert (mask[:, 0] == mask[:, 1]).all()

	def test_fraction_range(self, rng):
		data = Dataset(np.zeros((4, 2, 3)), np.zeros((4, 2)), np.zeros(4))
		with pytest.raises(ConfigurationError):
			attach_supervision(data, 1.5, rng)

	def test_only_training_split_is_annotated(self):
		stream = gen_mnadd_seq(gen=_digits(), sizes=SMALL, sup_fraction=0.5, seed=0)
		for task in stream.tasks:
			assert task.train.annotated().sum() == 8
			assert not task.test.sup_mask.any()


class TestStreams:
	def test_task_ids_must_increase(self):
		stream = gen_mnadd_seq(gen=_digits(), sizes=SMALL, seed=0)
		with pytest.raises(ConfigurationError):
			TaskStream("x", [stream.tasks[1], stream.tasks[0]])

	def test_merged_is_the_union(self):
		stream = gen_mnadd_seq(gen=_digits(), sizes=SMALL, seed=0)
		merged = stream.merged()
		assert len(merged) == 1
		assert len(merged.tasks[0].train) == 9 * 16
		assert set(merged.tasks[0].label_set()) == set(range(18))

	def test_compiled_tables_are_shared(self):
		stream = gen_mnadd_seq(gen=_digits(), sizes=SMALL, seed=0)
		a, b = stream.compiled(stream.tasks[0]), stream.compiled(stream.tasks[1])
		assert a.name != b.name
		assert a.model_counts is b.model_counts

	def test_registry(self):
		assert list_benchmarks() == ["clevr-like", "mnadd-seq", "mnadd-shortcut"]
		assert get_benchmark("mnadd-seq") is gen_mnadd_seq

	def test_file_round_trip(self, tmp_path):
		stream = gen_mnadd_shortcut(gen=_digits(confusable=True), sizes=SMALL, sup_fraction=0.5, seed=2)
		write_stream(stream, tmp_path, {"seed": 2})
		back = read_stream(tmp_path)
		assert back.benchmark == "mnadd-shortcut"
		assert [t.knowledge.identifier for t in back.tasks] == [t.knowledge.identifier for t in stream.tasks]
		np.testing.assert_array_equal(back.tasks[1].train.x, stream.tasks[1].train.x)
		np.testing.assert_array_equal(back.tasks[0].train.sup_mask, stream.tasks[0].train.sup_mask)
		np.testing.assert_array_equal(back.ood.labels, stream.ood.labels)


class TestGlyphs:
	def test_too_many_classes_for_dim(self):
		with pytest.raises(ConfigurationError):
			SyntheticGlyphGenerator(n_classes=10, dim=5)

	def test_idx_source_samples_matching_class(self, rng):
		features = np.arange(12, dtype=float).reshape(6, 2)
		source = IdxGlyphSource(features, np.array([0, 1, 2, 0, 1, 2]))
		drawn = source.sample(1, 4, rng)
		assert all(tuple(row) in {(2.0, 3.0), (8.0, 9.0)} for row in drawn)
		with pytest.raises(ConfigurationError):
			source.sample(7, 1, rng)


class TestIdx:
	def _write(self, tmp_path, n=5, suffix=""):
		rng = np.random.default_rng(0)
		images = rng.integers(0, 256, size=(n, 4, 3), dtype=np.uint8)
		labels = rng.integers(0, 10, size=n, dtype=np.uint8)
		paths = (tmp_path / f"img.idx{suffix}", tmp_path / f"lbl.idx{suffix}")
		save_mnist_idx(paths[0], paths[1], images, labels)
		return paths, images, labels

	@pytest.mark.parametrize("suffix", ["", ".gz"])
	def test_load(self, tmp_path, suffix):
		(img, lbl), images, labels = self._write(tmp_path, suffix=suffix)
		features, read_labels = load_mnist_idx(img, lbl)
		assert features.shape == (5, 12)
		np.testing.assert_allclose(features, images.reshape(5, -1) / 255.0)
		np.testing.assert_array_equal(read_labels, labels)
		if suffix:
			with gzip.open(img, "rb") as fh:
				assert struct.unpack(">I", fh.read(4))[0] == 0x803

	def test_bad_magic(self, tmp_path):
		path = tmp_path / "bad.idx"
		path.write_bytes(struct.pack(">IIII", 0x801, 1, 1, 1) + b"\x00")
		with pytest.raises(IdxParseError) as info:
			read_idx_images(path)
		assert info.value.offset == 0

	def test_truncated_pixels(self, tmp_path):
		(img, _), _, _ = self._write(tmp_path)
		blob = img.read_bytes()
		img.write_bytes(blob[:-5])
		with pytest.raises(IdxParseError, match="truncated"):
			read_idx_images(img)

	def test_truncated_header(self, tmp_path):
		path = tmp_path / "short.idx"
		path.write_bytes(struct.pack(">II", 0x803, 2))
		with pytest.raises(IdxParseError, match="header"):
			read_idx_images(path)

	def test_count_mismatch(self, tmp_path):
		(img, _), _, _ = self._write(tmp_path, n=5)
		other = tmp_path / "other"
		other.mkdir()
		(_, lbl), _, _ = self._write(other, n=4)
		with pytest.raises(IdxParseError, match="count"):
			load_mnist_idx(img, lbl)

	def test_label_out_of_range(self, tmp_path):
		img, lbl = tmp_path / "i.idx", tmp_path / "l.idx"
		save_mnist_idx(img, lbl, np.zeros((2, 2, 2), dtype=np.uint8), np.array([3, 12], dtype=np.uint8))
		with pytest.raises(IdxParseError) as info:
			load_mnist_idx(img, lbl)
		assert info.value.offset == 9

	def test_missing_file(self, tmp_path):
		with pytest.raises(IdxParseError):
			read_idx_images(tmp_path / "absent.idx")
