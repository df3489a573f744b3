import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import skinbench as sb
from skinbench import evaluation
from skinbench.errors import (
    BadConfig,
    ClassMismatch,
    EmptyMatrix,
    EmptySplit,
    IndexOutOfRange,
    IoError,
    LengthMismatch,
    ShapeMismatch,
)
from skinbench.evaluation import (
    BenchmarkRecord,
    ConfusionMatrix,
    accuracy,
    confusion_matrix,
    evaluate_model,
    measure_load_time,
    measure_weight_size,
    predict,
)
from skinbench.model_zoo import ModelArtifact, softmax
from skinbench.preprocess import preprocess_batch


def brute_force_tally(predicted, actual, k):
    counts = np.zeros((k, k), dtype=int)
    for p, a in zip(predicted, actual):
        counts[p][a] += 1
    return counts


class TestConfusionMatrix:
    def test_identity(self):
        cm = confusion_matrix([0, 1, 2], [0, 1, 2], 3)
        assert np.array_equal(cm.counts, np.eye(3, dtype=int))
        assert cm.trace() == 3

    def test_forced_small_case(self):
        cm = confusion_matrix([1, 1], [0, 1], 2)
        assert cm.counts[1][0] == 1
        assert cm.counts[1][1] == 1
        assert np.all(cm.counts[0] == 0)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(123)
        for _ in range(20):
            n = int(rng.integers(1, 1000))
            pred = rng.integers(0, 7, n)
            act = rng.integers(0, 7, n)
            cm = confusion_matrix(pred, act, 7)
            assert np.array_equal(cm.counts, brute_force_tally(pred, act, 7))

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion_matrix([0, 1], [0], 2)

    def test_label_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            confusion_matrix([0, 3], [0, 1], 3)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=1, max_size=60))
    def test_column_sums_are_true_frequencies(self, pairs):
        pred = [p for p, _ in pairs]
        act = [a for _, a in pairs]
        cm = confusion_matrix(pred, act, 7)
        assert cm.total() == len(pairs)
        assert np.array_equal(cm.actual_counts(), np.bincount(act, minlength=7))

    def test_orientation_guard(self):
        # unbalanced fixture: class frequencies differ, so a transposed
        # tally cannot satisfy the column-sum property
        pred = [0, 0, 0, 1, 2, 2]
        act = [0, 1, 1, 1, 1, 0]
        cm = confusion_matrix(pred, act, 3)
        true_freq = np.bincount(act, minlength=3)
        assert np.array_equal(cm.actual_counts(), true_freq)
        transposed = cm.counts.T
        assert not np.array_equal(transposed.sum(axis=0), true_freq)


class TestAccuracy:
    def test_perfect(self):
        cm = ConfusionMatrix(np.eye(7, dtype=int) * 10, [str(i) for i in range(7)])
        assert accuracy(cm) == 1.0

    def test_94_of_100(self):
        counts = np.zeros((2, 2), dtype=int)
        counts[0][0] = 94
        counts[1][0] = 6
        cm = ConfusionMatrix(counts, ["a", "b"])
        assert accuracy(cm) == pytest.approx(0.94, abs=1e-12)

    def test_equals_elementwise_mean(self):
        rng = np.random.default_rng(7)
        pred = rng.integers(0, 7, 500)
        act = rng.integers(0, 7, 500)
        cm = confusion_matrix(pred, act, 7)
        assert accuracy(cm) == pytest.approx(float(np.mean(pred == act)), abs=1e-12)

    def test_empty(self):
        cm = ConfusionMatrix(np.zeros((2, 2), dtype=int), ["a", "b"])
        with pytest.raises(EmptyMatrix):
            accuracy(cm)


class TestPredict:
    def test_probability_vector(self, trained, probe_batch):
        from skinbench.preprocess import InputTensor

        tensors, _ = probe_batch
        spec = trained["model"].backbone.input
        probs, top = predict(trained["model"], InputTensor(tensors[0], spec))
        assert probs.shape == (7,)
        assert probs.sum() == pytest.approx(1.0, abs=1e-6)
        assert top == int(np.argmax(probs))

    def test_shape_mismatch(self, trained):
        from skinbench.preprocess import InputSpec, InputTensor

        bad = InputTensor(np.zeros((299, 299, 3), np.float32), InputSpec(299, 299))
        with pytest.raises(ShapeMismatch):
            predict(trained["model"], bad)

    def test_argmax_tie_breaks_low(self):
        assert int(np.argmax(np.array([0.5, 0.5]))) == 0
        assert int(np.argmax(np.array([0.3, 0.4, 0.4]))) == 1

    def test_argmax_invariant_to_logit_scaling(self):
        rng = np.random.default_rng(0)
        logits = rng.normal(size=(30, 7))
        base = softmax(logits).argmax(axis=1)
        for scale in (0.1, 3.0, 42.0):
            assert np.array_equal(softmax(logits * scale).argmax(axis=1), base)


class TestMeasurements:
    def test_exact_one_megabyte(self, tmp_path):
        p = tmp_path / "one.skbm"
        p.write_bytes(b"\0" * 1_048_576)
        artifact = ModelArtifact(path=p, backbone_id="MobileNet", class_names=[],
                                 training_config={}, byte_size=1_048_576)
        assert measure_weight_size(artifact) == 1.000

    def test_missing_file(self, tmp_path):
        artifact = ModelArtifact(path=tmp_path / "gone.skbm", backbone_id="MobileNet",
                                 class_names=[], training_config={}, byte_size=0)
        with pytest.raises(IoError):
            measure_weight_size(artifact)

    def test_load_time_needs_three_reps(self, trained):
        with pytest.raises(BadConfig):
            measure_load_time(trained["artifact"].path, repetitions=1)

    def test_load_time_nonnegative(self, trained):
        t = measure_load_time(trained["artifact"].path, repetitions=3)
        assert t >= 0


class TestEvaluateModel:
    def test_empty_split(self, trained):
        with pytest.raises(EmptySplit):
            evaluate_model(trained["artifact"], [])

    def test_class_mismatch(self, trained, split):
        import dataclasses

        bad = [dataclasses.replace(split.test[0], class_name="impostor")]
        with pytest.raises(ClassMismatch):
            evaluate_model(trained["artifact"], bad)

    def test_matches_hand_rolled_loop(self, trained, split):
        record = evaluate_model(trained["artifact"], split.test, repetitions=3)

        model = sb.load_model(trained["artifact"].path)
        tensors, labels = preprocess_batch(split.test, model.backbone.input)
        pred = model.predict_proba(tensors).argmax(axis=1)
        expected_cm = brute_force_tally(pred, labels, 7)

        assert np.array_equal(record.confusion.counts, expected_cm)
        assert record.accuracy_pct == pytest.approx(
            100.0 * float(np.mean(pred == labels)), abs=1e-9
        )
        assert record.weight_size_mb == pytest.approx(
            trained["artifact"].byte_size / 2**20, abs=5e-4
        )
        assert record.loading_time_s >= 0
        assert record.model_id == "MobileNet"

    def test_constant_model_on_balanced_split(self, trained, split):
        model = sb.load_model(trained["artifact"].path)
        model.head_w = np.zeros_like(model.head_w)
        bias = np.zeros_like(model.head_b)
        bias[2] = 10.0
        model.head_b = bias
        tensors, labels = preprocess_batch(split.test, model.backbone.input)
        pred = model.predict_proba(tensors).argmax(axis=1)
        cm = confusion_matrix(pred, labels, 7, model.class_names)
        # balanced split: constant predictor scores exactly 1/7
        assert accuracy(cm) == pytest.approx(1 / 7, abs=1e-12)
        assert np.count_nonzero(cm.counts.sum(axis=1)) == 1


class TestBenchmarkRecord:
    def _record(self, accuracy_pct=50.0):
        counts = np.array([[1, 1], [1, 1]])
        return BenchmarkRecord(
            model_id="M", weight_size_mb=1.0, loading_time_s=0.5,
            accuracy_pct=accuracy_pct,
            confusion=ConfusionMatrix(counts, ["a", "b"]),
        )

    def test_accuracy_consistency_enforced(self):
        self._record(50.0)
        with pytest.raises(BadConfig):
            self._record(60.0)

    def test_round_trip(self):
        r = self._record()
        r2 = BenchmarkRecord.from_dict(r.to_dict())
        assert r2.model_id == r.model_id
        assert np.array_equal(r2.confusion.counts, r.confusion.counts)


@pytest.mark.slow
class TestWeightSizeOrdering:
    def test_vgg16_larger_than_mobilenet_random_mode(self, tmp_path):
        sizes = {}
        for backbone_id in ("MobileNet", "VGG16"):
            model = sb.build_classifier(backbone_id, 7, weights="random", seed=0)
            artifact = sb.save_model(model, tmp_path / f"{backbone_id}.skbm")
            sizes[backbone_id] = artifact.byte_size
        # random mode: compare parameter footprints (same float32 storage)
        assert sizes["VGG16"] > sizes["MobileNet"]
