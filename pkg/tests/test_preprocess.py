import numpy as np
import pytest
from PIL import Image

from skinbench import model_zoo, preprocess
from skinbench.dataset import ImageSample, scan_dataset
from skinbench.errors import DecodeError, EmptyImage, UnknownBackbone
from skinbench.preprocess import InputSpec, preprocess_batch, preprocess_image, required_input


class TestRequiredInput:
    def test_mobilenet(self):
        spec = required_input("MobileNet")
        assert spec.shape == (224, 224, 3)

    def test_xception(self):
        spec = required_input("Xception")
        assert spec.shape == (299, 299, 3)

    def test_unknown(self):
        with pytest.raises(UnknownBackbone):
            required_input("AlexNet")


class TestPreprocessImage:
    def test_resize_to_mobilenet(self):
        buf = np.random.default_rng(0).integers(0, 256, (450, 600, 3), dtype=np.uint8)
        t = preprocess_image(buf, required_input("MobileNet"))
        assert t.data.shape == (224, 224, 3)

    @pytest.mark.parametrize("spec", [s.input for s in model_zoo.list_backbones()],
                             ids=[s.id for s in model_zoo.list_backbones()])
    def test_shape_matches_registry_geometry(self, spec):
        buf = np.random.default_rng(1).integers(0, 256, (37, 53, 3), dtype=np.uint8)
        assert preprocess_image(buf, spec).data.shape == spec.shape

    def test_unit_range_saturated_white(self):
        buf = np.full((10, 10, 3), 255, np.uint8)
        t = preprocess_image(buf, InputSpec(224, 224, value_range="unit"))
        assert np.all(t.data == 1.0)

    def test_symmetric_range_mid_gray(self):
        buf = np.full((10, 10, 3), 128, np.uint8)
        t = preprocess_image(buf, InputSpec(299, 299, value_range="symmetric"))
        assert np.allclose(t.data, 128.0 / 127.5 - 1.0, atol=1e-6)

    def test_geometry_idempotence(self):
        spec = InputSpec(224, 224, value_range="unit")
        buf = np.random.default_rng(2).integers(0, 256, (224, 224, 3), dtype=np.uint8)
        t = preprocess_image(buf, spec)
        assert t.data.shape == spec.shape
        # no resize happened: pure normalization
        assert np.array_equal(t.data, buf.astype(np.float32) / 255.0)

    def test_empty_image(self):
        with pytest.raises(EmptyImage):
            preprocess_image(np.zeros((0, 0, 3), np.uint8), InputSpec(224, 224))

    @pytest.mark.parametrize("value_range,lo,hi", [("unit", 0.0, 1.0), ("symmetric", -1.0, 1.0)])
    def test_range_containment(self, value_range, lo, hi):
        buf = np.random.default_rng(3).integers(0, 256, (100, 100, 3), dtype=np.uint8)
        spec = InputSpec(50, 50, value_range=value_range)
        data = preprocess_image(buf, spec).data
        assert data.min() >= lo and data.max() <= hi

    def test_normalization_monotone_on_constants(self):
        spec_u = InputSpec(8, 8, value_range="unit")
        spec_s = InputSpec(8, 8, value_range="symmetric")
        values = [0, 1, 77, 128, 200, 254, 255]
        for spec in (spec_u, spec_s):
            outs = [
                preprocess_image(np.full((4, 4, 3), v, np.uint8), spec).data[0, 0, 0]
                for v in values
            ]
            assert outs == sorted(outs)


class TestPreprocessBatch:
    @pytest.fixture
    def tree(self, tmp_path):
        for i, name in enumerate(["a", "b", "c"]):
            d = tmp_path / name
            d.mkdir()
            Image.fromarray(np.full((6, 6, 3), 40 * i, np.uint8)).save(d / "x.jpeg")
        return scan_dataset(tmp_path)

    def test_label_order_preserved(self, tree):
        spec = InputSpec(32, 32)
        order = [tree.samples[0], tree.samples[2], tree.samples[1]]
        batch, labels = preprocess_batch(order, spec)
        assert batch.shape == (3, 32, 32, 3)
        assert labels.tolist() == [0, 2, 1]

    def test_empty_batch(self):
        batch, labels = preprocess_batch([], InputSpec(64, 64))
        assert batch.shape == (0, 64, 64, 3)
        assert labels.shape == (0,)

    def test_decode_error_carries_index(self, tree, tmp_path):
        corrupt = tmp_path / "a" / "broken.jpeg"
        corrupt.write_bytes(b"\xff\xd8 nope")
        samples = [
            tree.samples[0],
            ImageSample(path=corrupt, class_name="a", class_index=0),
            tree.samples[1],
        ]
        with pytest.raises(DecodeError) as err:
            preprocess_batch(samples, InputSpec(16, 16))
        assert err.value.index == 1
