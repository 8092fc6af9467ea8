import struct

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from helpers import random_container
from neoseize import protonn
from neoseize.container import ModelContainer, load_model, save_model
from neoseize.errors import BadMagic, DimensionMismatch, SectionLengthMismatch, VersionUnsupported


@pytest.fixture
def container(rng):
    return random_container(rng)


def sections(raw):
    out, pos = {}, 6
    while pos < len(raw):
        tag = raw[pos : pos + 4]
        (length,) = struct.unpack_from("<I", raw, pos + 4)
        out[tag] = (pos + 8, length)
        pos += 8 + length
    return out


def test_layout(container):
    raw = container.to_bytes()
    assert raw[:4] == b"NSDM"
    assert raw[4] == 1 and raw[5] == 3
    secs = sections(raw)
    assert list(secs) == [b"PREP", b"PCA_", b"PNN_"]
    assert sum(8 + n for _, n in secs.values()) + 6 == len(raw)


def test_little_endian_payload(container):
    raw = container.to_bytes()
    start, _ = sections(raw)[b"PCA_"]
    D, d = struct.unpack_from("<II", raw, start)
    assert (D, d) == (22, 10)
    mean = np.frombuffer(raw, "<f4", D, start + 8)
    assert_array_equal(mean, container.pca.mean.astype(np.float32))


def test_save_load_save_fixed_point(container, tmp_path):
    save_model(container, tmp_path / "a.nsdm")
    loaded = load_model(tmp_path / "a.nsdm")
    save_model(loaded, tmp_path / "b.nsdm")
    assert (tmp_path / "a.nsdm").read_bytes() == (tmp_path / "b.nsdm").read_bytes()


def test_scores_bit_identical(container, rng):
    loaded = ModelContainer.from_bytes(container.to_bytes())
    X = rng.normal(size=(100, 22))
    assert np.array_equal(loaded.score_features(X), container.score_features(X))
    assert_array_equal(loaded.predict_features(X), container.predict_features(X))


def test_sparse_round_trip(rng):
    c = random_container(rng, sparsity=(0.5, 0.5, 0.75))
    loaded = ModelContainer.from_bytes(c.to_bytes())
    for name in ("W", "B", "Z"):
        assert_array_equal(getattr(loaded.classifier, name), getattr(c.classifier, name))
    assert loaded.classifier.sparsity == c.classifier.sparsity
    assert loaded.model_bytes == c.model_bytes < random_container(rng).model_bytes


def test_config_echo(rng):
    c = random_container(rng, window_s=16)
    loaded = ModelContainer.from_bytes(c.to_bytes())
    assert loaded.preprocess == c.preprocess
    assert loaded.features == c.features
    assert loaded.n_channels == 2 and loaded.fs_source == 256.0


def test_default_size_d100(rng):
    c = random_container(rng, n_channels=10, d=100, n=150, cfg=protonn.ProtoNNConfig(epochs=1))
    assert c.model_bytes == 4960


def test_truncated(container):
    raw = container.to_bytes()
    for cut in (len(raw) - 1, len(raw) - 100, 10):
        with pytest.raises(SectionLengthMismatch):
            ModelContainer.from_bytes(raw[:cut])


def test_trailing_bytes(container):
    with pytest.raises(SectionLengthMismatch):
        ModelContainer.from_bytes(container.to_bytes() + b"\0")


def test_wrong_declared_length(container):
    raw = bytearray(container.to_bytes())
    start, length = sections(bytes(raw))[b"PREP"]
    struct.pack_into("<I", raw, start - 4, length - 4)
    with pytest.raises(SectionLengthMismatch):
        ModelContainer.from_bytes(bytes(raw))


def test_bad_magic(container):
    with pytest.raises(BadMagic):
        ModelContainer.from_bytes(b"XXXX" + container.to_bytes()[4:])


def test_version(container):
    raw = bytearray(container.to_bytes())
    raw[4] = 9
    with pytest.raises(VersionUnsupported):
        ModelContainer.from_bytes(bytes(raw))


def test_channel_mismatch(container, rng):
    with pytest.raises(DimensionMismatch):
        container.infer_segment(rng.normal(size=(3, 1024)))


def test_pca_classifier_mismatch(container, rng):
    other = random_container(rng, d=6)
    with pytest.raises(DimensionMismatch):
        ModelContainer(preprocess=container.preprocess, features=container.features, fs_source=256.0,
                       n_channels=2, pca=container.pca, classifier=other.classifier)


def test_infer_segment(container, rng):
    assert container.infer_segment(rng.normal(size=(2, 1024))) in (0, 1)
