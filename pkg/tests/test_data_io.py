import gzip
import struct

import numpy as np
import pytest

from airreg.data_io import (
    BlobSpec,
    generate_blobs,
    load_features,
    load_idx,
    load_model,
    read_features,
    read_labels,
    save_model,
    split,
    write_features,
    write_idx,
    write_labels,
)
from airreg.errors import (
    CountMismatchError,
    DataFormatError,
    HeaderMismatchError,
    InvalidInputError,
    ParseError,
    TruncatedFileError,
    WrongMagicError,
)
from airreg.tensor import Dataset


class TestBlobs:
    def test_deterministic(self):
        a = generate_blobs(BlobSpec(60, 4, 3, 2.0, 1.0, seed=5))
        b = generate_blobs(BlobSpec(60, 4, 3, 2.0, 1.0, seed=5))
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_balanced_and_on_sphere(self):
        d = generate_blobs(BlobSpec(103, 6, 5, 4.0, 1e-12, seed=1))
        counts = np.bincount(d.labels)
        assert counts.max() - counts.min() <= 1
        for c in range(5):
            rows = d.features[d.labels == c]
            np.testing.assert_allclose(rows, np.broadcast_to(rows[0], rows.shape), atol=1e-10)
            assert np.linalg.norm(rows[0]) == pytest.approx(4.0, abs=1e-9)

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            BlobSpec(1, 3, 2, 1.0, 1.0)
        with pytest.raises(InvalidInputError):
            BlobSpec(10, 3, 2, 0.0, 1.0)


class TestIdx:
    def _write(self, tmp_path, n=5):
        rng = np.random.default_rng(0)
        imgs = rng.integers(0, 256, size=(n, 4, 3), dtype=np.uint8)
        labs = rng.integers(0, 10, size=n, dtype=np.uint8)
        ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
        write_idx(ip, lp, imgs, labs)
        return ip, lp, imgs, labs

    def test_round_trip(self, tmp_path):
        ip, lp, imgs, labs = self._write(tmp_path)
        d = load_idx(ip, lp, num_classes=10)
        assert d.features.shape == (5, 12) and d.num_classes == 10
        np.testing.assert_allclose(d.features, imgs.reshape(5, -1) / 255.0)
        np.testing.assert_array_equal(d.labels, labs)

    def test_gzip(self, tmp_path):
        ip, lp, imgs, _ = self._write(tmp_path)
        gz = tmp_path / "img.idx.gz"
        gz.write_bytes(gzip.compress(ip.read_bytes()))
        assert load_idx(gz, lp).features.shape == (5, 12)

    def test_labels_passed_as_images(self, tmp_path):
        ip, lp, *_ = self._write(tmp_path)
        with pytest.raises(WrongMagicError):
            load_idx(ip, ip)

    def test_empty_file(self, tmp_path):
        ip, lp, *_ = self._write(tmp_path)
        empty = tmp_path / "empty"
        empty.write_bytes(b"")
        with pytest.raises(TruncatedFileError):
            load_idx(empty, lp)

    def test_short_payload(self, tmp_path):
        ip, lp, *_ = self._write(tmp_path)
        ip.write_bytes(ip.read_bytes()[:-3])
        with pytest.raises(TruncatedFileError):
            load_idx(ip, lp)

    def test_count_mismatch(self, tmp_path):
        ip, lp, *_ = self._write(tmp_path)
        lp.write_bytes(struct.pack(">II", 0x801, 4) + bytes(4))
        with pytest.raises(CountMismatchError):
            load_idx(ip, lp)


class TestBinary:
    def test_feature_round_trip_bit_exact(self, tmp_path):
        X = np.random.default_rng(1).normal(size=(7, 3)).astype(np.float32)
        write_features(tmp_path / "f", X)
        got = read_features(tmp_path / "f")
        assert got.dtype == np.float64
        assert np.array_equal(got.astype(np.float32).view(np.uint32), X.view(np.uint32))

    def test_header_layout(self, tmp_path):
        write_features(tmp_path / "f", np.ones((2, 3)))
        raw = (tmp_path / "f").read_bytes()
        assert raw[:4] == b"AIRF"
        assert struct.unpack("<IQI", raw[4:20]) == (1, 2, 3)
        assert len(raw) == 20 + 24

    def test_feature_errors(self, tmp_path):
        path = tmp_path / "f"
        write_features(path, np.ones((4, 2)))
        raw = path.read_bytes()
        path.write_bytes(raw[:-4])
        with pytest.raises(TruncatedFileError):
            read_features(path)
        path.write_bytes(b"AIRX" + raw[4:])
        with pytest.raises(WrongMagicError):
            read_features(path)
        path.write_bytes(raw[:4] + struct.pack("<I", 2) + raw[8:])
        with pytest.raises(HeaderMismatchError):
            read_features(path)
        path.write_bytes(raw + b"\0\0\0\0")
        with pytest.raises(HeaderMismatchError):
            read_features(path)

    def test_label_round_trip(self, tmp_path):
        write_labels(tmp_path / "l", np.array([2, 0, 1]), 3)
        y, C = read_labels(tmp_path / "l")
        assert C == 3 and y.tolist() == [2, 0, 1]
        Y = np.array([[1, 0, 1, 0], [0, 0, 0, 0], [0, 1, 1, 1]], dtype=bool)
        write_labels(tmp_path / "m", Y, 4)
        got, C = read_labels(tmp_path / "m")
        assert C == 4 and np.array_equal(got, Y)

    def test_label_truncated(self, tmp_path):
        write_labels(tmp_path / "l", np.array([2, 0, 1]), 3)
        raw = (tmp_path / "l").read_bytes()
        (tmp_path / "l").write_bytes(raw[:-4])
        with pytest.raises(TruncatedFileError):
            read_labels(tmp_path / "l")

    def test_load_features_binary(self, tmp_path):
        X = np.arange(6, dtype=np.float32).reshape(3, 2)
        write_features(tmp_path / "f", X)
        write_labels(tmp_path / "l", np.array([0, 1, 1]), 2)
        d = load_features(tmp_path / "f", tmp_path / "l")
        assert d.n == 3 and d.num_classes == 2
        write_labels(tmp_path / "l", np.array([0, 1]), 2)
        with pytest.raises(CountMismatchError):
            load_features(tmp_path / "f", tmp_path / "l")

    def test_model_round_trip(self, tmp_path):
        w = np.random.default_rng(2).normal(size=(5, 3)).astype(np.float32).astype(np.float64)
        save_model(tmp_path / "w", w)
        assert np.array_equal(load_model(tmp_path / "w"), w)
        raw = (tmp_path / "w").read_bytes()
        np.testing.assert_array_equal(np.frombuffer(raw[16:32], "<f4"), w[:4, 0])
        with pytest.raises(DataFormatError):
            (tmp_path / "w").write_bytes(raw[:-1])
            load_model(tmp_path / "w")


class TestCsv:
    def test_fixture(self, tmp_path):
        (tmp_path / "f.csv").write_text("1,2,3\n4.5,-1e-3,0\n")
        (tmp_path / "l.csv").write_text("2\n0\n")
        d = load_features(tmp_path / "f.csv", tmp_path / "l.csv")
        np.testing.assert_array_equal(d.features, [[1, 2, 3], [4.5, -1e-3, 0]])
        assert d.labels.tolist() == [2, 0] and d.num_classes == 3

    def test_multilabel(self, tmp_path):
        (tmp_path / "f.csv").write_text("1,2\n3,4\n")
        (tmp_path / "l.csv").write_text("0;2\n1\n")
        d = load_features(tmp_path / "f.csv", tmp_path / "l.csv", num_classes=4)
        assert d.multilabel
        assert d.labels.tolist() == [[True, False, True, False], [False, True, False, False]]

    def test_ragged(self, tmp_path):
        (tmp_path / "f.csv").write_text("1,2\n3\n")
        (tmp_path / "l.csv").write_text("0\n1\n")
        with pytest.raises(ParseError):
            load_features(tmp_path / "f.csv", tmp_path / "l.csv")

    def test_non_numeric(self, tmp_path):
        (tmp_path / "f.csv").write_text("1,x\n3,4\n")
        (tmp_path / "l.csv").write_text("0\n1\n")
        with pytest.raises(ParseError):
            load_features(tmp_path / "f.csv", tmp_path / "l.csv")


class TestSplit:
    def _data(self, n=100, C=3):
        return Dataset(np.arange(n, dtype=float)[:, None], np.arange(n) % C, C)

    def test_partition(self):
        d = self._data()
        tr, te = split(d, 0.5, seed=0)
        assert tr.n + te.n == 100 and abs(tr.n - 50) <= 2
        ids = np.concatenate([tr.features[:, 0], te.features[:, 0]])
        assert sorted(ids.tolist()) == list(range(100))

    def test_even_split(self):
        d = Dataset(np.arange(100, dtype=float)[:, None], np.arange(100) % 2, 2)
        tr, te = split(d, 0.5, seed=3)
        assert tr.n == te.n == 50

    def test_stratified(self):
        d = self._data(301, 4)
        tr, _ = split(d, 0.3, seed=1)
        overall = np.bincount(d.labels) / d.n
        got = np.bincount(tr.labels, minlength=4)
        assert np.all(np.abs(got - overall * tr.n) <= 1 + 1e-9)

    def test_deterministic(self):
        d = self._data()
        a, _ = split(d, 0.25, seed=9)
        b, _ = split(d, 0.25, seed=9)
        np.testing.assert_array_equal(a.features, b.features)

    def test_bad_fraction(self):
        with pytest.raises(InvalidInputError):
            split(self._data(), 1.0, seed=0)
