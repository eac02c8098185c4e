"""Dataset acquisition and the binary file formats.

Feature file (little-endian)::

    b"AIRF" | u32 version=1 | u64 n | u32 p | n*p float32, row-major

Label file::

    b"AIRL" | u32 version=1 | u64 n | u32 C | u8 multilabel
            | per example: u32 count, count * u32 label

Model file::

    b"AIRW" | u32 version=1 | u32 p | u32 C | p*C float32, one class after another
"""
import csv
import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CountMismatchError,
    HeaderMismatchError,
    InvalidInputError,
    ParseError,
    TruncatedFileError,
    WrongMagicError,
)
from .tensor import Dataset

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
FORMAT_VERSION = 1


@dataclass(frozen=True)
class BlobSpec:
    n: int
    p: int
    num_classes: int
    separation: float
    stddev: float
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2 or self.n < self.num_classes:
            raise InvalidInputError("need n >= C >= 2")
        if self.p < 1:
            raise InvalidInputError("p must be >= 1")
        if not (self.separation > 0 and self.stddev > 0):
            raise InvalidInputError("separation and stddev must be positive")


def generate_blobs(spec):
    """Isotropic Gaussian clusters around centers on a sphere of radius ``separation``."""
    rng = np.random.default_rng(spec.seed)
    C, n, p = spec.num_classes, spec.n, spec.p
    centers = rng.standard_normal((C, p))
    centers *= spec.separation / np.linalg.norm(centers, axis=1, keepdims=True)
    labels = rng.permutation(np.arange(n) % C)
    X = centers[labels] + spec.stddev * rng.standard_normal((n, p))
    return Dataset(X, labels, C, np.ones(n, dtype=bool), labels)


# -- IDX ---------------------------------------------------------------------

def _read_bytes(path):
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _parse_idx(raw, magic, ndim, what):
    if len(raw) < 4:
        raise TruncatedFileError(f"{what} file is truncated (no header)")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise WrongMagicError(f"{what} file has magic 0x{found:08x}, expected 0x{magic:08x}")
    head = 4 + 4 * ndim
    if len(raw) < head:
        raise TruncatedFileError(f"{what} file header is truncated")
    dims = struct.unpack(">" + "I" * ndim, raw[4:head])
    size = int(np.prod(dims))
    if len(raw) - head < size:
        raise TruncatedFileError(f"{what} file holds {len(raw) - head} of {size} data bytes")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=head).reshape(dims)


def load_idx(image_path, label_path, num_classes=None):
    """MNIST-style IDX pair; pixels scaled to [0, 1] and flattened."""
    images = _parse_idx(_read_bytes(image_path), IDX_IMAGES_MAGIC, 3, "image")
    labels = _parse_idx(_read_bytes(label_path), IDX_LABELS_MAGIC, 1, "label")
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    X = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    y = labels.astype(np.int64)
    C = int(num_classes) if num_classes else int(y.max()) + 1
    return Dataset(X, y, C)


def write_idx(image_path, label_path, images, labels):
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(image_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(label_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


# -- binary feature / label files ---------------------------------------------

def write_features(path, features):
    X = np.asarray(features, dtype="<f4")
    n, p = X.shape
    with open(path, "wb") as fh:
        fh.write(b"AIRF" + struct.pack("<IQI", FORMAT_VERSION, n, p))
        fh.write(np.ascontiguousarray(X).tobytes())


def read_features(path):
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise TruncatedFileError("feature file is truncated")
    if raw[:4] != b"AIRF":
        raise WrongMagicError(f"feature file magic is {raw[:4]!r}, expected b'AIRF'")
    if len(raw) < 20:
        raise TruncatedFileError("feature file header is truncated")
    version, n, p = struct.unpack("<IQI", raw[4:20])
    if version != FORMAT_VERSION:
        raise HeaderMismatchError(f"unsupported feature file version {version}")
    need = n * p * 4
    if len(raw) - 20 < need:
        raise TruncatedFileError(f"feature file declares {n} x {p} values but holds fewer")
    if len(raw) - 20 > need:
        raise HeaderMismatchError("feature file has trailing bytes beyond the declared size")
    return np.frombuffer(raw, dtype="<f4", count=n * p, offset=20).reshape(n, p).astype(np.float64)


def write_labels(path, labels, num_classes):
    y = np.asarray(labels)
    multi = y.ndim == 2
    parts = [b"AIRL", struct.pack("<IQIB", FORMAT_VERSION, y.shape[0], int(num_classes), int(multi))]
    if multi:
        for row in y:
            idx = np.flatnonzero(row).astype("<u4")
            parts.append(struct.pack("<I", idx.size) + idx.tobytes())
    else:
        body = np.empty((y.shape[0], 2), dtype="<u4")
        body[:, 0] = 1
        body[:, 1] = y
        parts.append(body.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_labels(path):
    """Returns ``(labels, num_classes)``; labels are indices or an indicator matrix."""
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise TruncatedFileError("label file is truncated")
    if raw[:4] != b"AIRL":
        raise WrongMagicError(f"label file magic is {raw[:4]!r}, expected b'AIRL'")
    if len(raw) < 21:
        raise TruncatedFileError("label file header is truncated")
    version, n, C, multi = struct.unpack("<IQIB", raw[4:21])
    if version != FORMAT_VERSION:
        raise HeaderMismatchError(f"unsupported label file version {version}")
    body = np.frombuffer(raw, dtype="<u4", offset=21, count=(len(raw) - 21) // 4)
    if not multi:
        if body.size < 2 * n:
            raise TruncatedFileError(f"label file declares {n} labels but holds fewer")
        pairs = body[: 2 * n].reshape(n, 2)
        if np.any(pairs[:, 0] != 1):
            raise HeaderMismatchError("single-label file has a count other than 1")
        return pairs[:, 1].astype(np.int64), C
    out = np.zeros((n, C), dtype=bool)
    pos = 0
    for i in range(n):
        if pos >= body.size:
            raise TruncatedFileError(f"label file declares {n} examples but holds {i}")
        cnt = int(body[pos])
        if pos + 1 + cnt > body.size:
            raise TruncatedFileError(f"label file truncated inside example {i}")
        idx = body[pos + 1:pos + 1 + cnt]
        if np.any(idx >= C):
            raise ParseError(f"label index out of range in example {i}")
        out[i, idx] = True
        pos += 1 + cnt
    return out, C


def _read_csv_rows(path):
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]


def read_features_csv(path):
    rows = _read_csv_rows(path)
    if not rows:
        raise TruncatedFileError("feature CSV is empty")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"ragged row {i + 1}: {len(row)} cells, expected {width}")
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r} at row {i + 1}, column {j + 1}") from None
    return out


def read_labels_csv(path, num_classes=None):
    rows = _read_csv_rows(path)
    if not rows:
        raise TruncatedFileError("label CSV is empty")
    sets = []
    for i, row in enumerate(rows):
        if len(row) != 1:
            raise ParseError(f"label row {i + 1} must hold a single column")
        try:
            sets.append([int(tok) for tok in row[0].split(";") if tok.strip()])
        except ValueError:
            raise ParseError(f"non-integer label at row {i + 1}: {row[0]!r}") from None
    C = int(num_classes) if num_classes else max(max(s, default=0) for s in sets) + 1
    multi = any(";" in row[0] for row in rows)
    if not multi:
        if any(len(s) != 1 for s in sets):
            raise ParseError("single-label CSV rows must hold exactly one label")
        return np.array([s[0] for s in sets], dtype=np.int64), C
    out = np.zeros((len(sets), C), dtype=bool)
    for i, s in enumerate(sets):
        out[i, s] = True
    return out, C


def load_features(feature_path, label_path, format=None, num_classes=None):
    """Dataset from a feature file and a label file (``binary`` or ``csv``)."""
    if format is None:
        format = "csv" if str(feature_path).endswith(".csv") else "binary"
    if format == "binary":
        X = read_features(feature_path)
        y, C = read_labels(label_path)
        C = int(num_classes) if num_classes else C
    elif format == "csv":
        X = read_features_csv(feature_path)
        y, C = read_labels_csv(label_path, num_classes)
    else:
        raise InvalidInputError(f"unknown feature format {format!r}")
    if X.shape[0] != y.shape[0]:
        raise CountMismatchError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
    return Dataset(X, y, C)


# -- models ----------------------------------------------------------------------

def save_model(path, w):
    w = np.asarray(w)
    p, C = w.shape
    with open(path, "wb") as fh:
        fh.write(b"AIRW" + struct.pack("<III", FORMAT_VERSION, p, C))
        fh.write(np.asarray(w.T, dtype="<f4").tobytes())


def load_model(path):
    raw = _read_bytes(path)
    if raw[:4] != b"AIRW":
        raise WrongMagicError("model file magic mismatch")
    if len(raw) < 16:
        raise TruncatedFileError("model header is truncated")
    version, p, C = struct.unpack("<III", raw[4:16])
    if version != FORMAT_VERSION:
        raise HeaderMismatchError(f"unsupported model version {version}")
    if len(raw) - 16 != 4 * p * C:
        raise TruncatedFileError("model payload size does not match its header")
    return np.frombuffer(raw, dtype="<f4", offset=16).reshape(C, p).T.astype(np.float64)


# -- splitting -------------------------------------------------------------------

def split(data, test_fraction, seed):
    """Stratified, deterministic train/test split."""
    if not 0 < test_fraction < 1:
        raise InvalidInputError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    if data.multilabel:
        perm = rng.permutation(data.n)
        k = int(np.floor(test_fraction * data.n + 0.5))
        test = np.sort(perm[:k])
    else:
        y = data.eval_labels()
        picked = []
        for c in range(data.num_classes):
            members = np.flatnonzero(y == c)
            k = int(np.floor(test_fraction * members.size + 0.5))
            picked.append(rng.permutation(members)[:k])
        test = np.sort(np.concatenate(picked))
    mask = np.zeros(data.n, dtype=bool)
    mask[test] = True
    return data.subset(np.flatnonzero(~mask)), data.subset(test)
