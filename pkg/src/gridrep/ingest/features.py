"""Feature matrices exchanged with external extractors.

Binary layout: ``GRFEA1``, u64 n, u64 d, u64 tag length, UTF-8 method tag,
then ``n*d`` little-endian float64 values, row-major. A CSV mirror carries
the timestamp as its first column.
"""

import csv
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import AlignmentError, FormatError, InvalidInputError

MAGIC = b"GRFEA1"


@dataclass(frozen=True)
class FeatureSet:
    method: str
    values: np.ndarray  # (n, d) float64
    timestamps: tuple = ()

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] < 1:
            raise InvalidInputError(f"features must be (n, d>0), got {self.values.shape}")
        if self.timestamps and len(self.timestamps) != self.values.shape[0]:
            raise AlignmentError(
                f"{self.values.shape[0]} feature rows but {len(self.timestamps)} timestamps")


def to_bytes(fs):
    tag = fs.method.encode("utf-8")
    n, d = fs.values.shape
    return (MAGIC + struct.pack("<QQQ", n, d, len(tag)) + tag
            + np.ascontiguousarray(fs.values, dtype="<f8").tobytes())


def from_bytes(blob, source="<bytes>", timestamps=()):
    if blob[:6] != MAGIC:
        raise FormatError(f"{source}: bad magic {blob[:6]!r}, expected {MAGIC!r}")
    if len(blob) < 30:
        raise FormatError(f"{source}: truncated header")
    n, d, tag_len = struct.unpack_from("<QQQ", blob, 6)
    start = 30 + tag_len
    if len(blob) != start + 8 * n * d:
        raise FormatError(f"{source}: payload is {len(blob) - start} bytes, header says {n}x{d}")
    tag = blob[30:start].decode("utf-8")
    values = np.frombuffer(blob, "<f8", n * d, start).astype(np.float64).reshape(n, d)
    return FeatureSet(tag, values, tuple(timestamps))


def export_features(fs, path):
    with open(path, "wb") as fh:
        fh.write(to_bytes(fs))


def import_features(path, method_tag=None, manifest=None):
    """Read a feature file, optionally re-tagging it and aligning it to a dataset.

    With ``manifest`` the row count must equal the number of frames and the
    frame timestamps are attached to the returned set. CSV files (header
    starting ``timestamp``) are accepted too; any timestamps they carry must
    match the dataset's.
    """
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
    if head != MAGIC and head.startswith(b"timest"):
        fs = import_features_csv(path, method_tag or "imported")
        if manifest is not None and fs.timestamps and tuple(fs.timestamps) != tuple(manifest.timestamps):
            raise AlignmentError(f"{path}: timestamps do not match the dataset frames")
    else:
        with open(path, "rb") as fh:
            fs = from_bytes(fh.read(), str(path))
    timestamps = ()
    if manifest is not None:
        if fs.values.shape[0] != len(manifest):
            raise AlignmentError(
                f"{path}: {fs.values.shape[0]} feature rows, dataset has {len(manifest)} frames")
        timestamps = tuple(manifest.timestamps)
    return FeatureSet(method_tag or fs.method, fs.values, timestamps)


def export_features_csv(fs, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp"] + [f"f{j}" for j in range(fs.values.shape[1])])
        stamps = fs.timestamps or [""] * fs.values.shape[0]
        for ts, row in zip(stamps, fs.values):
            writer.writerow([ts] + [repr(float(v)) for v in row])


def import_features_csv(path, method_tag):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        stamps, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} fields")
            stamps.append(row[0])
            rows.append([float(v) for v in row[1:]])
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 1)
    return FeatureSet(method_tag, values, tuple(stamps) if all(stamps) else ())
