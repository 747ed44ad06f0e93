"""Raster frames and the on-disk dataset layout.

A dataset directory holds ``index.json`` (schema ``gridrep-dataset/1``)
and one ``.f32`` file per frame: row-major little-endian float32, northmost
row first. An optional ``labels.csv`` sits next to the index.
"""

import json
import os
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

import numpy as np

from ..errors import FormatError, InvalidInputError

SCHEMA = "gridrep-dataset/1"
INDEX_NAME = "index.json"
LABELS_NAME = "labels.csv"


@dataclass(frozen=True)
class GridFrame:
    timestamp: str
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    values: np.ndarray  # (height, width) float32, northmost row first
    scaled: bool = False

    def __post_init__(self):
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise InvalidInputError(
                f"degenerate box lat [{self.lat_min}, {self.lat_max}] lon [{self.lon_min}, {self.lon_max}]")
        if self.values.ndim != 2 or self.values.size == 0:
            raise InvalidInputError(f"frame values must be a non-empty 2-D grid, got {self.values.shape}")

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    def grid(self):
        return {"lat_min": self.lat_min, "lat_max": self.lat_max, "lon_min": self.lon_min,
                "lon_max": self.lon_max, "height": self.height, "width": self.width}

    def with_values(self, values, **changes):
        return replace(self, values=np.ascontiguousarray(values, dtype=np.float32), **changes)


@dataclass(frozen=True)
class DatasetManifest:
    root: str
    grid: dict
    timestamps: tuple
    paths: tuple
    scaled: bool = True
    labels: str = None
    version: str = SCHEMA
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.timestamps)

    @property
    def resolution(self):
        return (self.grid["height"], self.grid["width"])


def parse_timestamp(ts):
    try:
        dt = datetime.strptime(ts, "%Y-%m-%dT%H:%M:%SZ")
    except (TypeError, ValueError) as exc:
        raise FormatError(f"timestamp {ts!r} is not ISO-8601 UTC (YYYY-MM-DDTHH:MM:SSZ)") from exc
    return dt.replace(tzinfo=timezone.utc)


def frame_filename(ts):
    return "frames/" + parse_timestamp(ts).strftime("%Y%m%dT%H%M%SZ") + ".f32"


def frame_bytes(values):
    return np.ascontiguousarray(values, dtype="<f4").tobytes()


def read_frame_file(path, height, width):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read frame file {path}: {exc.strerror}") from exc
    expected = 4 * height * width
    if len(blob) != expected:
        raise FormatError(f"{path}: {len(blob)} bytes, expected {expected} for {height}x{width}")
    return np.frombuffer(blob, dtype="<f4").astype(np.float32).reshape(height, width)


def _check_order(timestamps, source):
    prev = None
    for i, ts in enumerate(timestamps):
        t = parse_timestamp(ts)
        if prev is not None and t <= prev:
            raise FormatError(f"{source}: frame {i} ({ts}) is not after {timestamps[i - 1]}")
        prev = t


def write_dataset(root, frames, labels=None, extra=None):
    """Write ``frames`` (same grid, increasing timestamps) as a dataset directory."""
    frames = list(frames)
    if not frames:
        raise InvalidInputError("cannot write an empty dataset")
    grid = frames[0].grid()
    for f in frames:
        if f.grid() != grid:
            raise InvalidInputError(f"frame {f.timestamp} grid {f.grid()} differs from {grid}")
    timestamps = [f.timestamp for f in frames]
    _check_order(timestamps, root)
    os.makedirs(os.path.join(root, "frames"), exist_ok=True)
    paths = []
    for f in frames:
        rel = frame_filename(f.timestamp)
        with open(os.path.join(root, rel), "wb") as fh:
            fh.write(frame_bytes(f.values))
        paths.append(rel)
    index = {
        "format": SCHEMA,
        "grid": grid,
        "scaled": bool(frames[0].scaled),
        "frames": [{"timestamp": t, "path": p} for t, p in zip(timestamps, paths)],
    }
    if labels is not None:
        from .labels import write_labels
        write_labels(labels, os.path.join(root, LABELS_NAME))
        index["labels"] = LABELS_NAME
    if extra:
        index["extra"] = extra
    with open(os.path.join(root, INDEX_NAME), "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return load_manifest(root)


def load_manifest(path):
    """Read a dataset index (``path`` may be the directory or the index file)."""
    index_path = os.path.join(path, INDEX_NAME) if os.path.isdir(path) else path
    root = os.path.dirname(os.path.abspath(index_path))
    try:
        with open(index_path, encoding="utf-8") as fh:
            index = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read dataset index {index_path}: {exc.strerror}") from exc
    except ValueError as exc:
        raise FormatError(f"{index_path}: invalid JSON: {exc}") from exc
    if index.get("format") != SCHEMA:
        raise FormatError(f"{index_path}: format {index.get('format')!r}, expected {SCHEMA!r}")
    try:
        grid = {k: index["grid"][k] for k in
                ("lat_min", "lat_max", "lon_min", "lon_max", "height", "width")}
        entries = index["frames"]
        timestamps = tuple(e["timestamp"] for e in entries)
        paths = tuple(e["path"] for e in entries)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{index_path}: missing field {exc}") from exc
    _check_order(timestamps, index_path)
    return DatasetManifest(root, grid, timestamps, paths, bool(index.get("scaled", False)),
                           index.get("labels"), SCHEMA, index.get("extra", {}))


def load_frame(manifest, index):
    if not 0 <= index < len(manifest):
        raise InvalidInputError(f"frame index {index} out of range [0, {len(manifest)})")
    g = manifest.grid
    values = read_frame_file(os.path.join(manifest.root, manifest.paths[index]),
                             g["height"], g["width"])
    return GridFrame(manifest.timestamps[index], g["lat_min"], g["lat_max"], g["lon_min"],
                     g["lon_max"], values, manifest.scaled)


def iter_frames(manifest):
    for i in range(len(manifest)):
        yield load_frame(manifest, i)


def load_stack(manifest):
    """All frames as an ``(n, height, width)`` float64 array."""
    h, w = manifest.resolution
    out = np.empty((len(manifest), h, w))
    for i in range(len(manifest)):
        out[i] = load_frame(manifest, i).values
    return out
