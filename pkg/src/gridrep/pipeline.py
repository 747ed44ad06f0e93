"""End-to-end experiments: learn features, cross-validate every event, report.

Features are learned once per (method, latent size), without labels, and
the same matrix is reused for all five events. Fold assignments depend
only on the seed and the event, so every method is scored on identical
splits.
"""

import csv
import json
import os
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__, pca
from .cae import network as cae_net
from .cae.training import TrainConfig, train
from .classify import cross_validate
from .errors import AlignmentError, InvalidInputError
from .ingest import features as feature_io
from .ingest.frames import load_manifest, load_stack
from .ingest.labels import EVENTS, align_labels, load_labels
from .ingest.preprocess import resize_array
from .numerics import SeededRng
from .verify import charts
from .verify.metrics import (METRICS, ContingencyTable, delta_scores, format_value, scores,
                             write_scores_csv)

METHODS = ("pca", "cae", "imported")
RESOLUTIONS = (64, 128, 256, 512)
DESK_SWEEP = (4, 8, 16, 32, 64, 128)
SWEEP_CEILING = 2048


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    out: str = "out"
    resolution: int = None  # None keeps the dataset's own grid
    methods: tuple = ("pca", "cae")
    latent_dims: tuple = (64,)
    cv_folds: int = 10
    ridge: float = 0.0
    seed: int = 0
    labels: str = None  # defaults to the dataset's labels.csv
    features: str = None  # feature file for the "imported" method
    stratified: bool = False
    standardize: bool = False
    threshold: float = 0.5
    pca_batch: int = pca.DEFAULT_BATCH_SIZE
    pca_solver: str = "full"
    cae_epochs: int = 50
    cae_batch: int = 32
    cae_learning_rate: float = 1e-3
    cae_optimizer: str = "adam"

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "latent_dims", tuple(int(d) for d in self.latent_dims))
        if not self.methods:
            raise InvalidInputError("at least one method is required")
        for m in self.methods:
            if m not in METHODS:
                raise InvalidInputError(f"unknown method {m!r}; choose from {METHODS}")
        if not self.latent_dims or min(self.latent_dims) < 1:
            raise InvalidInputError("latent_dims must be a non-empty list of positive sizes")
        if self.resolution is not None:
            if self.resolution not in RESOLUTIONS:
                raise InvalidInputError(f"resolution must be one of {RESOLUTIONS}")
            if max(self.latent_dims) > self.resolution ** 2:
                raise InvalidInputError("latent size exceeds the number of pixels")
        if self.cv_folds < 2:
            raise InvalidInputError("cv_folds must be >= 2")
        if self.ridge < 0:
            raise InvalidInputError("ridge must be non-negative")
        if "imported" in self.methods and not self.features:
            raise InvalidInputError("method 'imported' needs a feature file (--features)")

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidInputError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    def replace(self, **changes):
        data = asdict(self)
        data.update(changes)
        return ExperimentConfig(**data)


@dataclass
class ReportEntry:
    method: str
    event: str
    latent_dim: int
    table: ContingencyTable
    scores: object
    degenerate_folds: tuple = ()


@dataclass
class RunReport:
    config: ExperimentConfig
    entries: list = field(default_factory=list)
    timings: list = field(default_factory=list)  # (method, latent_dim, seconds, storage bytes)
    version: str = __version__
    extras: dict = field(default_factory=dict)

    def entry(self, method, event, latent_dim=None):
        for e in self.entries:
            if e.method == method and e.event == event and latent_dim in (None, e.latent_dim):
                return e
        raise KeyError((method, event, latent_dim))


@dataclass
class LoadedData:
    timestamps: tuple
    frames: np.ndarray  # (n, H, W) float64 in [0, 1]
    labels: object
    manifest: object


def load_data(cfg):
    """Load frames at the configured resolution plus labels aligned to them."""
    manifest = load_manifest(cfg.dataset)
    labels_path = cfg.labels or (os.path.join(manifest.root, manifest.labels)
                                 if manifest.labels else None)
    if labels_path is None:
        raise AlignmentError(f"dataset {cfg.dataset} has no labels and none were given")
    labels = align_labels(load_labels(labels_path), manifest.timestamps)
    stack = load_stack(manifest)
    if not manifest.scaled:
        raise InvalidInputError(f"dataset {cfg.dataset} is not rescaled to [0, 1]; run preprocess")
    res = cfg.resolution
    if res is not None and stack.shape[1:] != (res, res):
        stack = np.stack([resize_array(f, res, res) for f in stack])
    return LoadedData(tuple(manifest.timestamps), stack, labels, manifest)


def _flatten(frames):
    return frames.reshape(frames.shape[0], -1)


def fit_pca_model(frames, k, cfg):
    x = _flatten(frames)
    if k > min(x.shape):
        raise InvalidInputError(f"PCA latent size {k} exceeds min(n, D) = {min(x.shape)}")
    batch = max(cfg.pca_batch, k)
    model = None
    for start in range(0, x.shape[0], batch):
        model = pca.partial_fit(model, x[start:start + batch], k=k, solver=cfg.pca_solver,
                                rng=SeededRng(cfg.seed).child(1))
    return model


def fit_cae_model(frames, k, cfg):
    arch = cae_net.build_architecture(frames.shape[1], k)
    tcfg = TrainConfig(learning_rate=cfg.cae_learning_rate, epochs=cfg.cae_epochs,
                       batch_size=cfg.cae_batch, seed=cfg.seed, optimizer=cfg.cae_optimizer)
    model, history = train(frames, arch, tcfg)
    return model, history


def encode_frames(model, frames, chunk=64):
    out = [cae_net.encode(model, frames[i:i + chunk]) for i in range(0, frames.shape[0], chunk)]
    return np.vstack(out)


def learn_features(method, data, k, cfg):
    """Returns ``(features, model, seconds, storage_bytes)``."""
    if method == "pca":
        t0 = time.perf_counter()
        model = fit_pca_model(data.frames, k, cfg)
        seconds = time.perf_counter() - t0
        return pca.transform(model, _flatten(data.frames)), model, seconds, len(pca.to_bytes(model))
    if method == "cae":
        t0 = time.perf_counter()
        model, _ = fit_cae_model(data.frames, k, cfg)
        seconds = time.perf_counter() - t0
        return encode_frames(model, data.frames), model, seconds, len(cae_net.to_bytes(model))
    fs = feature_io.import_features(cfg.features, "imported", data.manifest)
    return fs.values, None, 0.0, os.path.getsize(cfg.features)


def _standardize(x):
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    return (x - x.mean(axis=0)) / sd


def evaluate_features(feats, labels, cfg, method, latent_dim):
    """Cross-validate all five events on one feature matrix."""
    x = _standardize(feats) if cfg.standardize else feats
    entries = []
    for j, event in enumerate(EVENTS):
        y = labels.event(event)
        cv = cross_validate(x, y, k=cfg.cv_folds, ridge=cfg.ridge,
                            rng=SeededRng(cfg.seed).child(100, j), threshold=cfg.threshold,
                            stratified=cfg.stratified)
        entries.append(ReportEntry(method, event, latent_dim, cv.pooled, scores(cv.pooled),
                                   cv.degenerate_folds))
    return entries


def _write_tables_csv(entries, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "event", "latent_dim", "hits", "false_alarms", "misses",
                    "correct_negatives", "degenerate_folds"])
        for e in entries:
            w.writerow([e.method, e.event, e.latent_dim, *e.table.as_tuple(),
                        ";".join(str(f) for f in e.degenerate_folds)])


def _write_timings_csv(timings, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "latent_dim", "learn_seconds", "storage_bytes"])
        for method, dim, seconds, size in timings:
            w.writerow([method, dim, f"{seconds:.3f}", size])


def diagram_points(entries):
    return [charts.DiagramPoint(e.scores.sr, e.scores.pod, e.event, e.method)
            for e in entries if e.scores.sr is not None and e.scores.pod is not None]


def emit_report(report, out_dir, sweep=False):
    """Write scores.csv, tables.csv, timings.csv and config.json into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    if sweep:
        rows = [(e.method, e.event, e.scores, e.latent_dim) for e in report.entries]
        write_scores_csv(rows, os.path.join(out_dir, "scores.csv"), extra_columns=("latent_dim",))
    else:
        rows = [(e.method, e.event, e.scores) for e in report.entries]
        write_scores_csv(rows, os.path.join(out_dir, "scores.csv"))
    _write_tables_csv(report.entries, os.path.join(out_dir, "tables.csv"))
    # one row per method: the learning cost of its largest latent size
    per_method = {}
    for method, dim, seconds, size in report.timings:
        if method not in per_method or dim >= per_method[method][1]:
            per_method[method] = (method, dim, seconds, size)
    _write_timings_csv(list(per_method.values()), os.path.join(out_dir, "timings.csv"))
    if sweep:
        _write_timings_csv(report.timings, os.path.join(out_dir, "timings_by_dim.csv"))
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        fh.write(report.config.to_json())
    with open(os.path.join(out_dir, "version.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.version + "\n")
    return out_dir


def run_experiment1(cfg, log=print):
    """Baseline: one latent size, every method, every event, performance diagram."""
    data = load_data(cfg)
    k = cfg.latent_dims[0]
    report = RunReport(cfg)
    for method in cfg.methods:
        feats, _, seconds, size = learn_features(method, data, k, cfg)
        log(f"{method}: learned {feats.shape[1]} features in {seconds:.1f}s")
        report.timings.append((method, k, seconds, size))
        report.entries.extend(evaluate_features(feats, data.labels, cfg, method, k))
    emit_report(report, cfg.out)
    charts.render_performance_diagram(
        diagram_points(report.entries), os.path.join(cfg.out, "performance_diagram.svg"),
        title=f"Experiment 1 ({data.frames.shape[1]}x{data.frames.shape[2]}, d={k})")
    return report


def run_experiment2(cfg_low, cfg_high, out=None, log=print):
    """Run the baseline at two resolutions and report high-minus-low deltas."""
    out = out or cfg_high.out
    low_ts = load_manifest(cfg_low.dataset).timestamps
    high_ts = load_manifest(cfg_high.dataset).timestamps
    if tuple(low_ts) != tuple(high_ts):
        raise AlignmentError("low- and high-resolution datasets cover different timestamps")
    low = run_experiment1(cfg_low.replace(out=os.path.join(out, "low")), log=log)
    high = run_experiment1(cfg_high.replace(out=os.path.join(out, "high")), log=log)
    rows = []
    for e in high.entries:
        base = low.entry(e.method, e.event)
        rows.append((e.method, e.event, delta_scores(e.scores, base.scores)))
    with open(os.path.join(out, "delta.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        # one row per (method, event): high-minus-low delta and improvement flag per metric
        w.writerow(["method", "event", *(f"delta_{m}" for m in METRICS),
                    *(f"improved_{m}" for m in METRICS)])
        for method, event, deltas in rows:
            w.writerow([method, event, *(format_value(deltas[m].delta) for m in METRICS),
                        *(int(deltas[m].improved) for m in METRICS)])
    charts.render_delta_chart(rows, os.path.join(out, "delta_chart.svg"))
    return low, high, rows


def run_experiment3(cfg, log=print):
    """Sweep latent sizes for PCA and CAE; charts per event and PCA RMSE table."""
    if "imported" in cfg.methods:
        raise InvalidInputError(
            "imported features have a fixed length and cannot take part in the latent-size sweep")
    dims = sorted(set(cfg.latent_dims))
    for d in dims:
        if d & (d - 1) or d > SWEEP_CEILING:
            raise InvalidInputError(f"latent sizes must be powers of two up to {SWEEP_CEILING}, got {d}")
    data = load_data(cfg)
    report = RunReport(cfg)
    x = _flatten(data.frames)
    if "pca" in cfg.methods:
        t0 = time.perf_counter()
        full = fit_pca_model(data.frames, dims[-1], cfg)
        seconds = time.perf_counter() - t0
        rmse_rows = []
        for d in dims:
            model = full.truncate(d)
            report.timings.append(("pca", d, seconds, len(pca.to_bytes(model))))
            report.entries.extend(evaluate_features(pca.transform(model, x), data.labels, cfg,
                                                    "pca", d))
            rmse_rows.append((d, pca.reconstruction_rmse(model, x)))
        report.extras["pca_rmse"] = rmse_rows
        log(f"pca: swept {dims} in {seconds:.1f}s")
    if "cae" in cfg.methods:
        for d in dims:
            feats, _, seconds, size = learn_features("cae", data, d, cfg)
            report.timings.append(("cae", d, seconds, size))
            report.entries.extend(evaluate_features(feats, data.labels, cfg, "cae", d))
            log(f"cae: d={d} learned in {seconds:.1f}s")
    emit_report(report, cfg.out, sweep=True)
    if "pca_rmse" in report.extras:
        with open(os.path.join(cfg.out, "pca_reconstruction_rmse.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["latent_dim", "rmse"])
            for d, r in report.extras["pca_rmse"]:
                w.writerow([d, format(r, ".10g")])
    methods = [m for m in cfg.methods if m in ("pca", "cae")]
    for event in EVENTS:
        series = {}
        for m in methods:
            picked = [report.entry(m, event, d).scores for d in dims]
            series[m] = {metric: [getattr(s, metric) for s in picked] for metric in ("csi", "pod", "far")}
        charts.render_sweep_chart(dims, series, os.path.join(cfg.out, f"sweep_{event}.svg"),
                                  title=f"Experiment 3: {event}")
    return report


def write_pgm(image, path):
    """8-bit binary PGM; values in [0, 1] map linearly to 0-255."""
    img = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    data = np.rint(img * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (data.shape[1], data.shape[0]))
        fh.write(data.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    parts = blob.split(b"\n", 3)
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def emit_reconstructions(cfg, case_timestamps, out=None, log=print):
    """Original, PCA and CAE reconstructions for selected frames (PGM + SVG montage)."""
    out = out or cfg.out
    data = load_data(cfg)
    index = {ts: i for i, ts in enumerate(data.timestamps)}
    missing = [ts for ts in case_timestamps if ts not in index]
    if missing:
        raise InvalidInputError(f"unknown timestamps {missing}")
    k = cfg.latent_dims[0]
    pca_model = fit_pca_model(data.frames, k, cfg)
    cae_model, _ = fit_cae_model(data.frames, k, cfg)
    os.makedirs(out, exist_ok=True)
    h, w = data.frames.shape[1:]
    written, montage = [], []
    for ts in case_timestamps:
        frame = data.frames[index[ts]]
        recon_pca = pca.inverse_transform(pca_model, pca.transform(pca_model, frame.reshape(1, -1)))
        recon_cae = cae_net.reconstruct(cae_model, frame[None, None])
        panels = [("original", frame), ("PCA", recon_pca.reshape(h, w)),
                  ("CAE", recon_cae.reshape(h, w))]
        stem = ts.replace(":", "").replace("-", "")
        for name, img in panels:
            path = os.path.join(out, f"{stem}_{name.lower()}.pgm")
            write_pgm(img, path)
            written.append(path)
        montage.append((ts, panels))
    charts.render_reconstruction_montage(montage, os.path.join(out, "reconstructions.svg"),
                                         title=f"Reconstructions (d={k})")
    log(f"wrote {len(written)} images to {out}")
    return written
