"""Command-line entry point: ``gridrep <subcommand> [flags]``.

Exit codes: 0 success, 2 invalid configuration, 3 data error,
4 numerical failure.
"""

import argparse
import csv
import os
import sys

import numpy as np

from . import __version__, pca
from .cae import network as cae_net
from .classify import cross_validate, fit_logistic, significance_table, write_significance_csv
from .errors import DataError, InvalidInputError, NumericalError
from .ingest import features as feature_io
from .ingest.frames import iter_frames, load_manifest, write_dataset
from .ingest.labels import EVENTS, align_labels, load_labels
from .ingest.preprocess import bilinear_resize, crop_to_box, rescale_unit
from .ingest.synthetic import generate_synthetic
from .numerics import SeededRng
from .verify.metrics import scores, write_scores_csv
from . import pipeline

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _int_list(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _str_list(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _float_list(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _global_flags():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="64-bit seed (default 0)")
    g.add_argument("--out", default="out", help="output directory (default ./out)")
    g.add_argument("--resolution", type=int, default=None,
                   help="working resolution; frames are bilinearly resized if needed")
    g.add_argument("--latent-dim", type=_int_list, default=(64,), metavar="N[,N...]",
                   help="latent size(s) (default 64)")
    g.add_argument("--folds", type=int, default=10, help="cross-validation folds (default 10)")
    g.add_argument("--ridge", type=float, default=0.0, help="L2 penalty on GLM slopes (default 0)")
    g.add_argument("--methods", type=_str_list, default=("pca", "cae"),
                   help="comma-separated subset of pca,cae,imported (default pca,cae)")
    g.add_argument("--epochs", type=int, default=50, help="CAE epochs (default 50)")
    g.add_argument("--batch-size", type=int, default=32, help="CAE batch size (default 32)")
    g.add_argument("--learning-rate", type=float, default=1e-3, help="CAE learning rate")
    g.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    g.add_argument("--stratified", action="store_true", help="stratify CV folds by label")
    g.add_argument("--standardize", action="store_true",
                   help="z-score features before classification")
    return p


def _config(args, dataset=None, **overrides):
    values = dict(
        dataset=dataset or args.dataset, out=args.out, resolution=args.resolution,
        methods=args.methods, latent_dims=args.latent_dim, cv_folds=args.folds,
        ridge=args.ridge, seed=args.seed, labels=getattr(args, "labels", None),
        features=getattr(args, "features", None), stratified=args.stratified,
        standardize=args.standardize, cae_epochs=args.epochs, cae_batch=args.batch_size,
        cae_learning_rate=args.learning_rate, cae_optimizer=args.optimizer)
    values.update(overrides)
    return pipeline.ExperimentConfig(**values)


def cmd_gen_data(args):
    frames, labels = generate_synthetic(args.n_days, args.resolution or 64, args.seed)
    write_dataset(args.out, frames, labels, extra={"generator": "synthetic", "seed": args.seed})
    print(f"wrote {len(frames)} frames to {args.out}")


def cmd_preprocess(args):
    manifest = load_manifest(args.dataset)
    out_frames = []
    for frame in iter_frames(manifest):
        if args.crop:
            frame = crop_to_box(frame, *args.crop)
        if args.rescale:
            if frame.scaled:
                raise InvalidInputError(f"{args.dataset} is already rescaled")
            frame = rescale_unit(frame)
        if args.resolution:
            frame = bilinear_resize(frame, args.resolution, args.resolution)
        out_frames.append(frame)
    labels = None
    if manifest.labels:
        labels = load_labels(os.path.join(manifest.root, manifest.labels))
    write_dataset(args.out, out_frames, labels, extra=manifest.extra or None)
    print(f"wrote {len(out_frames)} preprocessed frames to {args.out}")


def cmd_fit_pca(args):
    cfg = _config(args, methods=("pca",))
    data = pipeline.load_data(cfg)
    model = pipeline.fit_pca_model(data.frames, cfg.latent_dims[0], cfg)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "pca.grpca")
    pca.save(model, path)
    print(f"wrote {path} (k={model.k}, D={model.n_features}, n={model.n_seen})")


def cmd_fit_cae(args):
    cfg = _config(args, methods=("cae",))
    data = pipeline.load_data(cfg)
    model, history = pipeline.fit_cae_model(data.frames, cfg.latent_dims[0], cfg)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "cae.grcae")
    cae_net.save(model, path)
    with open(os.path.join(args.out, "loss_history.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "rmse"])
        for i, v in enumerate(history):
            w.writerow([i, format(v, ".10g")])
    print(f"wrote {path} (final rmse {history[-1] if history else float('nan'):.4f})")


def _load_model(path):
    with open(path, "rb") as fh:
        magic = fh.read(6)
    if magic == pca.MAGIC:
        return "pca", pca.load(path)
    if magic == cae_net.MAGIC:
        return "cae", cae_net.load(path)
    raise DataError(f"{path}: not a PCA or CAE model file")


def cmd_extract(args):
    cfg = _config(args)
    data = pipeline.load_data(cfg)
    kind, model = _load_model(args.model)
    if kind == "pca":
        values = pca.transform(model, data.frames.reshape(data.frames.shape[0], -1))
    else:
        values = pipeline.encode_frames(model, data.frames)
    fs = feature_io.FeatureSet(kind, values, data.timestamps)
    _write_features(fs, args.out, kind)


def _write_features(fs, out, stem):
    os.makedirs(out, exist_ok=True)
    feature_io.export_features(fs, os.path.join(out, f"{stem}.grfea"))
    feature_io.export_features_csv(fs, os.path.join(out, f"{stem}.csv"))
    print(f"wrote {fs.values.shape[0]}x{fs.values.shape[1]} {fs.method} features to {out}")


def cmd_import_features(args):
    manifest = load_manifest(args.dataset)
    fs = feature_io.import_features(args.features, args.method_tag, manifest)
    _write_features(fs, args.out, args.method_tag)


def _features_and_labels(args):
    manifest = load_manifest(args.dataset)
    fs = feature_io.import_features(args.features, None, manifest)
    labels_path = args.labels or os.path.join(manifest.root, manifest.labels or "labels.csv")
    labels = align_labels(load_labels(labels_path), manifest.timestamps)
    return fs, labels


def cmd_classify(args):
    fs, labels = _features_and_labels(args)
    y = labels.event(args.event)
    fit = fit_logistic(fs.values, y, ridge=args.ridge)
    os.makedirs(args.out, exist_ok=True)
    sig_path = os.path.join(args.out, f"significance_{args.event}.csv")
    write_significance_csv(significance_table(fit), sig_path)
    cv = cross_validate(fs.values, y, k=args.folds, ridge=args.ridge,
                        rng=SeededRng(args.seed).child(100, EVENTS.index(args.event)),
                        stratified=args.stratified)
    write_scores_csv([(fs.method, args.event, scores(cv.pooled))],
                     os.path.join(args.out, f"scores_{args.event}.csv"))
    np.savetxt(os.path.join(args.out, f"probabilities_{args.event}.csv"), cv.probabilities,
               fmt="%.10g", header="probability", comments="")
    flag = "" if fit.converged else " (not converged)"
    print(f"wrote {sig_path}{flag}; pooled {cv.pooled}")


def cmd_evaluate(args):
    fs, labels = _features_and_labels(args)
    cfg = _config(args, methods=("imported",), features=args.features)
    entries = pipeline.evaluate_features(fs.values, labels, cfg, fs.method, fs.values.shape[1])
    os.makedirs(args.out, exist_ok=True)
    write_scores_csv([(e.method, e.event, e.scores) for e in entries],
                     os.path.join(args.out, "scores.csv"))
    pipeline._write_tables_csv(entries, os.path.join(args.out, "tables.csv"))
    print(f"wrote scores for {len(entries)} events to {args.out}")


def cmd_exp1(args):
    pipeline.run_experiment1(_config(args))
    print(f"experiment 1 written to {args.out}")


def cmd_exp2(args):
    low_res, high_res = args.low_resolution, args.high_resolution
    if high_res is None:
        high_res = args.resolution or load_manifest(args.dataset).resolution[1]
    if low_res is None and args.dataset_low is None:
        low_res = high_res // 2
    cfg_low = _config(args, dataset=args.dataset_low or args.dataset, resolution=low_res)
    cfg_high = _config(args, dataset=args.dataset, resolution=high_res)
    pipeline.run_experiment2(cfg_low, cfg_high, out=args.out)
    print(f"experiment 2 written to {args.out}")


def cmd_exp3(args):
    dims = args.latent_dim if args.latent_dim != (64,) else pipeline.DESK_SWEEP
    pipeline.run_experiment3(_config(args, latent_dims=dims))
    print(f"experiment 3 written to {args.out}")


def cmd_reconstruct(args):
    cfg = _config(args)
    pipeline.emit_reconstructions(cfg, args.cases)


def build_parser():
    parser = argparse.ArgumentParser(prog="gridrep", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gridrep {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _global_flags()

    def add(name, func, help_text, dataset=True):
        p = sub.add_parser(name, parents=[common], help=help_text)
        if dataset:
            p.add_argument("--dataset", required=True, help="dataset directory (index.json)")
        p.set_defaults(func=func)
        return p

    p = add("gen-data", cmd_gen_data, "generate a synthetic dataset", dataset=False)
    p.add_argument("--n-days", type=int, default=600)

    p = add("preprocess", cmd_preprocess, "crop / rescale / resize a dataset")
    p.add_argument("--crop", type=_float_list, metavar="LAT0,LAT1,LON0,LON1")
    p.add_argument("--rescale", action="store_true", help="divide raw 0-255 values by 255")

    add("fit-pca", cmd_fit_pca, "fit incremental PCA").add_argument("--labels")
    add("fit-cae", cmd_fit_cae, "train the convolutional autoencoder").add_argument("--labels")

    p = add("extract", cmd_extract, "extract features with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--labels")

    p = add("import-features", cmd_import_features, "validate and import external features")
    p.add_argument("--features", required=True)
    p.add_argument("--method-tag", default="imported")

    for name, func, text in (("classify", cmd_classify, "GLM significance table and CV for one event"),
                             ("evaluate", cmd_evaluate, "cross-validated scores for all events")):
        p = add(name, func, text)
        p.add_argument("--features", required=True)
        p.add_argument("--labels")
        if name == "classify":
            p.add_argument("--event", choices=EVENTS, default="SWF")

    for name, func, text in (("exp1", cmd_exp1, "baseline experiment"),
                             ("exp3", cmd_exp3, "latent-size sweep"),
                             ("reconstruct", cmd_reconstruct, "reconstruction images")):
        p = add(name, func, text)
        p.add_argument("--labels")
        p.add_argument("--features")
        if name == "reconstruct":
            p.add_argument("--cases", type=_str_list, required=True,
                           help="comma-separated frame timestamps")

    p = add("exp2", cmd_exp2, "low- vs high-resolution experiment")
    p.add_argument("--dataset-low", help="separate low-resolution dataset (default: resize --dataset)")
    p.add_argument("--low-resolution", type=int, default=None)
    p.add_argument("--high-resolution", type=int, default=None)
    p.add_argument("--labels")
    p.add_argument("--features")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except InvalidInputError as exc:
        print(f"gridrep: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"gridrep: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"gridrep: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
