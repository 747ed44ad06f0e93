import csv
import json
import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from gridrep import cli, pipeline
from gridrep.errors import AlignmentError, InvalidInputError
from gridrep.ingest.features import FeatureSet, export_features
from gridrep.ingest.frames import load_manifest
from gridrep.ingest.labels import EVENTS


def _cfg(dataset, out, **kw):
    base = dict(dataset=dataset, out=str(out), methods=("pca", "cae"), latent_dims=(8,),
                cv_folds=4, cae_epochs=1, cae_batch=16)
    base.update(kw)
    return pipeline.ExperimentConfig(**base)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_json_roundtrip(self):
        cfg = pipeline.ExperimentConfig("ds", latent_dims=[4, 8], methods=["pca"])
        assert pipeline.ExperimentConfig.from_json(cfg.to_json()) == cfg

    @pytest.mark.parametrize("kw", [dict(methods=("svd",)), dict(cv_folds=1), dict(ridge=-1),
                                    dict(resolution=100), dict(methods=("imported",)),
                                    dict(latent_dims=(0,))])
    def test_invalid(self, kw):
        with pytest.raises(InvalidInputError):
            pipeline.ExperimentConfig("ds", **kw)

    def test_unknown_json_key(self):
        with pytest.raises(InvalidInputError):
            pipeline.ExperimentConfig.from_json('{"dataset": "d", "colour": 1}')


class TestExperiment1:
    def test_outputs(self, small_dataset, tmp_path):
        report = pipeline.run_experiment1(_cfg(small_dataset, tmp_path), log=lambda *_: None)
        assert len(report.entries) == 10
        rows = _rows(tmp_path / "scores.csv")
        assert [(r["method"], r["event"]) for r in rows] == [
            (m, e) for m in ("pca", "cae") for e in EVENTS]
        tables = _rows(tmp_path / "tables.csv")
        for t in tables:
            total = sum(int(t[k]) for k in ("hits", "false_alarms", "misses", "correct_negatives"))
            assert total == 40
        svg = ET.parse(tmp_path / "performance_diagram.svg").getroot()
        points = [el for el in svg.iter() if el.get("id", "").startswith("point-")]
        assert len(points) == 10
        assert json.loads((tmp_path / "config.json").read_text())["latent_dims"] == [8]
        assert {r["method"] for r in _rows(tmp_path / "timings.csv")} == {"pca", "cae"}

    def test_deterministic(self, small_dataset, tmp_path):
        for name in ("a", "b"):
            pipeline.run_experiment1(_cfg(small_dataset, tmp_path / name), log=lambda *_: None)
        for f in ("scores.csv", "tables.csv", "performance_diagram.svg"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_imported_features(self, small_dataset, tmp_path):
        n = len(load_manifest(small_dataset))
        feats = np.random.default_rng(0).normal(size=(n, 3))
        export_features(FeatureSet("pt", feats), tmp_path / "f.grfea")
        cfg = _cfg(small_dataset, tmp_path / "o", methods=("imported",),
                   features=str(tmp_path / "f.grfea"))
        report = pipeline.run_experiment1(cfg, log=lambda *_: None)
        assert {e.method for e in report.entries} == {"imported"}

    def test_resized_run(self, small_dataset, tmp_path):
        data = pipeline.load_data(_cfg(small_dataset, tmp_path, resolution=128))
        assert data.frames.shape == (40, 128, 128)
        assert data.frames.min() >= 0 and data.frames.max() <= 1


class TestExperiment2:
    def test_deltas(self, dataset_128, tmp_path):
        cfg_high = _cfg(dataset_128, tmp_path, methods=("pca",))
        low, high, rows = pipeline.run_experiment2(cfg_high.replace(resolution=64), cfg_high,
                                                   log=lambda *_: None)
        delta = _rows(tmp_path / "delta.csv")
        assert len(delta) == 1 * 5
        for r in delta:
            h = high.entry(r["method"], r["event"]).scores
            lo = low.entry(r["method"], r["event"]).scores
            for metric in ("pod", "far", "sr", "bias", "csi"):
                hv, lv = getattr(h, metric), getattr(lo, metric)
                if hv is None or lv is None:
                    assert r[f"delta_{metric}"] == "NA"
                else:
                    assert float(r[f"delta_{metric}"]) == pytest.approx(hv - lv, abs=1e-9)
            assert r["improved_csi"] == str(int(float(r["delta_csi"]) > 0))
        assert (tmp_path / "delta_chart.svg").exists()

    def test_identical_inputs_give_zero_deltas(self, small_dataset, tmp_path):
        cfg = _cfg(small_dataset, tmp_path, methods=("pca",))
        _, _, rows = pipeline.run_experiment2(cfg, cfg, log=lambda *_: None)
        assert len(rows) == 5
        for _, _, deltas in rows:
            assert all(d.delta in (0, None) and not d.improved for d in deltas.values())

    def test_mismatched_timestamps(self, small_dataset, dataset_128, tmp_path):
        with pytest.raises(AlignmentError):
            pipeline.run_experiment2(_cfg(small_dataset, tmp_path), _cfg(dataset_128, tmp_path),
                                     log=lambda *_: None)


class TestExperiment3:
    def test_sweep(self, small_dataset, tmp_path):
        cfg = _cfg(small_dataset, tmp_path, latent_dims=(4, 8, 16))
        report = pipeline.run_experiment3(cfg, log=lambda *_: None)
        rows = _rows(tmp_path / "scores.csv")
        assert len(rows) == 2 * 3 * 5
        assert {r["latent_dim"] for r in rows} == {"4", "8", "16"}
        rmse = [float(r["rmse"]) for r in _rows(tmp_path / "pca_reconstruction_rmse.csv")]
        assert rmse == sorted(rmse, reverse=True)
        for ev in EVENTS:
            assert (tmp_path / f"sweep_{ev}.svg").exists()
        assert len(report.timings) == 6

    def test_rejects_non_power_of_two(self, small_dataset, tmp_path):
        with pytest.raises(InvalidInputError):
            pipeline.run_experiment3(_cfg(small_dataset, tmp_path, latent_dims=(6,)))


def test_config_echo_roundtrips(small_dataset, tmp_path):
    cfg = _cfg(small_dataset, tmp_path, methods=("pca",))
    pipeline.run_experiment1(cfg, log=lambda *_: None)
    echoed = pipeline.ExperimentConfig.from_json((tmp_path / "config.json").read_text())
    assert echoed == cfg


def test_reconstructions(small_dataset, tmp_path):
    cases = list(load_manifest(small_dataset).timestamps[:2])
    cfg = _cfg(small_dataset, tmp_path, latent_dims=(39,))
    pipeline.emit_reconstructions(cfg, cases, log=lambda *_: None)
    pgms = sorted(p for p in os.listdir(tmp_path) if p.endswith(".pgm"))
    assert len(pgms) == 3 * len(cases)
    original = pipeline.read_pgm(tmp_path / pgms[1])
    # 40 frames: 39 components reconstruct the data exactly
    assert np.array_equal(pipeline.read_pgm(tmp_path / pgms[2]), original)
    assert (tmp_path / "reconstructions.svg").exists()


def test_pgm_roundtrip(tmp_path):
    img = np.linspace(0, 1, 12).reshape(3, 4)
    pipeline.write_pgm(img, tmp_path / "x.pgm")
    back = pipeline.read_pgm(tmp_path / "x.pgm")
    assert back.shape == (3, 4)
    assert np.abs(back / 255.0 - img).max() <= 0.5 / 255 + 1e-12


class TestCli:
    def test_generate_and_run(self, tmp_path, capsys):
        ds = str(tmp_path / "ds")
        assert cli.main(["gen-data", "--n-days", "24", "--seed", "2", "--out", ds]) == 0
        out = str(tmp_path / "x1")
        assert cli.main(["exp1", "--dataset", ds, "--methods", "pca", "--latent-dim", "4",
                         "--folds", "3", "--out", out]) == 0
        assert os.path.exists(os.path.join(out, "scores.csv"))

    def test_model_extract_classify(self, small_dataset, tmp_path):
        m, f, c = (str(tmp_path / n) for n in "mfc")
        assert cli.main(["fit-pca", "--dataset", small_dataset, "--latent-dim", "4", "--out", m]) == 0
        assert cli.main(["extract", "--dataset", small_dataset, "--model", f"{m}/pca.grpca",
                         "--out", f]) == 0
        assert cli.main(["classify", "--dataset", small_dataset, "--features", f"{f}/pca.grfea",
                         "--event", "NWPTC", "--folds", "4", "--out", c]) == 0
        rows = _rows(os.path.join(c, "significance_NWPTC.csv"))
        assert len(rows) == 4
        for r in rows:
            assert float(r["z"]) == pytest.approx(float(r["coefficient"]) / float(r["std_error"]))

    def test_exit_codes(self, small_dataset, tmp_path):
        assert cli.main(["exp1", "--dataset", small_dataset, "--folds", "1", "--out",
                         str(tmp_path)]) == cli.EXIT_CONFIG
        assert cli.main(["exp1", "--dataset", str(tmp_path / "missing"), "--out",
                         str(tmp_path)]) == cli.EXIT_DATA
        bad = tmp_path / "bad.grfea"
        bad.write_bytes(b"nonsense")
        assert cli.main(["evaluate", "--dataset", small_dataset, "--features", str(bad),
                         "--out", str(tmp_path)]) == cli.EXIT_DATA
        with pytest.raises(SystemExit) as info:
            cli.main(["exp1"])
        assert info.value.code == 2

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_numerical_failure_exit_code(self, small_dataset, tmp_path):
        code = cli.main(["fit-cae", "--dataset", small_dataset, "--latent-dim", "4",
                         "--epochs", "3", "--optimizer", "sgd", "--learning-rate", "1e300",
                         "--out", str(tmp_path)])
        assert code == cli.EXIT_NUMERIC
