import xml.etree.ElementTree as ET
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gridrep.errors import InvalidInputError
from gridrep.verify import charts
from gridrep.verify.metrics import (ContingencyTable, Scores, delta_scores, read_scores_csv,
                                    scores, sum_tables, tabulate, write_scores_csv)

SVG = "{http://www.w3.org/2000/svg}"


def test_hand_case():
    s = scores(ContingencyTable(40, 20, 10, 30))
    assert s.pod == pytest.approx(0.8, abs=1e-12)
    assert s.far == pytest.approx(1 / 3, abs=1e-12)
    assert s.sr == pytest.approx(2 / 3, abs=1e-12)
    assert s.bias == pytest.approx(1.2, abs=1e-12)
    assert s.csi == pytest.approx(4 / 7, abs=1e-12)


def test_zero_denominators_are_na():
    s = scores(ContingencyTable(0, 0, 0, 10))
    assert s == Scores(None, None, None, None, None)
    s = scores(ContingencyTable(0, 5, 0, 5))
    assert s.pod is None and s.far == 1.0 and s.sr == 0.0 and s.csi == 0.0


@given(st.lists(st.booleans(), min_size=1, max_size=300))
def test_always_yes_csi_is_frequency(obs):
    obs = np.array(obs, dtype=int)
    s = scores(tabulate(np.ones_like(obs), obs))
    freq = obs.mean()
    if freq == 0:
        assert s.csi == 0.0
    else:
        assert abs(s.csi - freq) < 1e-12
        assert s.pod == 1.0


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_score_identities(a, b, c, d):
    s = scores(ContingencyTable(a, b, c, d))
    if a + b:
        assert s.far + s.sr == pytest.approx(1.0)
    if a + c and a + b and a:
        # 1/CSI = 1/POD + 1/SR - 1
        assert Fraction(a + b + c, a) == Fraction(a + c, a) + Fraction(a + b, a) - 1
        assert s.csi == pytest.approx(1 / (1 / s.pod + 1 / s.sr - 1))
    if a + c:
        assert s.bias == pytest.approx(s.pod / s.sr if a else (a + b) / (a + c))


def test_tabulate_hand_cases():
    assert tabulate([1, 0, 1], [1, 0, 1]).as_tuple() == (2, 0, 0, 1)
    assert tabulate([1] * 10, [1, 0] * 5).as_tuple() == (5, 5, 0, 0)
    assert tabulate([], []).as_tuple() == (0, 0, 0, 0)


def test_perfect_forecast():
    assert scores(ContingencyTable(7, 0, 0, 3)) == Scores(1.0, 0.0, 1.0, 1.0, 1.0)


def test_tabulate_and_pooling():
    t1 = tabulate([1, 1, 0, 0], [1, 0, 1, 0])
    assert t1.as_tuple() == (1, 1, 1, 1)
    assert sum_tables([t1, t1]).as_tuple() == (2, 2, 2, 2)
    with pytest.raises(InvalidInputError):
        tabulate([1, 2], [1, 0])
    with pytest.raises(InvalidInputError):
        tabulate([1], [1, 0])


def test_delta_flags():
    high = Scores(pod=0.9, far=0.1, sr=0.9, bias=1.1, csi=0.8)
    low = Scores(pod=0.8, far=0.2, sr=0.8, bias=0.7, csi=0.7)
    d = delta_scores(high, low)
    assert all(d[m].improved for m in ("pod", "far", "sr", "bias", "csi"))
    assert d["far"].delta == pytest.approx(-0.1)
    d = delta_scores(Scores(pod=None), low)
    assert d["pod"].delta is None and not d["pod"].improved


def test_delta_examples():
    same = Scores(0.5, 0.5, 0.5, 1.0, 0.4)
    d = delta_scores(same, same)
    assert all(v.delta == 0 and not v.improved for v in d.values())
    low = Scores(0.6, 0.3, 0.7, 0.9, 0.5)
    high = Scores(0.6, 0.28, 0.72, 0.9, 0.55)
    d = delta_scores(high, low)
    assert d["csi"].improved and d["far"].improved and not d["pod"].improved


def test_scores_csv_roundtrip(tmp_path):
    rows = [("pca", "FT", scores(ContingencyTable(40, 20, 10, 30))),
            ("cae", "NE", Scores())]
    path = tmp_path / "s.csv"
    write_scores_csv(rows, path)
    text = path.read_text()
    assert text.splitlines()[0] == "method,event,pod,far,sr,bias,csi"
    assert "cae,NE,NA,NA,NA,NA,NA" in text
    back = read_scores_csv(path)
    assert back[1][2] == Scores()
    assert back[0][2].csi == pytest.approx(4 / 7, rel=1e-9)


def _points():
    return [charts.DiagramPoint(0.1 + 0.08 * i, 0.9 - 0.08 * i, ev, m)
            for i, (m, ev) in enumerate((m, e) for m in ("pca", "cae")
                                        for e in ("FT", "NE", "SWF", "HR", "NWPTC"))]


class TestCharts:
    def test_performance_diagram_structure(self, tmp_path):
        out = tmp_path / "pd.svg"
        charts.render_performance_diagram(_points(), out)
        root = ET.parse(out).getroot()
        ids = {el.get("id") for el in root.iter() if el.get("id")}
        assert sum(i.startswith("point-") for i in ids) == 10
        assert "csi-contours" in ids
        assert sum(i.startswith("bias-") for i in ids) == len(charts.BIAS_LEVELS)
        assert root.get("width") == "800pt"

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        charts.render_performance_diagram(_points(), a)
        charts.render_performance_diagram(_points(), b)
        assert a.read_bytes() == b.read_bytes()

    def test_point_coordinates(self, tmp_path):
        import matplotlib.pyplot as plt
        points = [charts.DiagramPoint(1.0, 1.0, "FT", "pca"), charts.DiagramPoint(0.4, 0.4, "NE", "pca")]
        assert charts.csi_from_sr_pod(1.0, 1.0) == 1.0
        assert points[1].pod / points[1].sr == 1.0  # bias = pod / sr on the diagonal
        out = tmp_path / "pd.svg"
        charts.render_performance_diagram(points, out)
        assert ET.parse(out).getroot() is not None
        plt.close("all")

    def test_point_outside_unit_square(self):
        with pytest.raises(InvalidInputError):
            charts.DiagramPoint(1.2, 0.5, "FT", "pca")

    def test_sweep_chart(self, tmp_path):
        dims = [4, 8, 16]
        series = {"pca": {"csi": [0.5, 0.6, None], "pod": [0.7, 0.8, 0.9], "far": [0.3, 0.2, 0.1]}}
        out = tmp_path / "sw.svg"
        charts.render_sweep_chart(dims, series, out)
        ids = {el.get("id") for el in ET.parse(out).getroot().iter()}
        assert {"line-pca-csi", "line-pca-pod", "line-pca-far"} <= ids
        with pytest.raises(InvalidInputError):
            charts.render_sweep_chart(dims, {"pca": {"csi": [0.5]}}, tmp_path / "x.svg")

    def test_single_dim_sweep(self, tmp_path):
        out = tmp_path / "one.svg"
        charts.render_sweep_chart([64], {"cae": {"csi": [0.5], "pod": [0.6], "far": [0.2]}}, out)
        ET.parse(out)

    def test_sweep_ticks_at_powers_of_two(self, tmp_path):
        dims = [2 ** p for p in range(2, 12)]
        series = {"pca": {m: [0.5] * len(dims) for m in ("csi", "pod", "far")}}
        out = tmp_path / "sw.svg"
        charts.render_sweep_chart(dims, series, out)
        text = out.read_text()
        for d in dims:
            assert f">{d}<" in text
        assert charts.SWEEP_STYLES == {"csi": "-.", "pod": "-", "far": "--"}

    def test_delta_chart_ids_unique(self, tmp_path):
        d = delta_scores(Scores(0.9, 0.1, 0.9, 1.0, 0.8), Scores(0.8, 0.2, 0.8, 1.0, 0.7))
        rows = [(m, e, d) for m in ("pca", "cae") for e in ("FT", "NE")]
        out = tmp_path / "d.svg"
        charts.render_delta_chart(rows, out)
        ids = [el.get("id") for el in ET.parse(out).getroot().iter() if el.get("id", "").startswith("bar-")]
        assert len(ids) == len(set(ids)) == 12

    def test_csi_helper(self):
        assert charts.csi_from_sr_pod(2 / 3, 0.8) == pytest.approx(4 / 7)
