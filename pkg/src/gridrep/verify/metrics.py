"""2x2 contingency tables and the scores derived from them.

Zero denominators produce ``None`` (written as ``NA``), never NaN.
"""

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError

METRICS = ("pod", "far", "sr", "bias", "csi")
NA = "NA"


@dataclass(frozen=True)
class ContingencyTable:
    hits: int = 0
    false_alarms: int = 0
    misses: int = 0
    correct_negatives: int = 0

    def __add__(self, other):
        return ContingencyTable(self.hits + other.hits,
                                self.false_alarms + other.false_alarms,
                                self.misses + other.misses,
                                self.correct_negatives + other.correct_negatives)

    @property
    def total(self):
        return self.hits + self.false_alarms + self.misses + self.correct_negatives

    def as_tuple(self):
        return (self.hits, self.false_alarms, self.misses, self.correct_negatives)


@dataclass(frozen=True)
class Scores:
    pod: float = None
    far: float = None
    sr: float = None
    bias: float = None
    csi: float = None

    def as_dict(self):
        return {m: getattr(self, m) for m in METRICS}


def _binary(v, name):
    arr = np.asarray(v)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be 1-D")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise InvalidInputError(f"{name} must contain only 0/1")
    return arr.astype(bool)


def tabulate(pred, obs):
    p = _binary(pred, "pred")
    o = _binary(obs, "obs")
    if p.shape != o.shape:
        raise InvalidInputError(f"pred has {p.size} entries, obs has {o.size}")
    return ContingencyTable(int(np.sum(p & o)), int(np.sum(p & ~o)),
                            int(np.sum(~p & o)), int(np.sum(~p & ~o)))


def sum_tables(tables):
    total = ContingencyTable()
    for t in tables:
        total = total + t
    return total


def _ratio(num, den):
    return num / den if den else None


def scores(t):
    a, b, c = t.hits, t.false_alarms, t.misses
    far = _ratio(b, a + b)
    return Scores(
        pod=_ratio(a, a + c),
        far=far,
        sr=None if far is None else _ratio(a, a + b),
        bias=_ratio(a + b, a + c),
        csi=_ratio(a, a + b + c),
    )


@dataclass(frozen=True)
class MetricDelta:
    metric: str
    delta: float  # None when either side is NA
    improved: bool


def _improved(metric, delta, high, low):
    if delta is None or delta == 0:
        return False
    if metric == "far":
        return delta < 0
    if metric == "bias":
        return abs(high - 1.0) < abs(low - 1.0)
    return delta > 0


def delta_scores(high, low):
    """Componentwise ``high - low`` with an improvement flag per metric.

    Higher CSI, POD and SR and lower FAR count as improvements; for bias the
    flag marks a move towards 1.
    """
    out = {}
    for m in METRICS:
        h, l = getattr(high, m), getattr(low, m)
        delta = None if h is None or l is None else h - l
        out[m] = MetricDelta(m, delta, _improved(m, delta, h, l))
    return out


def format_value(v):
    return NA if v is None else format(float(v), ".10g")


def write_scores_csv(rows, path, extra_columns=()):
    """Write ``(method, event, Scores[, extras...])`` rows as CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "event", *extra_columns, *METRICS])
        for row in rows:
            method, event, sc, *extras = row
            writer.writerow([method, event, *extras, *(format_value(getattr(sc, m)) for m in METRICS)])


def read_scores_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for rec in reader:
            vals = {m: None if rec[m] == NA else float(rec[m]) for m in METRICS}
            rows.append((rec["method"], rec["event"], Scores(**vals)))
    return rows
