"""Daily event label tables (``date,FT,NE,SWF,HR,NWPTC``)."""

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import AlignmentError, FormatError

EVENTS = ("FT", "NE", "SWF", "HR", "NWPTC")
HEADER = ("date",) + EVENTS


@dataclass(frozen=True)
class LabelTable:
    dates: tuple
    flags: np.ndarray  # (n_dates, 5) uint8, columns in EVENTS order

    def __len__(self):
        return len(self.dates)

    def event(self, name):
        return self.flags[:, EVENTS.index(name)].astype(np.int64)


def load_labels(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file, expected header {','.join(HEADER)}")
        if tuple(h.strip() for h in header) != HEADER:
            raise FormatError(f"{path}:1: header {header!r}, expected {','.join(HEADER)}")
        dates, rows, seen = [], [], set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(HEADER):
                raise FormatError(f"{path}:{lineno}: expected {len(HEADER)} fields, got {len(row)}")
            date = row[0].strip()
            if date in seen:
                raise FormatError(f"{path}:{lineno}: duplicate date {date}")
            flags = [f.strip() for f in row[1:]]
            if any(f not in ("0", "1") for f in flags):
                raise FormatError(f"{path}:{lineno}: flags must be 0 or 1, got {flags}")
            seen.add(date)
            dates.append(date)
            rows.append([int(f) for f in flags])
    flags = np.array(rows, dtype=np.uint8).reshape(len(rows), len(EVENTS))
    return LabelTable(tuple(dates), flags)


def write_labels(table, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        for date, row in zip(table.dates, table.flags):
            writer.writerow([date] + [int(v) for v in row])


def label_stats(table):
    """Per-event ``(count, frequency)``; frequency is ``None`` for an empty table."""
    n = len(table)
    out = {}
    for j, name in enumerate(EVENTS):
        count = int(table.flags[:, j].sum()) if n else 0
        out[name] = (count, count / n if n else None)
    return out


def align_labels(table, timestamps):
    """Label rows matching frame timestamps by date (``YYYY-MM-DD`` prefix)."""
    index = {d: i for i, d in enumerate(table.dates)}
    rows = []
    for ts in timestamps:
        date = ts[:10]
        if date not in index:
            raise AlignmentError(f"no label row for frame {ts}")
        rows.append(index[date])
    return LabelTable(tuple(table.dates[i] for i in rows), table.flags[rows])
