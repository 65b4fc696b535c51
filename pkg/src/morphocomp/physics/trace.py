"""Per-step center-of-mass traces and their CSV form."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import MorphocompError

CSV_HEADER = ("step", "cycle", "com_x", "com_y", "s1", "s2")


class TraceFormatError(MorphocompError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(f"row {row}: {message}" if row is not None else message)
        self.row = row


@dataclass
class Trace:
    """Raw trace in voxel-length and step units.

    ``com0`` is the center of mass before the first recorded step; it is
    not part of the CSV form, where the first row stands in for it.
    """

    step: np.ndarray
    cycle: np.ndarray
    com_x: np.ndarray
    com_y: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    com0: tuple[float, float] = (0.0, 0.0)
    body_length: float = 1.0
    scales: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def empty(cls, com0_x: float = 0.0, com0_y: float = 0.0, body_length: float = 1.0) -> "Trace":
        z = np.zeros(0)
        zi = np.zeros(0, dtype=np.int64)
        zb = np.zeros(0, dtype=bool)
        return cls(zi, z, z, z, zb, zb, (com0_x, com0_y), body_length)

    def __len__(self) -> int:
        return self.step.shape[0]

    def extend(self, step, cycle, com_x, com_y, s1: bool, s2: bool, scales=None) -> None:
        n = len(step)
        if len(self) and step[0] <= self.step[-1]:
            raise ValueError("trace steps must be strictly increasing")
        self.step = np.concatenate([self.step, step])
        self.cycle = np.concatenate([self.cycle, cycle])
        self.com_x = np.concatenate([self.com_x, com_x])
        self.com_y = np.concatenate([self.com_y, com_y])
        self.s1 = np.concatenate([self.s1, np.full(n, bool(s1))])
        self.s2 = np.concatenate([self.s2, np.full(n, bool(s2))])
        if scales is not None:
            self.scales = scales if self.scales is None else np.concatenate([self.scales, scales])

    def com_x_at(self, k: int) -> float:
        """COM x after ``k`` recorded steps (k=0 is the initial state)."""
        return self.com0[0] if k == 0 else float(self.com_x[k - 1])

    def displacement(self, start: int, end: int) -> float:
        return self.com_x_at(end) - self.com_x_at(start)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for k in range(len(self)):
            w.writerow((int(self.step[k]), repr(float(self.cycle[k])), repr(float(self.com_x[k])),
                        repr(float(self.com_y[k])), int(self.s1[k]), int(self.s2[k])))
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def read_trace_csv(source: str | Path, body_length: float = 1.0) -> Trace:
    """Parse a trace CSV file (or CSV text if ``source`` contains newlines)."""
    text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TraceFormatError("empty file", row=1) from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise TraceFormatError(f"bad header {header!r}", row=1)
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise TraceFormatError(f"expected {len(CSV_HEADER)} fields, got {len(row)}", row=lineno)
        try:
            rows.append((int(row[0]), float(row[1]), float(row[2]), float(row[3]),
                         bool(int(row[4])), bool(int(row[5]))))
        except ValueError as e:
            raise TraceFormatError(str(e), row=lineno) from None
        if len(rows) > 1 and rows[-1][0] <= rows[-2][0]:
            raise TraceFormatError("step index not increasing", row=lineno)
    if not rows:
        return Trace.empty(body_length=body_length)
    cols = list(zip(*rows))
    return Trace(
        step=np.array(cols[0], dtype=np.int64),
        cycle=np.array(cols[1]),
        com_x=np.array(cols[2]),
        com_y=np.array(cols[3]),
        s1=np.array(cols[4], dtype=bool),
        s2=np.array(cols[5], dtype=bool),
        com0=(cols[2][0], cols[3][0]),
        body_length=body_length,
    )
