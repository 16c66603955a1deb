"""Versioned time-series CSV format.

Layout: one version comment line, one column-name line, then data rows.
Columns are ``t`` followed by ``n{i},v{i},lambda{i},D{i}`` per oscillator.
Floats are written with 17 significant digits so repeated runs are
byte-comparable and values round-trip exactly.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import TimeSeries

__all__ = ["CsvSchemaError", "CsvData", "write_timeseries_csv",
           "read_timeseries_csv", "CSV_VERSION_LINE"]

CSV_VERSION_LINE = "# oscibath-csv v1"


class CsvSchemaError(ValueError):
    """The file does not follow the versioned time-series schema."""


@dataclass
class CsvData:
    """Channels read back from a time-series CSV (no config attached)."""

    t: np.ndarray
    n: np.ndarray
    v: np.ndarray
    friction: np.ndarray
    diffusion: np.ndarray

    @property
    def n_oscillators(self) -> int:
        return self.n.shape[0]


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _column_names(n_osc: int) -> list[str]:
    names = ["t"]
    for i in range(1, n_osc + 1):
        names += [f"n{i}", f"v{i}", f"lambda{i}", f"D{i}"]
    return names


def write_timeseries_csv(series: TimeSeries, path: str | Path) -> None:
    n_osc = series.n_oscillators
    lines = [CSV_VERSION_LINE, ",".join(_column_names(n_osc))]
    for j in range(series.t.size):
        row = [_fmt(series.t[j])]
        for i in range(n_osc):
            row += [_fmt(series.n[i, j]), _fmt(series.v[i, j]),
                    _fmt(series.friction[i, j]), _fmt(series.diffusion[i, j])]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_timeseries_csv(path: str | Path) -> CsvData:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_VERSION_LINE:
        found = lines[0].strip() if lines else "<empty file>"
        raise CsvSchemaError(f"unsupported csv version line: {found!r}")
    if len(lines) < 3:
        raise CsvSchemaError("csv has no data rows")
    names = [c.strip() for c in lines[1].split(",")]
    if len(names) < 5 or (len(names) - 1) % 4 != 0:
        raise CsvSchemaError("csv column count must be 1 + 4 per oscillator")
    n_osc = (len(names) - 1) // 4
    if names != _column_names(n_osc):
        raise CsvSchemaError(f"unexpected csv columns: {names}")

    try:
        data = np.loadtxt(io.StringIO("\n".join(lines[2:])), delimiter=",",
                          ndmin=2)
    except ValueError as exc:
        raise CsvSchemaError(f"malformed csv data: {exc}") from exc
    if data.shape[1] != len(names):
        raise CsvSchemaError("csv row width does not match header")
    t = data[:, 0]
    n = data[:, 1::4].T
    v = data[:, 2::4].T
    lam = data[:, 3::4].T
    dif = data[:, 4::4].T
    return CsvData(t=t, n=n, v=v, friction=lam, diffusion=dif)
