"""Reading, gap-filling and standardizing multivariate time series tables.

The input is a delimited table whose first column holds numeric time labels
(years, integers) and whose remaining columns hold one variable each.  Empty
cells, ``NA`` and ``NaN`` mark missing observations.
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

MISSING_TOKENS = frozenset({"", "na", "nan"})
MIN_STEPS = 4


class DatasetError(ValueError):
    """Raised for malformed or unusable input tables."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ConstantVariableWarning(UserWarning):
    pass


@dataclass
class TimeSeriesDataset:
    """Time axis plus named variables; missing values are NaN."""

    time_labels: np.ndarray
    variables: Dict[str, np.ndarray]

    def __post_init__(self):
        self.time_labels = np.asarray(self.time_labels, dtype=float)
        if self.time_labels.ndim != 1:
            raise DatasetError("time labels must be one-dimensional")
        if np.any(np.diff(self.time_labels) <= 0):
            raise DatasetError("time labels must be strictly increasing")
        n = len(self.time_labels)
        for name, values in self.variables.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (n,):
                raise DatasetError(f"expected {n} values, got {values.shape}", column=name)
            self.variables[name] = values

    @property
    def N(self) -> int:
        return len(self.time_labels)

    @property
    def names(self) -> List[str]:
        return list(self.variables)

    def missing(self, name: str) -> np.ndarray:
        return np.isnan(self.variables[name])


@dataclass
class CleanDataset:
    """Fully observed, standardized variables keyed by canonical name (V1, V2, ...).

    ``name_map`` maps every *input* variable to its canonical name, including
    the removed ones, so that removal reports can use either spelling.
    ``means`` and ``sds`` hold the statistics used for standardization.
    """

    time_labels: np.ndarray
    variables: Dict[str, np.ndarray]
    removed: List[str] = field(default_factory=list)
    name_map: Dict[str, str] = field(default_factory=dict)
    means: Dict[str, float] = field(default_factory=dict)
    sds: Dict[str, float] = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.time_labels)

    @property
    def names(self) -> List[str]:
        return list(self.variables)

    def original_name(self, canonical: str) -> str:
        for orig, canon in self.name_map.items():
            if canon == canonical:
                return orig
        raise KeyError(canonical)

    def destandardize(self, name: str, values: np.ndarray | None = None) -> np.ndarray:
        if values is None:
            values = self.variables[name]
        return np.asarray(values) * self.sds[name] + self.means[name]


def _parse_number(token: str, row: int, column: str) -> float:
    if token.strip().lower() in MISSING_TOKENS:
        return np.nan
    try:
        return float(token)
    except ValueError:
        raise DatasetError(f"non-numeric cell {token!r}", row=row, column=column) from None


def parse_dataset(text: str | io.TextIOBase, delimiter: str = ",") -> TimeSeriesDataset:
    """Parse a delimited table with a header row into a :class:`TimeSeriesDataset`.

    Row numbers in error messages are 1-based and count the header as row 1,
    matching what a spreadsheet shows.
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    rows = [r for r in csv.reader(text, delimiter=delimiter) if any(c.strip() for c in r)]
    if not rows:
        raise DatasetError("empty table")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise DatasetError("need a time column and at least one variable column")
    if len(set(header[1:])) != len(header) - 1:
        raise DatasetError("duplicate variable names in header")

    times = []
    columns: List[List[float]] = [[] for _ in header[1:]]
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DatasetError(f"expected {len(header)} cells, found {len(row)}", row=i)
        t = _parse_number(row[0], i, header[0])
        if np.isnan(t):
            raise DatasetError("missing time label", row=i, column=header[0])
        if times and t <= times[-1]:
            raise DatasetError("time labels must be strictly increasing (duplicate or unsorted)",
                               row=i, column=header[0])
        times.append(t)
        for j, cell in enumerate(row[1:]):
            columns[j].append(_parse_number(cell, i, header[j + 1]))

    if len(times) < MIN_STEPS:
        raise DatasetError(f"need at least {MIN_STEPS} time steps, found {len(times)}")
    variables = {name: np.array(col) for name, col in zip(header[1:], columns)}
    return TimeSeriesDataset(np.array(times), variables)


def read_dataset(path) -> TimeSeriesDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_dataset(fh)


def interpolate_and_filter(d: TimeSeriesDataset) -> Tuple[TimeSeriesDataset, List[str]]:
    """Fill interior gaps linearly and drop variables missing at either end.

    Interpolation runs on the time labels, so unevenly spaced labels are
    weighted by their actual spacing.
    """
    kept: Dict[str, np.ndarray] = {}
    removed: List[str] = []
    t = d.time_labels
    for name, values in d.variables.items():
        miss = np.isnan(values)
        if miss[0] or miss[-1]:
            removed.append(name)
            continue
        filled = values.copy()
        if miss.any():
            filled[miss] = np.interp(t[miss], t[~miss], values[~miss])
        kept[name] = filled
    if not kept:
        raise DatasetError("no variables remain after removing variables with missing end points")
    return TimeSeriesDataset(t.copy(), kept), removed


def standardize(d: TimeSeriesDataset, removed: Sequence[str] = (),
                all_names: Sequence[str] | None = None) -> CleanDataset:
    """Z-score every variable using the sample (N-1) standard deviation.

    Canonical names V1, V2, ... are handed out over ``all_names``, which
    should be the original header order so that a removed variable leaves a
    hole in the numbering.  Without it, retained names come first and removed
    ones after.  Constant variables become all zeros and trigger
    :class:`ConstantVariableWarning`.
    """
    if all_names is None:
        all_names = list(d.variables) + [r for r in removed if r not in d.variables]
    name_map = {orig: f"V{i}" for i, orig in enumerate(all_names, start=1)}

    out: Dict[str, np.ndarray] = {}
    means: Dict[str, float] = {}
    sds: Dict[str, float] = {}
    for orig, values in d.variables.items():
        if np.isnan(values).any():
            raise DatasetError("standardize needs fully observed data", column=orig)
        canon = name_map[orig]
        mean = float(values.mean())
        sd = float(values.std(ddof=1)) if len(values) > 1 else 0.0
        if sd == 0.0 or not np.isfinite(sd):
            warnings.warn(f"constant variable {orig!r} standardized to zeros",
                          ConstantVariableWarning, stacklevel=2)
            out[canon] = np.zeros_like(values)
            sd = 0.0
        else:
            out[canon] = (values - mean) / sd
        means[canon] = mean
        sds[canon] = sd
    return CleanDataset(d.time_labels.copy(), out, list(removed), name_map, means, sds)


def prepare(d: TimeSeriesDataset) -> CleanDataset:
    """Full ingest chain: interpolate, filter and standardize."""
    filtered, removed = interpolate_and_filter(d)
    return standardize(filtered, removed, all_names=d.names)
