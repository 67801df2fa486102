"""CSV panel ingestion and simple transforms."""

from __future__ import annotations

import csv

import numpy as np

from .errors import PanelFormatError, ParameterError
from .var_model import TimeSeriesPanel


def load_panel(path, has_header: bool = False, delimiter: str = ",") -> TimeSeriesPanel:
    """Parse a numeric rectangle (rows = time, columns = series) into a panel.

    Ragged rows and non-numeric cells raise PanelFormatError naming the
    offending row and column (1-based, header excluded).
    """
    rows: list[list[float]] = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for i, record in enumerate(reader):
            if has_header and i == 0:
                continue
            if not record or all(cell.strip() == "" for cell in record):
                continue
            row_no = len(rows) + 1
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise PanelFormatError(
                    f"row {row_no} has {len(record)} fields, expected {width}"
                )
            parsed = []
            for j, cell in enumerate(record):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise PanelFormatError(
                        f"row {row_no}, column {j + 1}: {cell!r} is not numeric"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise PanelFormatError(f"{path} contains no data rows")
    return TimeSeriesPanel(np.asarray(rows, dtype=float))


def save_panel(panel: TimeSeriesPanel, path, delimiter: str = ",") -> None:
    np.savetxt(path, panel.values, delimiter=delimiter, fmt="%.17g")


def difference(panel: TimeSeriesPanel) -> TimeSeriesPanel:
    """First differences: row t of the output is row t+1 minus row t."""
    if panel.n_rows < 2:
        raise ParameterError("differencing needs at least two rows")
    values = panel.values[1:] - panel.values[:-1]
    ts = panel.timestamps[1:] if panel.timestamps is not None else None
    return TimeSeriesPanel(values, ts)


def undifference(panel: TimeSeriesPanel, first_row: np.ndarray) -> TimeSeriesPanel:
    """Inverse of difference given the original leading row."""
    first = np.asarray(first_row, dtype=float).reshape(1, -1)
    restored = np.vstack([first, first + np.cumsum(panel.values, axis=0)])
    return TimeSeriesPanel(restored)
