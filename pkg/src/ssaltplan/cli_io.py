"""Flat-file formats: dataset CSV, draws, summaries, criterion grids.

The dataset schema is ``time,cause`` with time in hundred-hours and cause
in {0, 1, 2}; the design (temperatures, tau, tc, n) lives in the run
configuration because censored rows carry time = tc.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import Dataset, DesignSpec

__all__ = ["read_dataset_csv", "write_dataset_csv"]


def read_dataset_csv(path, design: DesignSpec) -> Dataset:
    path = Path(path)
    pairs = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file, expected a 'time,cause' header")
        header = [h.strip().lower() for h in header]
        if header[:2] != ["time", "cause"]:
            raise DataError(f"{path}: header must be 'time,cause', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                t = float(row[0])
                c = int(row[1])
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}: line {lineno}: malformed row {row!r}") from exc
            if c not in (0, 1, 2):
                raise DataError(
                    f"{path}: line {lineno}: cause must be 0, 1 or 2, got {c}"
                )
            if not (t > 0):
                raise DataError(f"{path}: line {lineno}: time must be positive")
            pairs.append((t, c))
    if len(pairs) != design.n:
        raise DataError(
            f"{path}: {len(pairs)} data rows but the design declares n = {design.n}"
        )
    return Dataset.from_pairs(pairs, design)


def write_dataset_csv(path, data: Dataset):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "cause"])
        for o in data.observations:
            writer.writerow([f"{o.time:.17g}", o.cause])


def write_table_csv(path, header: list[str], rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in row]
            )
