"""Datasets and the BOLD CSV format (header of region names, one row per scan)."""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ParseError, ShapeError


@dataclass
class Dataset:
    Y: np.ndarray
    T_R: float = 2.0
    region_names: list = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        if self.Y.shape[0] < 2:
            raise ShapeError(f"a dataset needs at least 2 scans, got {self.Y.shape[0]}")
        if not np.all(np.isfinite(self.Y)):
            raise ValueError("dataset contains non-finite values")
        if self.region_names is None:
            self.region_names = [f"r{i}" for i in range(self.Y.shape[1])]
        self.region_names = [str(r) for r in self.region_names]
        if len(self.region_names) != self.Y.shape[1]:
            raise ShapeError(
                f"{len(self.region_names)} region names for {self.Y.shape[1]} columns"
            )

    @property
    def N(self):
        return self.Y.shape[0]

    @property
    def n(self):
        return self.Y.shape[1]


def load_bold_csv(path, T_R=2.0):
    """Read a BOLD CSV file into a :class:`Dataset`.

    Raises
    ------
    ParseError
        On ragged rows, non-numeric or non-finite cells, or fewer than two
        data rows. ``.line`` is the 1-based line number of the offending row.
    """
    rows = []
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: file is empty", line=1) from None
        header = [h.strip() for h in header]
        if not header or any(h == "" for h in header):
            raise ParseError(f"{path}: empty region name in header", line=1)
        for row in reader:
            line = reader.line_num
            if not row or all(c.strip() == "" for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}:{line}: expected {len(header)} cells, found {len(row)}", line=line
                )
            values = []
            for j, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}:{line}: column {header[j]!r} is not a number: {cell!r}", line=line
                    ) from None
                if not math.isfinite(v):
                    raise ParseError(
                        f"{path}:{line}: column {header[j]!r} is not finite: {cell!r}", line=line
                    )
                values.append(v)
            rows.append(values)
    if len(rows) < 2:
        raise ParseError(f"{path}: need at least 2 data rows, found {len(rows)}", line=len(rows) + 1)
    return Dataset(np.array(rows), T_R, header, {"path": str(path)})


def write_bold_csv(path, dataset):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(dataset.region_names)
        for row in dataset.Y:
            w.writerow([repr(float(v)) for v in row])
