"""Datasets with named column roles, plus CSV reading and writing."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType

import numpy as np

from .errors import DataError, MissingColumnError, NonNumericError, ParseError
from .regression import standardize

__all__ = ["Dataset", "Roles", "atomic_write_text", "ingest_csv", "write_csv"]


@dataclass(frozen=True)
class Roles:
    """Which column plays which part in the analysis.

    ``confounder`` names an observed stand-in for the unobserved confounder;
    it is only set on simulated data, for oracle checks.
    """

    outcome: str
    exposure: str
    instrument: str
    covariates: tuple[str, ...] = ()
    confounder: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        names = self.all_columns()
        dupes = sorted({c for c in names if names.count(c) > 1})
        if dupes:
            raise DataError(f"a column can play only one role; repeated: {dupes}")

    def all_columns(self) -> list[str]:
        cols = [self.outcome, self.exposure, self.instrument, *self.covariates]
        if self.confounder is not None:
            cols.append(self.confounder)
        return cols

    @classmethod
    def parse(cls, text: str) -> Roles:
        """Parse ``y=COL,x=COL,z=COL,w=COL1+COL2[,u=COL]``."""
        fields: dict[str, str] = {}
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            key, sep, value = part.partition("=")
            key = key.strip().lower()
            if not sep or not value.strip():
                raise DataError(f"role entry {part!r} is not of the form key=column")
            if key in fields:
                raise DataError(f"role {key!r} given twice")
            fields[key] = value.strip()
        unknown = set(fields) - {"y", "x", "z", "w", "u"}
        if unknown:
            raise DataError(f"unknown role(s) {sorted(unknown)}; use y, x, z, w and optionally u")
        missing = [k for k in ("y", "x", "z") if k not in fields]
        if missing:
            raise DataError(f"missing role(s) {missing}")
        covs = tuple(c.strip() for c in fields.get("w", "").split("+") if c.strip())
        return cls(fields["y"], fields["x"], fields["z"], covs, fields.get("u"))

    def format(self) -> str:
        out = f"y={self.outcome},x={self.exposure},z={self.instrument}"
        if self.covariates:
            out += ",w=" + "+".join(self.covariates)
        if self.confounder:
            out += f",u={self.confounder}"
        return out


@dataclass(frozen=True)
class Dataset:
    """Aligned numeric columns together with their roles."""

    columns: Mapping[str, np.ndarray]
    roles: Roles

    def __post_init__(self):
        cols = {name: np.asarray(v, dtype=np.float64) for name, v in self.columns.items()}
        missing = [c for c in self.roles.all_columns() if c not in cols]
        if missing:
            raise MissingColumnError(f"column(s) {missing} not found; available: {sorted(cols)}")
        lengths = {v.shape[0] for v in cols.values()}
        if len(lengths) > 1:
            raise DataError(f"columns have different lengths: {sorted(lengths)}")
        object.__setattr__(self, "columns", MappingProxyType(cols))

    @property
    def n(self) -> int:
        return next(iter(self.columns.values())).shape[0]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    @property
    def y(self) -> np.ndarray:
        return self.columns[self.roles.outcome]

    @property
    def x(self) -> np.ndarray:
        return self.columns[self.roles.exposure]

    @property
    def z(self) -> np.ndarray:
        return self.columns[self.roles.instrument]

    @property
    def covariates(self) -> list[np.ndarray]:
        return [self.columns[c] for c in self.roles.covariates]

    @property
    def u(self) -> np.ndarray | None:
        return None if self.roles.confounder is None else self.columns[self.roles.confounder]

    def standardized(self) -> Dataset:
        """A copy with every role column standardized (other columns dropped)."""
        return Dataset({c: standardize(self.columns[c]) for c in self.roles.all_columns()}, self.roles)


def _parse_float(text: str, row: int, column: str) -> float:
    stripped = text.strip()
    if not stripped:
        raise ParseError(f"blank cell at row {row}, column {column!r}", row=row, column=column)
    try:
        value = float(stripped)
    except ValueError:
        raise NonNumericError(
            f"non-numeric cell {stripped!r} at row {row}, column {column!r}", row=row, column=column
        ) from None
    if not math.isfinite(value):
        raise NonNumericError(f"non-finite cell {stripped!r} at row {row}, column {column!r}", row=row, column=column)
    return value


def ingest_csv(path: str | os.PathLike, roles: Roles, standardize_columns: bool = True) -> Dataset:
    """Read the role columns of a headed CSV file.

    Rows are numbered from 1 for the first data line (the header is row 0).
    Columns not named in ``roles`` are ignored and may hold anything.

    Raises
    ------
    ParseError
        Empty file, ragged row, or blank cell; ``row`` and ``column`` locate it.
    NonNumericError
        A role cell that is not a finite decimal number.
    MissingColumnError
        A role names a column absent from the header.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: file is empty", row=0) from None
        dupes = sorted({h for h in header if header.count(h) > 1})
        if dupes:
            raise ParseError(f"{path}: duplicate header name(s) {dupes}", row=0)
        wanted = roles.all_columns()
        missing = [c for c in wanted if c not in header]
        if missing:
            raise MissingColumnError(f"{path}: column(s) {missing} not in header {header}")
        index = {c: header.index(c) for c in wanted}
        values: dict[str, list[float]] = {c: [] for c in wanted}
        for rownum, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: row {rownum} has {len(row)} fields, header has {len(header)}", row=rownum
                )
            for c in wanted:
                values[c].append(_parse_float(row[index[c]], rownum, c))
    data = Dataset({c: np.array(v) for c, v in values.items()}, roles)
    if data.n == 0:
        raise ParseError(f"{path}: no data rows", row=1)
    return data.standardized() if standardize_columns else data


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_csv(path: str | os.PathLike, columns: Mapping[str, np.ndarray], order: Sequence[str] | None = None) -> None:
    """Write columns to CSV with 17 significant digits so values round-trip exactly."""
    names = list(order) if order is not None else list(columns)
    mat = np.column_stack([np.asarray(columns[c], dtype=np.float64) for c in names])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in mat:
        writer.writerow([format(v, ".17g") for v in row])
    atomic_write_text(path, buf.getvalue())
