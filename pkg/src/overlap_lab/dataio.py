"""CSV ingestion with a typed schema, plus functional wide-format files.

Tall format: one row per unit with named outcome / treatment / covariate
columns.  Covariate columns are typed by inspection: a column where every
cell parses as a number is numeric; one where no cell parses is categorical
and gets one-hot encoded (columns named ``col=level``); a mixed column is a
parse error naming the offending cell.  Treatment must be exactly 0 or 1.

Wide (functional) format: a ``group`` column in {0, 1} plus one column per
grid point, headers being the numeric grid locations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataParseError, SchemaMismatchError
from .gp import FunctionalSampleSet, Grid
from .propensity import ObservationalDataset


@dataclass(frozen=True)
class DatasetSchema:
    outcome: str
    treatment: str
    covariates: tuple[str, ...] | None = None  # None -> every other column
    oracle_y0: str | None = None
    oracle_y1: str | None = None

    @staticmethod
    def from_dict(d: dict) -> "DatasetSchema":
        cov = d.get("covariates")
        return DatasetSchema(
            outcome=d["outcome"],
            treatment=d["treatment"],
            covariates=tuple(cov) if cov else None,
            oracle_y0=d.get("oracle_y0"),
            oracle_y1=d.get("oracle_y1"),
        )


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.exists():
        raise SchemaMismatchError(f"dataset file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatchError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    header = [h.strip() for h in header]
    width = len(header)
    for i, row in enumerate(rows, start=2):
        if len(row) != width:
            raise DataParseError(f"{path}: row {i} has {len(row)} cells, expected {width}")
    return header, rows


def _try_float(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def _numeric_column(path, rows, col_idx: int, name: str) -> np.ndarray:
    out = np.empty(len(rows))
    for i, row in enumerate(rows):
        val = _try_float(row[col_idx].strip())
        if val is None:
            raise DataParseError(
                f"{path}: row {i + 2}, column {name!r}: non-numeric cell {row[col_idx]!r}"
            )
        out[i] = val
    return out


def load_dataset(path, schema: DatasetSchema) -> ObservationalDataset:
    """Typed dataset from a tall CSV; categorical covariates one-hot encoded."""
    header, rows = _read_rows(path)
    index = {name: i for i, name in enumerate(header)}
    declared = [schema.outcome, schema.treatment]
    if schema.oracle_y0:
        declared.append(schema.oracle_y0)
    if schema.oracle_y1:
        declared.append(schema.oracle_y1)
    covs = (
        list(schema.covariates)
        if schema.covariates is not None
        else [h for h in header if h not in declared]
    )
    for name in declared + covs:
        if name not in index:
            raise SchemaMismatchError(f"{path}: missing column {name!r}")

    y = _numeric_column(path, rows, index[schema.outcome], schema.outcome)
    t_raw = _numeric_column(path, rows, index[schema.treatment], schema.treatment)
    for i, val in enumerate(t_raw):
        if val not in (0.0, 1.0):
            raise DataParseError(
                f"{path}: row {i + 2}, column {schema.treatment!r}: "
                f"treatment must be 0 or 1, got {val:g}"
            )

    columns: list[np.ndarray] = []
    names: list[str] = []
    for name in covs:
        cells = [row[index[name]].strip() for row in rows]
        parsed = [_try_float(c) for c in cells]
        n_numeric = sum(p is not None for p in parsed)
        if n_numeric == len(cells):
            columns.append(np.asarray(parsed, dtype=float))
            names.append(name)
        elif n_numeric == 0:
            for level in sorted(set(cells)):
                columns.append(np.asarray([1.0 if c == level else 0.0 for c in cells]))
                names.append(f"{name}={level}")
        else:
            bad = next(i for i, p in enumerate(parsed) if p is None)
            raise DataParseError(
                f"{path}: row {bad + 2}, column {name!r}: mixed numeric/text column "
                f"(cell {cells[bad]!r})"
            )

    oracle_y0 = oracle_y1 = None
    if schema.oracle_y0 and schema.oracle_y1:
        oracle_y0 = _numeric_column(path, rows, index[schema.oracle_y0], schema.oracle_y0)
        oracle_y1 = _numeric_column(path, rows, index[schema.oracle_y1], schema.oracle_y1)

    z = np.column_stack(columns) if columns else np.empty((len(rows), 0))
    return ObservationalDataset(
        y=y,
        t=t_raw.astype(int),
        z=z,
        covariate_names=tuple(names),
        oracle_y0=oracle_y0,
        oracle_y1=oracle_y1,
    )


def save_dataset(data: ObservationalDataset, path) -> None:
    """Write the typed (post-encoding) dataset back to CSV; reload is identity."""
    names = list(data.covariate_names or (f"z{i}" for i in range(data.z.shape[1])))
    header = ["y", "t", *names]
    if data.oracle_y0 is not None:
        header += ["y0", "y1"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(data.n):
            row = [repr(float(data.y[i])), str(int(data.t[i]))]
            row += [repr(float(v)) for v in data.z[i]]
            if data.oracle_y0 is not None:
                row += [repr(float(data.oracle_y0[i])), repr(float(data.oracle_y1[i]))]
            writer.writerow(row)


def load_functional_samples(path) -> FunctionalSampleSet:
    """Wide-format paths: `group` column plus numeric grid-point headers."""
    header, rows = _read_rows(path)
    if "group" not in header:
        raise SchemaMismatchError(f"{path}: wide format requires a 'group' column")
    g_idx = header.index("group")
    grid_cols = []
    for i, name in enumerate(header):
        if i == g_idx:
            continue
        loc = _try_float(name)
        if loc is None:
            raise SchemaMismatchError(
                f"{path}: column {name!r} is not a numeric grid location"
            )
        grid_cols.append((loc, i))
    if not grid_cols:
        raise SchemaMismatchError(f"{path}: no grid columns found")
    grid_cols.sort()
    grid = Grid(np.array([loc for loc, _ in grid_cols]))

    values = np.empty((len(rows), len(grid_cols)))
    group = np.empty(len(rows), dtype=int)
    for i, row in enumerate(rows):
        gval = _try_float(row[g_idx].strip())
        if gval not in (0.0, 1.0):
            raise DataParseError(f"{path}: row {i + 2}: group must be 0 or 1")
        group[i] = int(gval)
        for k, (_, col) in enumerate(grid_cols):
            val = _try_float(row[col].strip())
            if val is None:
                raise DataParseError(
                    f"{path}: row {i + 2}, column {header[col]!r}: "
                    f"non-numeric cell {row[col]!r}"
                )
            values[i, k] = val
    return FunctionalSampleSet(grid=grid, values=values, group=group)


def save_functional_samples(samples: FunctionalSampleSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", *(repr(float(t)) for t in samples.grid.points)])
        for i in range(samples.n_samples):
            writer.writerow(
                [str(int(samples.group[i])), *(repr(float(v)) for v in samples.values[i])]
            )
