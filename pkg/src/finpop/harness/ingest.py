"""CSV ingestion and export.

Two schemas are understood: `arm` files carry columns arm,y with optional
covariates x1..xk and an optional cluster column; `iv` files carry z,d,y.
Parsed carriers hold the columns exactly as written, so export followed by
ingest reproduces the data bit for bit; covariate centering happens on
access (`centered_x`) with the column means recorded at ingest and noted in
the log, never in the stored arrays.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

__all__ = ["ObservedData", "IVData", "ingest_csv", "export_csv"]

logger = logging.getLogger(__name__)

_X_COLUMN = re.compile(r"^x([1-9][0-9]*)$")


@dataclass(frozen=True)
class ObservedData:
    """One realized Q-arm experiment: arm labels 1..Q, scalar outcomes, and
    optional covariates / cluster ids, all exactly as read from the file."""

    labels: np.ndarray
    y: np.ndarray
    x: np.ndarray | None = None
    clusters: np.ndarray | None = None
    x_names: tuple[str, ...] = ()

    @property
    def n_units(self) -> int:
        return int(self.y.size)

    @property
    def q_arms(self) -> int:
        return int(self.labels.max())

    def centered_x(self) -> np.ndarray:
        """Covariates minus their column means, as the estimators require."""
        if self.x is None:
            raise ValidationError("no covariate columns were ingested")
        return self.x - self.x.mean(axis=0)


@dataclass(frozen=True)
class IVData:
    """Encouragement data: binary assignment z, dose d, response y."""

    z: np.ndarray
    d: np.ndarray
    y: np.ndarray

    @property
    def n_units(self) -> int:
        return int(self.y.size)


def _read_rows(path: str) -> tuple[list[str], list[tuple[int, list[str]]]]:
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            reader = csv.reader(fh)
            table = [(lineno, row) for lineno, row in enumerate(reader, start=1) if row]
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    if not table:
        raise ValidationError(f"{path}: empty file, a header row is required")
    (_, header), rows = table[0], table[1:]
    if not rows:
        raise ValidationError(f"{path}: no data rows after the header")
    width = len(header)
    for lineno, row in rows:
        if len(row) != width:
            raise ValidationError(
                f"{path}: line {lineno}: expected {width} fields, got {len(row)}"
            )
    return header, rows


def _float_cell(cell: str, path: str, lineno: int, column: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ValidationError(
            f"{path}: line {lineno}, column {column!r}: "
            f"could not parse {cell!r} as a number"
        ) from None


def _int_cell(cell: str, path: str, lineno: int, column: str) -> int:
    try:
        return int(cell)
    except ValueError:
        raise ValidationError(
            f"{path}: line {lineno}, column {column!r}: "
            f"could not parse {cell!r} as an integer"
        ) from None


def _column_map(header: list[str], path: str, required: tuple[str, ...],
                optional: tuple[str, ...], allow_x: bool) -> dict[str, int]:
    seen: dict[str, int] = {}
    for idx, name in enumerate(header):
        if name in seen:
            raise ValidationError(f"{path}: duplicate column {name!r}")
        seen[name] = idx
    missing = [c for c in required if c not in seen]
    if missing:
        raise ValidationError(f"{path}: missing required column(s) {missing}")
    known = set(required) | set(optional)
    unknown = [
        name for name in header
        if name not in known and not (allow_x and _X_COLUMN.match(name))
    ]
    if unknown:
        expected = ", ".join(required)
        extras = ", optional x1..xk and cluster" if allow_x else ""
        raise ValidationError(
            f"{path}: unexpected column(s) {unknown}; expected {expected}{extras}"
        )
    return seen


def _x_columns(header: list[str], path: str) -> list[str]:
    found = sorted(
        (int(m.group(1)), name)
        for name in header
        if (m := _X_COLUMN.match(name))
    )
    if not found:
        return []
    indices = [i for i, _ in found]
    if indices != list(range(1, len(indices) + 1)):
        raise ValidationError(
            f"{path}: covariate columns must be named x1..xk consecutively, "
            f"got {[name for _, name in found]}"
        )
    return [name for _, name in found]


def _check_contiguous(values: np.ndarray, path: str, what: str) -> None:
    top = int(values.max())
    missing = sorted(set(range(1, top + 1)) - set(np.unique(values).tolist()))
    if missing:
        raise ValidationError(
            f"{path}: {what} must be contiguous 1..{top}; no rows carry {missing}"
        )


def _ingest_arm(path: str) -> ObservedData:
    header, rows = _read_rows(path)
    cols = _column_map(header, path, required=("arm", "y"),
                       optional=("cluster",), allow_x=True)
    x_names = _x_columns(header, path)
    has_cluster = "cluster" in cols

    labels = np.empty(len(rows), dtype=np.int64)
    y = np.empty(len(rows))
    x = np.empty((len(rows), len(x_names))) if x_names else None
    clusters = np.empty(len(rows), dtype=np.int64) if has_cluster else None
    for row_i, (lineno, row) in enumerate(rows):
        arm = _int_cell(row[cols["arm"]], path, lineno, "arm")
        if arm < 1:
            raise ValidationError(
                f"{path}: line {lineno}: arm labels start at 1, got {arm}"
            )
        labels[row_i] = arm
        y[row_i] = _float_cell(row[cols["y"]], path, lineno, "y")
        for k, name in enumerate(x_names):
            x[row_i, k] = _float_cell(row[cols[name]], path, lineno, name)
        if has_cluster:
            cid = _int_cell(row[cols["cluster"]], path, lineno, "cluster")
            if cid < 1:
                raise ValidationError(
                    f"{path}: line {lineno}: cluster ids start at 1, got {cid}"
                )
            clusters[row_i] = cid

    _check_contiguous(labels, path, "arm labels")
    if clusters is not None:
        _check_contiguous(clusters, path, "cluster ids")
    if x is not None:
        means = x.mean(axis=0)
        logger.info(
            "%s: covariates %s enter estimation centered; column means %s",
            path, list(x_names), means.tolist(),
        )
    return ObservedData(labels=labels, y=y, x=x, clusters=clusters,
                        x_names=tuple(x_names))


def _ingest_iv(path: str) -> IVData:
    header, rows = _read_rows(path)
    cols = _column_map(header, path, required=("z", "d", "y"),
                       optional=(), allow_x=False)
    z = np.empty(len(rows), dtype=np.int64)
    d = np.empty(len(rows))
    y = np.empty(len(rows))
    for row_i, (lineno, row) in enumerate(rows):
        zi = _int_cell(row[cols["z"]], path, lineno, "z")
        if zi not in (0, 1):
            raise ValidationError(
                f"{path}: line {lineno}: column 'z' must be 0 or 1, got {zi}"
            )
        z[row_i] = zi
        d[row_i] = _float_cell(row[cols["d"]], path, lineno, "d")
        y[row_i] = _float_cell(row[cols["y"]], path, lineno, "y")
    return IVData(z=z, d=d, y=y)


def ingest_csv(path: str, schema: str):
    """Parse and validate a CSV file.

    schema 'arm' -> ObservedData (columns arm,y[,x1..xk][,cluster]);
    schema 'iv' -> IVData (columns z,d,y). The header row is required and
    column order is free.
    """
    if schema == "arm":
        return _ingest_arm(str(path))
    if schema == "iv":
        return _ingest_iv(str(path))
    raise ValidationError(f"unknown schema {schema!r}; use 'arm' or 'iv'")


def export_csv(data, path: str) -> None:
    """Write a carrier back to CSV so that ingest_csv reproduces it exactly.

    Floats are written in shortest round-trip form (repr), which parses back
    to the identical bit pattern.
    """
    path = str(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if isinstance(data, ObservedData):
            header = ["arm", "y", *data.x_names]
            if data.clusters is not None:
                header.append("cluster")
            writer.writerow(header)
            for i in range(data.n_units):
                row = [str(int(data.labels[i])), repr(float(data.y[i]))]
                if data.x is not None:
                    row.extend(repr(float(v)) for v in data.x[i])
                if data.clusters is not None:
                    row.append(str(int(data.clusters[i])))
                writer.writerow(row)
        elif isinstance(data, IVData):
            writer.writerow(["z", "d", "y"])
            for i in range(data.n_units):
                writer.writerow([
                    str(int(data.z[i])),
                    repr(float(data.d[i])),
                    repr(float(data.y[i])),
                ])
        else:
            raise ValidationError(
                f"export expects ObservedData or IVData, got {type(data).__name__}"
            )
