__all__ = ["ResultTable", "read_table", "write_table"]

import csv
import gzip
import io
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mflqr.conf import settings
from mflqr.exceptions import ShapeException
from mflqr.logger import logger

HEADER_TITLE = "mflqr result table"


@dataclass(frozen=True)
class ResultTable:
    """
    Named real columns with a metadata header.

    :ivar columns: Column names; the first one is the row index (``t`` or ``lambda``).
    :ivar data: Rows × columns array.
    :ivar metadata: Written as ``# key: value`` comment lines, in insertion order.
    """

    columns: tuple[str, ...]
    data: np.ndarray
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 1 and len(self.columns) == 1:
            data = data.reshape(-1, 1)
        if data.ndim != 2 or data.shape[1] != len(self.columns):
            raise ShapeException(
                ShapeException.ERRORS.DIMENSION_MISMATCH,
                f"{len(self.columns)} columns but data of shape {data.shape}.",
            )
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "data", data)

    @classmethod
    def from_columns(cls, columns: dict[str, np.ndarray], metadata: dict | None = None) -> "ResultTable":
        """Build from a mapping of equally long 1-D columns."""
        lengths = {len(v) for v in columns.values()}
        if len(lengths) > 1:
            raise ShapeException(ShapeException.ERRORS.DIMENSION_MISMATCH, f"Column lengths {sorted(lengths)}.")
        data = np.column_stack([np.asarray(v, dtype=np.float64) for v in columns.values()])
        return cls(tuple(columns), data, {k: str(v) for k, v in (metadata or {}).items()})

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]


def _get_fh(path: str, mode="r"):
    """Return a text handle for ``path``, gzip compressed when it ends in ``.gz``.

    Compressed files are written with a zero timestamp so equal tables give equal bytes.
    """
    if path.endswith(".gz"):
        raw = gzip.GzipFile(filename=os.path.basename(path), fileobj=open(path, mode + "b"), mode=mode + "b", mtime=0)
        return io.TextIOWrapper(raw, encoding="utf-8", newline="")
    return open(path, mode=mode, encoding="utf-8", newline="")


def _close(fh):
    raw = getattr(fh, "buffer", None)
    fileobj = getattr(raw, "fileobj", None)
    fh.close()
    if fileobj is not None:
        fileobj.close()


def write_table(table: ResultTable, path: str | Path, makedir: bool = True):
    """
    Write ``table`` as CSV with ``#`` comment header lines.

    Floats use ``settings.CSV_FLOAT_FORMAT``, which round trips float64.
    """
    path = str(path)
    if makedir and os.path.dirname(path):
        os.makedirs(os.path.dirname(path), exist_ok=True)
    fmt = settings.CSV_FLOAT_FORMAT
    fh = _get_fh(path, "w")
    try:
        fh.write(f"# {HEADER_TITLE}\n")
        for key, value in table.metadata.items():
            fh.write(f"# {key}: {value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.data:
            writer.writerow([fmt % value for value in row])
    finally:
        _close(fh)
    logger.info("Table with {} rows saved in {}", table.n_rows, path)


def read_table(path: str | Path) -> ResultTable:
    """Read a table written by :func:`write_table`."""
    path = str(path)
    fh = _get_fh(path, "r")
    try:
        metadata = {}
        lines = []
        for line in fh:
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition(":")
                if sep:
                    metadata[key.strip()] = value.strip()
            elif line.strip():
                lines.append(line)
    finally:
        _close(fh)
    reader = csv.reader(lines)
    columns = tuple(next(reader))
    rows = [[float(value) for value in row] for row in reader]
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(columns))
    logger.debug("Table with {} rows loaded from {}", len(rows), path)
    return ResultTable(columns, data, metadata)
