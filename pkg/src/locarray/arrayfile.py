"""Reading and writing arrays.

Text format::

    N k v t lambda
    <N lines of k space-separated levels>

Lines starting with ``#`` are ignored.  The JSON variant holds the same
fields plus free-form metadata (generator, seed, timings).
"""

from __future__ import annotations

import io
import json
import os
import tempfile
from pathlib import Path
from typing import IO, Any, Union

import numpy as np

from .model import Params, TestArray

SCHEMA_VERSION = 1

PathOrFile = Union[str, os.PathLike, IO[str]]


class ArrayFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _read_text(source: PathOrFile) -> str:
    if hasattr(source, "read"):
        return source.read()
    return Path(source).read_text()


def parse_array(text: str, d: int = 1) -> tuple[TestArray, dict[str, Any]]:
    """Parse either format; returns the array and any metadata found."""
    if text.lstrip().startswith("{"):
        return _parse_json(text, d)
    return _parse_text(text, d), {}


def read_array(source: PathOrFile, d: int = 1) -> TestArray:
    """Read an array file.  ``d`` is not stored in the file and defaults to 1."""
    return parse_array(_read_text(source), d)[0]


def read_array_with_metadata(source: PathOrFile, d: int = 1) -> tuple[TestArray, dict[str, Any]]:
    return parse_array(_read_text(source), d)


def _parse_text(text: str, d: int) -> TestArray:
    header = None
    rows: list[list[int]] = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            values = [int(tok) for tok in stripped.split()]
        except ValueError:
            raise ArrayFormatError(f"non-integer token in {stripped!r}", lineno) from None
        if header is None:
            if len(values) != 5:
                raise ArrayFormatError("header must be 'N k v t lambda'", lineno)
            header = values
            n, k, v, t, lam = header
            if n == 0:
                raise ArrayFormatError("zero rows", lineno)
            if min(header) < 0 or k < 1 or v < 2 or not 1 <= t <= k or lam < 1:
                raise ArrayFormatError(f"invalid header values {header}", lineno)
            continue
        n, k, v, t, lam = header
        if len(values) != k:
            raise ArrayFormatError(f"ragged row: expected {k} entries, got {len(values)}", lineno)
        bad = [x for x in values if not 0 <= x < v]
        if bad:
            raise ArrayFormatError(f"entry {bad[0]} outside [0, {v})", lineno)
        if len(rows) == n:
            raise ArrayFormatError(f"more than the declared {n} rows", lineno)
        rows.append(values)
    if header is None:
        raise ArrayFormatError("missing header")
    n, k, v, t, lam = header
    if len(rows) != n:
        raise ArrayFormatError(f"header declares {n} rows but {len(rows)} found")
    params = Params(k=k, v=v, t=t, d=d, lam=lam)
    return TestArray(np.array(rows, dtype=np.uint8), params)


def _parse_json(text: str, d: int) -> tuple[TestArray, dict[str, Any]]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArrayFormatError(exc.msg, exc.lineno) from None
    try:
        n, k, v, t, lam = (int(doc[key]) for key in ("N", "k", "v", "t", "lambda"))
        rows = doc["rows"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ArrayFormatError(f"missing or invalid field: {exc}") from None
    if n == 0:
        raise ArrayFormatError("zero rows")
    # reuse the text checks so both formats fail the same way
    body = "\n".join([f"{n} {k} {v} {t} {lam}"] + [" ".join(str(x) for x in row) for row in rows])
    array = _parse_text(body, d)
    meta = {key: value for key, value in doc.items() if key not in ("N", "k", "v", "t", "lambda", "rows")}
    return array, meta


def format_array(array: TestArray) -> str:
    p = array.params
    lines = [f"{array.N} {p.k} {p.v} {p.t} {p.lam}"]
    lines.extend(" ".join(str(int(x)) for x in row) for row in array.rows)
    return "\n".join(lines) + "\n"


def format_array_json(array: TestArray, metadata: dict[str, Any] | None = None) -> str:
    p = array.params
    doc: dict[str, Any] = {"schema": SCHEMA_VERSION, "N": array.N, "k": p.k, "v": p.v, "t": p.t, "lambda": p.lam}
    doc.update(metadata or {})
    doc["rows"] = array.rows.tolist()
    return json.dumps(doc, indent=None, separators=(",", ":")) + "\n"


def write_array(array: TestArray, sink: PathOrFile, metadata: dict[str, Any] | None = None,
                structured: bool = False) -> None:
    """Write ``array``; paths are written atomically via a temporary file."""
    text = format_array_json(array, metadata) if structured else format_array(array)
    if hasattr(sink, "write"):
        sink.write(text)
        return
    path = Path(sink)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with io.open(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
