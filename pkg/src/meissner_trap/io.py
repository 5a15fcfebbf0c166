"""CSV and key=value report I/O with atomic writes."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

FLOAT_FORMAT = "%.9e"


def atomic_write_text(path, text: str) -> Path:
    """Write ``text`` to a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def format_csv(header, rows, schema: str) -> str:
    """CSV text: ``# schema=...`` line, header line, ``%.9e`` rows."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size and rows.shape[1] != len(header):
        raise ValueError(f"{len(header)} columns in header but rows have {rows.shape[1]}")
    lines = [f"# schema={schema}", ",".join(header)]
    lines += [",".join(FLOAT_FORMAT % v for v in row) for row in rows if row.size]
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows, schema: str) -> Path:
    return atomic_write_text(path, format_csv(header, rows, schema))


def read_csv(path, expected=None):
    """Return ``(header, data)``; comment lines starting with ``#`` are skipped.

    ``expected`` is an optional list of required column names; the returned
    data then holds those columns in that order.
    """
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines()
             if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty CSV")
    header = [h.strip() for h in lines[0].split(",")]
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    data = data.reshape(-1, len(header))
    if expected is not None:
        missing = [c for c in expected if c not in header]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        data = data[:, [header.index(c) for c in expected]]
        header = list(expected)
    return header, data


def format_report(items: dict) -> str:
    """``key=value`` lines; floats use ``%.9e``."""
    out = []
    for k, v in items.items():
        if isinstance(v, (float, np.floating)):
            v = FLOAT_FORMAT % v
        out.append(f"{k}={v}")
    return "\n".join(out) + "\n"


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out
