"""File formats: JSON unitary grids and reports, CSV tables, atomic writes.

A grid file is a JSON object::

    {"n": 2, "dims": [N1, N2, N3], "periodic": [true, true, true],
     "samples": [[[[re, im], ...], ...], ...]}

with ``samples`` the row-major list of ``N1 N2 N3`` matrices, each a list of
``n`` rows of ``[re, im]`` pairs.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import InvalidGrid, W3Error
from .spectral import EPS_UNITARY, UnitaryGrid


class FormatError(W3Error):
    """A file could not be read or does not follow the expected layout."""


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def grid_to_dict(grid: UnitaryGrid) -> dict:
    samples = grid.samples.reshape(-1, grid.n, grid.n)
    pairs = np.stack([samples.real, samples.imag], axis=-1)
    return {
        "n": grid.n,
        "dims": list(grid.dims),
        "periodic": list(grid.periodic),
        "samples": pairs.tolist(),
    }


def grid_from_dict(data: dict, eps_unitary: float = EPS_UNITARY) -> UnitaryGrid:
    try:
        n = int(data["n"])
        dims = tuple(int(d) for d in data["dims"])
        periodic = tuple(bool(p) for p in data.get("periodic", (True, True, True)))
        raw = np.asarray(data["samples"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed grid file: {exc}") from exc
    if len(dims) != 3 or len(periodic) != 3:
        raise FormatError("dims and periodic must have three entries")
    expected = (int(np.prod(dims)), n, n, 2)
    if raw.shape != expected:
        raise FormatError(f"payload has shape {raw.shape}, expected {expected} for dims {dims} and n = {n}")
    samples = (raw[..., 0] + 1j * raw[..., 1]).reshape(*dims, n, n)
    return UnitaryGrid(samples, periodic=periodic, eps_unitary=eps_unitary)


def save_grid(grid: UnitaryGrid, path) -> None:
    # repr of a float round-trips exactly, so reloaded grids are bit-identical
    atomic_write_text(path, json.dumps(grid_to_dict(grid)))


def load_grid(path, eps_unitary: float = EPS_UNITARY) -> UnitaryGrid:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from exc
    try:
        return grid_from_dict(data, eps_unitary)
    except InvalidGrid:
        raise
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def dumps_report(report: dict) -> str:
    return json.dumps(_jsonable(report), indent=2, sort_keys=False) + "\n"


def write_report(report: dict, path) -> None:
    atomic_write_text(path, dumps_report(report))


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_jsonable(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    atomic_write_text(path, csv_text(header, rows))
