"""File formats: headered CSV tables, JSON documents and persisted proposal sets.

Floats are written with ``repr`` (shortest round-trip form), so reloading a
file and writing it again reproduces it byte for byte. Infinite values are
written as the string ``inf``. All files are UTF-8 with LF line endings.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .engine import ProposalRecord


def fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if value is None:
        return ""
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def write_dict_rows(path: str | Path, header: Sequence[str], rows: Iterable[dict]) -> Path:
    return write_csv(path, header, ([r[h] for h in header] for r in rows))


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return None
        return v
    return obj


def write_json(path: str | Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_jsonable(payload), indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def save_proposals(records: Sequence[ProposalRecord], directory: str | Path) -> Path:
    """Write ``index.csv`` (t, theta columns, data path) plus one CSV per record."""
    directory = Path(directory)
    data_dir = directory / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    dim = np.asarray(records[0].theta).size
    rows = []
    for rec in records:
        rel = f"data/{rec.index:07d}.csv"
        pts = np.asarray(rec.pseudo_data, dtype=float)
        lines = [",".join(fmt(float(v)) for v in row) for row in pts]
        (directory / rel).write_text("\n".join(lines) + "\n", encoding="utf-8")
        rows.append([rec.index, *np.asarray(rec.theta, dtype=float).tolist(), rel])
    return write_csv(directory / "index.csv", ["t", *[f"theta_{i}" for i in range(dim)], "data_path"], rows)


def load_proposals(index_path: str | Path) -> list[ProposalRecord]:
    index_path = Path(index_path)
    records = []
    for row in read_csv(index_path):
        theta_keys = sorted((k for k in row if k.startswith("theta_")), key=lambda k: int(k.split("_")[1]))
        theta = np.array([float(row[k]) for k in theta_keys])
        data = np.loadtxt(index_path.parent / row["data_path"], delimiter=",", ndmin=2)
        records.append(ProposalRecord(int(row["t"]), theta, data))
    return records
