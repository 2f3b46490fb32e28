"""CSV and JSON interchange.

Floats are written with 17 significant digits so a round trip reproduces
the exact binary value.
"""

from __future__ import annotations

import contextlib
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .mixture import LabeledSample, MixtureModel

PathLike = Union[str, Path]


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


@contextlib.contextmanager
def _open_out(path: PathLike):
    if str(path) == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _write_rows(path: PathLike, header: Sequence[str], rows) -> None:
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _read_table(path: PathLike) -> tuple[list, list]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty CSV file") from None
        rows = [r for r in reader if r]
    bad = [i for i, r in enumerate(rows, start=2) if len(r) != len(header)]
    if bad:
        raise ValueError(f"{path}: line {bad[0]} has the wrong number of fields")
    return header, rows


def write_sample_csv(path: PathLike, sample: LabeledSample, with_labels: bool = True) -> None:
    d = sample.points.shape[1]
    header = [f"x{j + 1}" for j in range(d)] + (["label"] if with_labels else [])
    if with_labels:
        rows = ([*p, int(z)] for p, z in zip(sample.points, sample.labels))
    else:
        rows = (list(p) for p in sample.points)
    _write_rows(path, header, rows)


def read_sample_csv(path: PathLike) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Points and (if the file has a ``label`` column) labels."""
    header, rows = _read_table(path)
    xcols = [i for i, h in enumerate(header) if h.startswith("x")]
    if not xcols:
        raise ValueError(f"{path}: expected columns x1..xd")
    try:
        data = np.array([[float(r[i]) for i in xcols] for r in rows], dtype=np.float64)
        labels = None
        if "label" in header:
            j = header.index("label")
            labels = np.array([int(r[j]) for r in rows], dtype=np.int64)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc
    return data.reshape(len(rows), len(xcols)), labels


def write_posteriors_csv(path: PathLike, posteriors) -> None:
    T = np.asarray(posteriors, dtype=np.float64)
    _write_rows(path, [f"tau_{p + 1}" for p in range(T.shape[1])], T.tolist())


def read_posteriors_csv(path: PathLike) -> np.ndarray:
    header, rows = _read_table(path)
    if not header or not all(h.startswith("tau_") for h in header):
        raise ValueError(f"{path}: expected header tau_1,...,tau_P")
    try:
        T = np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc
    return T.reshape(len(rows), len(header))


def write_predictions_csv(path: PathLike, labels) -> None:
    _write_rows(path, ["label"], ([int(z)] for z in labels))


def read_label_column(path: PathLike) -> np.ndarray:
    """The ``label`` column of a prediction or sample file."""
    header, rows = _read_table(path)
    if "label" not in header:
        raise ValueError(f"{path}: no 'label' column")
    j = header.index("label")
    try:
        return np.array([int(r[j]) for r in rows], dtype=np.int64)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def write_json(path: PathLike, obj) -> None:
    with _open_out(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_model_json(path: PathLike) -> MixtureModel:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    return MixtureModel.from_dict(data)


def write_model_json(path: PathLike, model: MixtureModel) -> None:
    write_json(path, model.to_dict())


def write_records_csv(path: PathLike, records: Sequence[dict], columns: Optional[Sequence[str]] = None) -> None:
    if columns is None:
        columns = list(dict.fromkeys(k for rec in records for k in rec))
    _write_rows(path, columns, ([rec.get(c, "") for c in columns] for rec in records))
