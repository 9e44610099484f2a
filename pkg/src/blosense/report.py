"""Persisting results as CSV + manifest, or as a single JSON document.

CSV: UTF-8, one header row, axis column first and then the series in the
order listed by the manifest's ``columns`` key. Floats are written with
``repr`` so that reading back is bit-exact.

Manifest: one ``key = value`` per line, each value a JSON literal.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import ResultTable

FORMAT_VERSION = 1
RESERVED = ("format_version", "kind", "software_version", "axis", "columns")


class ReportError(OSError):
    pass


def _manifest(table: ResultTable) -> dict:
    clash = set(RESERVED) & set(table.metadata)
    if clash:
        raise ValueError(f"metadata uses reserved manifest keys: {sorted(clash)}")
    head = {
        "format_version": FORMAT_VERSION,
        "kind": table.kind,
        "software_version": __version__,
        "axis": table.axis_name,
        "columns": list(table.columns),
    }
    return {**head, **table.metadata}


def _scalar(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


def write_report(result, path, fmt: str = "csv") -> list[Path]:
    """Write ``result`` into directory ``path``; returns the files written."""
    table = result.to_table()
    out = Path(path)
    manifest = {k: _scalar(v) for k, v in _manifest(table).items()}
    try:
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            doc = {
                "manifest": manifest,
                "data": {table.axis_name: table.axis.tolist(),
                         **{k: v.tolist() for k, v in table.columns.items()}},
            }
            target = out / f"{table.kind}.json"
            target.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
            return [target]
        if fmt != "csv":
            raise ValueError(f"unknown report format {fmt!r}")
        csv_path = out / f"{table.kind}.csv"
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([table.axis_name, *table.columns])
            cols = [table.axis, *table.columns.values()]
            for row in zip(*cols):
                w.writerow([repr(float(x)) for x in row])
        man_path = out / f"{table.kind}.manifest"
        with open(man_path, "w", encoding="utf-8", newline="\n") as fh:
            for key, value in manifest.items():
                fh.write(f"{key} = {json.dumps(value)}\n")
        return [csv_path, man_path]
    except OSError as exc:
        raise ReportError(f"{out}: cannot write report: {exc.strerror or exc}") from exc


def read_manifest(path) -> dict:
    path = Path(path)
    manifest = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            key, sep, value = line.partition(" = ")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            manifest[key] = json.loads(value)
    return manifest


def _table(manifest: dict, data: dict) -> ResultTable:
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported report format_version {version!r}")
    axis = manifest["axis"]
    meta = {k: v for k, v in manifest.items() if k not in RESERVED}
    columns = {name: data[name] for name in manifest["columns"]}
    return ResultTable(manifest["kind"], axis, data[axis], columns, meta)


def read_report(path) -> ResultTable:
    """Read a ``.csv`` (with sibling ``.manifest``) or ``.json`` report."""
    path = Path(path)
    if path.suffix == ".json":
        doc = json.loads(path.read_text(encoding="utf-8"))
        return _table(doc["manifest"], {k: np.array(v, dtype=float) for k, v in doc["data"].items()})
    manifest = read_manifest(path.with_suffix(".manifest"))
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    expected = [manifest["axis"], *manifest["columns"]]
    if header != expected:
        raise ValueError(f"{path}: header {header} does not match manifest order {expected}")
    values = np.array([[float(x) for x in row] for row in body], dtype=float).reshape(len(body), len(header))
    return _table(manifest, {name: values[:, i] for i, name in enumerate(header)})
