"""Reading and writing trees, forests, paths and reports."""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .coding import LatticePath
from .errors import ParseError, ValidationError
from .stable import RealPath
from .trees import Forest, UlamHarrisTree

FORMATS = ("tree-json", "forest-json", "path-csv", "report-json")


# -- trees -------------------------------------------------------------------------

def tree_to_json(tree: UlamHarrisTree) -> str:
    return json.dumps({"child_counts": list(tree.child_counts)})


def _counts_field(obj, where="child_counts"):
    if not isinstance(obj, dict) or "child_counts" not in obj:
        raise ParseError("missing 'child_counts'", field=where)
    counts = obj["child_counts"]
    if not isinstance(counts, list) or not all(
        isinstance(c, int) and not isinstance(c, bool) for c in counts
    ):
        raise ParseError("child_counts must be a list of integers", field=where)
    return counts


def _load_json(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc


def tree_from_json(text: str) -> UlamHarrisTree:
    counts = _counts_field(_load_json(text))
    try:
        return UlamHarrisTree(tuple(counts))
    except ValidationError as exc:
        raise ParseError(str(exc), field="child_counts") from exc


def forest_to_json(forest: Forest) -> str:
    return json.dumps({"trees": [{"child_counts": list(t.child_counts)} for t in forest.trees]})


def forest_from_json(text: str) -> Forest:
    obj = _load_json(text)
    if not isinstance(obj, dict) or not isinstance(obj.get("trees"), list):
        raise ParseError("missing 'trees' list", field="trees")
    trees = []
    for i, item in enumerate(obj["trees"]):
        where = f"trees[{i}].child_counts"
        counts = _counts_field(item, where)
        try:
            trees.append(UlamHarrisTree(tuple(counts)))
        except ValidationError as exc:
            raise ParseError(str(exc), field=where) from exc
    try:
        return Forest(tuple(trees))
    except ValidationError as exc:
        raise ParseError(str(exc), field="trees") from exc


# -- paths -------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def lattice_path_to_csv(path: LatticePath) -> str:
    lines = ["index,value"]
    lines.extend(f"{i},{int(v)}" for i, v in enumerate(path.values))
    return "\n".join(lines) + "\n"


def real_path_to_csv(path: RealPath) -> str:
    lines = ["t,value"]
    lines.extend(f"{_fmt(t)},{_fmt(v)}" for t, v in zip(path.times, path.values))
    return "\n".join(lines) + "\n"


def path_to_csv(path) -> str:
    if isinstance(path, LatticePath):
        return lattice_path_to_csv(path)
    if isinstance(path, RealPath):
        return real_path_to_csv(path)
    raise TypeError(f"cannot write {type(path).__name__} as a path")


def path_from_csv(text: str):
    """Read a discrete (``index,value``) or real (``t,value``) path."""
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if not rows:
        raise ParseError("empty path file", line=1)
    header = [h.strip() for h in rows[0]]
    if header not in (["index", "value"], ["t", "value"]):
        raise ParseError(f"unexpected header {','.join(header)!r}", line=1)
    if len(rows) < 2:
        raise ParseError("path file has no data rows", line=2)
    first, second = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", line=lineno)
        for name, cell, out in zip(header, row, (first, second)):
            try:
                out.append(int(cell) if header[0] == "index" else float(cell))
            except ValueError as exc:
                raise ParseError(f"bad number {cell!r}", line=lineno, field=name) from exc
    if header[0] == "index":
        if first != list(range(len(first))):
            bad = next(i for i, v in enumerate(first) if v != i)
            raise ParseError("indices must be 0, 1, 2, ...", line=bad + 2, field="index")
        try:
            return LatticePath(second)
        except ValidationError as exc:
            raise ParseError(str(exc), field="value") from exc
    t = np.array(first)
    if t.size < 2:
        raise ParseError("a real path needs at least two rows", line=2)
    step = (t[-1] - t[0]) / (t.size - 1)
    if t[0] != 0 or step <= 0 or np.max(np.abs(np.diff(t) - step)) > 1e-9 * max(1.0, t[-1]):
        raise ParseError("times must form a uniform grid starting at 0", field="t")
    return RealPath(float(t[-1]), float(step), np.array(second))


# -- reports and matrices --------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def report_to_json(report: dict) -> str:
    return json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> dict:
    obj = _load_json(text)
    if not isinstance(obj, dict):
        raise ParseError("report must be a JSON object")
    return obj


def matrix_to_csv(matrix) -> str:
    return "\n".join(",".join(_fmt(x) for x in row) for row in np.asarray(matrix)) + "\n"


def serialize(obj, fmt: str) -> bytes:
    if fmt == "tree-json":
        text = tree_to_json(obj)
    elif fmt == "forest-json":
        text = forest_to_json(obj)
    elif fmt == "path-csv":
        text = path_to_csv(obj)
    elif fmt == "report-json":
        text = report_to_json(obj)
    else:
        raise ValidationError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")
    return text.encode()


def deserialize(data, fmt: str):
    text = data.decode() if isinstance(data, bytes) else data
    readers = {
        "tree-json": tree_from_json,
        "forest-json": forest_from_json,
        "path-csv": path_from_csv,
        "report-json": report_from_json,
    }
    if fmt not in readers:
        raise ValidationError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")
    return readers[fmt](text)
