"""JSON input and output for matrices, generating sets and reports."""

import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Union

import numpy as np

from fj_workbench.base.group_core import GeneratingSet, GroupElement, IntMatrix
from fj_workbench.errors import InvalidDescriptor

Source = Union[str, Path, dict, list]


class WorkbenchEncoder(json.JSONEncoder):
    """Writes exact numbers as decimal strings and numpy scalars as plain numbers."""

    def default(self, o: Any) -> Any:
        if isinstance(o, Fraction):
            return str(o)
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, (set, frozenset)):
            return sorted(o, key=repr)
        if hasattr(o, "to_dict"):
            return o.to_dict()
        return super().default(o)


def dumps(data: Any) -> str:
    return json.dumps(data, indent=2, cls=WorkbenchEncoder)


def load_json(source: Source) -> Any:
    """Parsed JSON from a path, a JSON string, or an already parsed value."""
    if isinstance(source, (dict, list)):
        return source
    text = str(source)
    path = Path(text)
    try:
        if path.suffix == ".json" or path.exists():
            text = path.read_text()
        return json.loads(text)
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidDescriptor(f"Cannot read JSON from {source!r}: {e}") from e


def parse_matrix(source: Source) -> IntMatrix:
    """Matrix from {"n": .., "rows": [[..]]}, a bare list of rows, or whitespace-separated text.

    Raises:
        InvalidDescriptor: If the input is not a square integer matrix.
    """
    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith(("{", "[")):
        path = Path(str(source))
        text = path.read_text() if path.exists() else str(source)
        if not text.lstrip().startswith(("{", "[")):
            rows = [line.split() for line in text.strip().splitlines() if line.strip()]
            return _matrix_from_rows(rows)
        source = text
    data = load_json(source)
    if isinstance(data, dict):
        rows = data.get("rows")
        matrix = _matrix_from_rows(rows)
        if "n" in data and int(data["n"]) != matrix.n:
            raise InvalidDescriptor(f"Declared n={data['n']} but got {matrix.n} rows")
        return matrix
    return _matrix_from_rows(data)


def _matrix_from_rows(rows: Any) -> IntMatrix:
    try:
        return IntMatrix.from_rows(rows)
    except (TypeError, ValueError) as e:
        raise InvalidDescriptor(f"Matrix rows must be integers: {e}") from e
    except Exception as e:
        raise InvalidDescriptor(f"Invalid matrix: {e}") from e


def parse_element(data: Any) -> GroupElement:
    """Element from {"v": [..], "k": ..} or [[..], k]."""
    try:
        if isinstance(data, dict):
            return GroupElement.make(data["v"], data["k"])
        v, k = data
        return GroupElement.make(v, k)
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidDescriptor(f"Invalid group element {data!r}: {e}") from e


def parse_generating_set(source: Source) -> GeneratingSet:
    data = load_json(source)
    if isinstance(data, dict):
        data = data.get("elements", data.get("S"))
    if not isinstance(data, list):
        raise InvalidDescriptor("A generating set is a list of elements")
    return GeneratingSet(tuple(parse_element(g) for g in data))
