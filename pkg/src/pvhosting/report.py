"""
Deterministic JSON/CSV emission.

Floats are written with 17 significant digits (round-trip exact), JSON keys
are sorted, and every file ends with a newline, so identical inputs give
byte-identical files.  Files are staged in a temporary directory and moved
into place only when the whole command succeeded.
"""
from __future__ import annotations

import json
import math
import os
import shutil
import tempfile
from contextlib import contextmanager
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError

__all__ = ["LOCUS_HEADER", "dumps_json", "format_float", "csv_text", "staged_output"]

LOCUS_HEADER = ("count", "branch_id", "re_rad_s", "im_rad_s")


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise InputError(f"cannot emit non-finite value {x}")
    if x == 0:
        return "0.0"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _emit(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted((str(k), v) for k, v in obj.items())
        body = ",\n".join(f"{pad}{json.dumps(k)}: {_emit(v, indent, level + 1)}" for k, v in items)
        return "{\n" + body + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        body = ",\n".join(pad + _emit(v, indent, level + 1) for v in obj)
        return "[\n" + body + "\n" + end + "]"
    raise InputError(f"cannot emit object of type {type(obj).__name__}")


def dumps_json(obj, indent: int = 2) -> str:
    """JSON text with sorted keys and 17-digit floats, newline terminated."""
    return _emit(obj, indent, 0) + "\n"


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    lines += [",".join(_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


@contextmanager
def staged_output(directory: str):
    """Yield a writer ``put(name, text)``; commit all files on success only.

    Files are written to a temporary directory beside ``directory`` and
    moved over on exit.  On any exception nothing reaches ``directory``.
    """
    target = os.path.abspath(directory)
    os.makedirs(target, exist_ok=True)
    stage = tempfile.mkdtemp(prefix=".staging-", dir=target)
    names: list = []

    def put(name: str, text: str):
        if os.path.basename(name) != name:
            raise InputError(f"output name {name!r} must be a plain file name")
        with open(os.path.join(stage, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        names.append(name)

    try:
        yield put
        for name in names:
            os.replace(os.path.join(stage, name), os.path.join(target, name))
    finally:
        shutil.rmtree(stage, ignore_errors=True)
