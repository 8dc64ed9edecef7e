"""CSV and config-file formats.

Dense signal files have no header: one row per node, one column per
realization. Sparse kernel and complex files carry a header and 0-based
indices:

========================  =============
file                      header
========================  =============
edges                     ``i,j,w``
triangles                 ``i,j,k,w``
sparse ``H1``             ``i,j,w``
sparse ``H2``             ``k,i,j,w``  (entry ``H2[k, i*n + j]``)
========================  =============

Floats are written with ``repr`` so a write/read cycle is bit-exact.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .complex import Sc2


class InputError(ValueError):
    """Malformed or inconsistent input file."""


def _float(text: str, where: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise InputError(f"{where}: cannot parse {text!r} as a number") from None
    if not math.isfinite(val):
        raise InputError(f"{where}: non-finite value {text!r}")
    return val


def _int(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise InputError(f"{where}: cannot parse {text!r} as an integer") from None


def _open(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    return path.open(newline="")


def read_dense(path) -> np.ndarray:
    rows = []
    with _open(path) as fh:
        for r, line in enumerate(csv.reader(fh)):
            if not line:
                continue
            rows.append([_float(t, f"{path}: row {r}, column {c}") for c, t in enumerate(line)])
    if not rows:
        raise InputError(f"{path}: empty file")
    width = len(rows[0])
    for r, row in enumerate(rows):
        if len(row) != width:
            raise InputError(f"{path}: row {r} has {len(row)} columns, expected {width}")
    return np.array(rows, dtype=float)


def write_dense(path, a: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        for row in np.asarray(a, dtype=float):
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def _read_table(path, header: list[str]) -> list[tuple[list[str], str]]:
    with _open(path) as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head is None or [h.strip() for h in head] != header:
            raise InputError(f"{path}: expected header {','.join(header)}, got {head}")
        out = []
        for r, line in enumerate(reader, start=1):
            if not line:
                continue
            if len(line) != len(header):
                raise InputError(f"{path}: row {r} has {len(line)} fields, expected {len(header)}")
            out.append((line, f"{path}: row {r}"))
        return out


def _node(text: str, n: int, where: str) -> int:
    i = _int(text, where)
    if not 0 <= i < n:
        raise InputError(f"{where}: node {i} out of range for n={n}")
    return i


def _write_table(path, header: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            *idx, w = row
            fh.write(",".join([*(str(int(i)) for i in idx), repr(float(w))]) + "\n")


def write_sc2(edges_path, triangles_path, sc: Sc2) -> None:
    _write_table(edges_path, "i,j,w", ((i, j, w) for (i, j), w in sorted(sc.edges.items())))
    _write_table(
        triangles_path, "i,j,k,w", ((i, j, k, w) for (i, j, k), w in sorted(sc.triangles.items()))
    )


def read_sc2(n: int, edges_path, triangles_path=None) -> Sc2:
    edges = {}
    for line, where in _read_table(edges_path, ["i", "j", "w"]):
        i, j = (_node(t, n, where) for t in line[:2])
        if i == j:
            raise InputError(f"{where}: self-loop on node {i}")
        edges[(min(i, j), max(i, j))] = _float(line[2], where)
    tris = {}
    if triangles_path is not None:
        for line, where in _read_table(triangles_path, ["i", "j", "k", "w"]):
            t = tuple(sorted(_node(s, n, where) for s in line[:3]))
            if len(set(t)) != 3:
                raise InputError(f"{where}: degenerate triangle {t}")
            for e in ((t[0], t[1]), (t[0], t[2]), (t[1], t[2])):
                if e not in edges:
                    raise InputError(f"{where}: triangle {t} lacks edge {e}")
            tris[t] = _float(line[3], where)
    return Sc2(n, edges, tris)


def write_sparse_h1(path, h1: np.ndarray) -> None:
    h1 = np.asarray(h1)
    _write_table(path, "i,j,w", ((i, j, h1[i, j]) for i, j in zip(*np.nonzero(h1))))


def write_sparse_h2(path, h2: np.ndarray) -> None:
    h2 = np.asarray(h2)
    n = h2.shape[0]
    rows = ((k, c // n, c % n, h2[k, c]) for k, c in zip(*np.nonzero(h2)))
    _write_table(path, "k,i,j,w", rows)


def read_sparse_h1(path, n: int) -> np.ndarray:
    h1 = np.zeros((n, n))
    for line, where in _read_table(path, ["i", "j", "w"]):
        i, j = (_node(t, n, where) for t in line[:2])
        h1[i, j] = _float(line[2], where)
    return h1


def read_sparse_h2(path, n: int) -> np.ndarray:
    h2 = np.zeros((n, n * n))
    for line, where in _read_table(path, ["k", "i", "j", "w"]):
        k, i, j = (_node(t, n, where) for t in line[:3])
        h2[k, i * n + j] = _float(line[3], where)
    return h2


def read_config(path) -> dict[str, str]:
    """Parse ``section.key = value`` lines; ``#`` starts a comment."""
    out = {}
    with _open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}: line {lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            if not key:
                raise InputError(f"{path}: line {lineno}: empty key")
            out[key] = val
    return out
