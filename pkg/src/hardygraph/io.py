"""Plain-text graph files and CSV output.

Graph file lines::

    # comment
    v <id> <m> <c>
    e <id1> <id2> <b>

Vertex order of appearance is the canonical order. Floats are written with
17 significant digits so that a write/read round trip is exact.
"""
from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .graph import GraphError, WeightedGraph, build_graph


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def csv_cell(x) -> str:
    """Shortest string that round-trips exactly (``repr``) for floats."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return fmt(x)


def dumps_graph(G: WeightedGraph, header=()) -> str:
    out = io.StringIO()
    for line in header:
        out.write(f"# {line}\n")
    out.write(f"# vertices={G.n} edges={G.n_edges}\n")
    for vid, mv, cv in zip(G.ids, G.m, G.c):
        out.write(f"v {vid} {fmt(mv)} {fmt(cv)}\n")
    for i, j, w in G.edges():
        out.write(f"e {G.ids[i]} {G.ids[j]} {fmt(w)}\n")
    return out.getvalue()


def loads_graph(text: str) -> WeightedGraph:
    vertices, edges = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if parts[0] == "v" and len(parts) == 4:
                vertices.append((parts[1], float(parts[2]), float(parts[3])))
            elif parts[0] == "e" and len(parts) == 4:
                edges.append((parts[1], parts[2], float(parts[3])))
            else:
                raise ValueError
        except ValueError:
            raise GraphError(f"line {lineno}: cannot parse {raw!r}") from None
    return build_graph(vertices, edges)


def write_graph(path, G: WeightedGraph, header=()) -> Path:
    return atomic_write_text(path, dumps_graph(G, header))


def read_graph(path) -> WeightedGraph:
    return loads_graph(Path(path).read_text(encoding="utf-8"))


def atomic_write_text(path, text: str) -> Path:
    """Write via a temporary file in the target directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([csv_cell(v) for v in row])
    return atomic_write_text(path, buf.getvalue())
