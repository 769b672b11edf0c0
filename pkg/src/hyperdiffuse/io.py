"""Text file formats.

Hypergraph file::

    N M
    w(e) v0:q0 v1:q1 ...      (one line per hyperedge)

Features are headerless CSV (N rows, d columns); labels are CSV lines
``vertex,label`` (a ``vertex,label`` header line is tolerated); a split
file lists whitespace-separated training vertex indices.
"""
from __future__ import annotations

import csv
import io as _io
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .hypergraph import Hypergraph

FLOAT_FMT = "%.17g"


def fmt(x: float) -> str:
    return FLOAT_FMT % x


def _open_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc


def write_hypergraph(h: Hypergraph, path) -> None:
    lines = [f"{h.num_vertices} {h.num_edges}"]
    for e in range(h.num_edges):
        members, weights = h.edge(e)
        items = " ".join(f"{v}:{fmt(q)}" for v, q in zip(members.tolist(), weights.tolist()))
        lines.append(f"{fmt(h.edge_weights[e])} {items}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_hypergraph(text: str, source: str = "<string>") -> Hypergraph:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise DataError(f"{source}: empty hypergraph file")
    try:
        n, m = (int(x) for x in lines[0].split())
    except ValueError as exc:
        raise DataError(f"{source}: header must be 'N M', got {lines[0]!r}") from exc
    body = lines[1:]
    if len(body) != m:
        raise DataError(f"{source}: header declares {m} hyperedges, found {len(body)} lines")
    edges, weights = [], []
    for lineno, line in enumerate(body, start=2):
        tokens = line.split()
        try:
            weights.append(float(tokens[0]))
            edge = []
            for tok in tokens[1:]:
                v, q = tok.split(":")
                edge.append((int(v), float(q)))
        except (ValueError, IndexError) as exc:
            raise DataError(f"{source}:{lineno}: malformed hyperedge line {line!r}") from exc
        edges.append(edge)
    return Hypergraph(n, edges, weights)


def read_hypergraph(path) -> Hypergraph:
    return parse_hypergraph(_open_text(path), str(path))


def read_features(path) -> np.ndarray:
    text = _open_text(path)
    try:
        X = np.loadtxt(_io.StringIO(text), delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: malformed feature CSV ({exc})") from exc
    if not np.all(np.isfinite(X)):
        raise DataError(f"{path}: features contain non-finite values")
    return X


def write_matrix_csv(A, path) -> None:
    np.savetxt(path, np.asarray(A, dtype=np.float64), delimiter=",", fmt=FLOAT_FMT)


def read_labels(path, num_vertices: int) -> np.ndarray:
    """Length-N label vector; vertices absent from the file are unlabeled (-1)."""
    labels = np.full(num_vertices, -1, dtype=np.int64)
    for lineno, row in enumerate(csv.reader(_open_text(path).splitlines()), start=1):
        if not row or not "".join(row).strip():
            continue
        try:
            v, y = int(row[0]), int(row[1])
        except (ValueError, IndexError) as exc:
            if lineno == 1:
                continue  # header
            raise DataError(f"{path}:{lineno}: expected 'vertex,label', got {row!r}") from exc
        if not 0 <= v < num_vertices:
            raise DataError(f"{path}:{lineno}: vertex {v} outside [0, {num_vertices})")
        labels[v] = y
    return labels


def write_labels(labels, path) -> None:
    lines = ["vertex,label"] + [f"{v},{y}" for v, y in enumerate(np.asarray(labels).tolist()) if y >= 0]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_split(path) -> np.ndarray:
    try:
        return np.array([int(tok) for tok in _open_text(path).split()], dtype=np.int64)
    except ValueError as exc:
        raise DataError(f"{path}: split file must hold integer vertex indices") from exc


def read_splits(directory) -> list[tuple[str, np.ndarray]]:
    """All split files in ``directory`` sorted by name."""
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"split directory {d} does not exist")
    files = sorted(p for p in d.iterdir() if p.is_file() and not p.name.startswith("."))
    if not files:
        raise DataError(f"split directory {d} holds no split files")
    return [(p.stem, read_split(p)) for p in files]


def write_split(train_idx, path) -> None:
    Path(path).write_text(" ".join(str(int(v)) for v in train_idx) + "\n", encoding="utf-8")


def write_rows_csv(rows: Sequence[dict], path, columns: Sequence[str] | None = None) -> None:
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
