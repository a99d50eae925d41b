"""Plain-text edge lists (``u v`` per line) and the small-graph corpus."""
from __future__ import annotations

import os
from pathlib import Path

from .lattice import Graph, InvalidSpecError


def read_edge_list(path) -> Graph:
    """Read a graph from ``u v`` lines.

    ``#`` starts a comment.  A line ``n N`` (before any edge) fixes the vertex
    count; otherwise it is one more than the largest vertex id.  Repeated
    edges are collapsed; self-loops are rejected.
    """
    n_declared = None
    edges = []
    seen = set()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "n":
                if edges or len(parts) != 2:
                    raise InvalidSpecError(f"{path}:{lineno}: vertex count must come first as 'n N'")
                n_declared = int(parts[1])
                continue
            if len(parts) != 2:
                raise InvalidSpecError(f"{path}:{lineno}: expected 'u v', got {raw.strip()!r}")
            u, v = int(parts[0]), int(parts[1])
            if u == v:
                raise InvalidSpecError(f"{path}:{lineno}: self-loop at {u}")
            if u < 0 or v < 0:
                raise InvalidSpecError(f"{path}:{lineno}: negative vertex id")
            key = (min(u, v), max(u, v))
            if key not in seen:
                seen.add(key)
                edges.append(key)
    n = max((max(e) for e in edges), default=-1) + 1
    if n_declared is not None:
        if n_declared < n:
            raise InvalidSpecError(f"{path}: declares {n_declared} vertices but uses vertex {n - 1}")
        n = n_declared
    if n == 0:
        raise InvalidSpecError(f"{path}: empty graph")
    return Graph(n, edges)


def write_edge_list(g: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"n {g.num_vertices}\n")
        for u, v in g.edges:
            fh.write(f"{int(u)} {int(v)}\n")


# small graphs for golden tests: name -> (vertex count, edges)
CORPUS = {
    "single_edge": (2, [(0, 1)]),
    "path3": (3, [(0, 1), (1, 2)]),
    "triangle": (3, [(0, 1), (1, 2), (0, 2)]),
    "star4": (5, [(0, 1), (0, 2), (0, 3), (0, 4)]),
    "square": (4, [(0, 1), (1, 2), (2, 3), (0, 3)]),
    "square_diag": (4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]),
    "k4": (4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),
    "cycle6": (6, [(i, (i + 1) % 6) for i in range(6)]),
    "bowtie": (5, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)]),
    "ladder2x4": (8, [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 7),
                      (0, 4), (1, 5), (2, 6), (3, 7)]),
    "petersen": (10, [(i, (i + 1) % 5) for i in range(5)]
                 + [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
                 + [(i, i + 5) for i in range(5)]),
    "isolated_plus_edge": (3, [(0, 1)]),
}


def corpus_graph(name: str) -> Graph:
    n, edges = CORPUS[name]
    return Graph(n, [tuple(sorted(e)) for e in edges])


def write_corpus(directory) -> list:
    """Write every corpus graph as ``<name>.edges``; returns the paths."""
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name in sorted(CORPUS):
        p = directory / f"{name}.edges"
        write_edge_list(corpus_graph(name), p)
        paths.append(p)
    return paths
