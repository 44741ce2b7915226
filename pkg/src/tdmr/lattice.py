"""Writable-region geometry and the linear interference matrix.

Cells are indexed row-major from 0. The usual 1-based labelling (cell 13 in
a 5x5 region is the centre) maps to internal index ``label - 1``; see
:func:`to_label` / :func:`from_label`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# 2**n pattern enumeration is exhaustive, so n is capped.
MAX_CELLS = 20


@dataclass(frozen=True)
class GridTopology:
    rows: int
    cols: int
    neighbors: tuple[tuple[int, ...], ...]
    edges: tuple[tuple[int, int], ...]

    @property
    def n(self) -> int:
        return self.rows * self.cols

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def index(self, r: int, c: int) -> int:
        return r * self.cols + c

    def incidence(self) -> np.ndarray:
        """(n_edges, n) 0/1 matrix, a 1 at both endpoints of every edge."""
        inc = np.zeros((self.n_edges, self.n))
        for e, (i, j) in enumerate(self.edges):
            inc[e, i] = 1.0
            inc[e, j] = 1.0
        return inc


def to_label(index: int) -> int:
    return index + 1


def from_label(label: int) -> int:
    return label - 1


def build_grid(rows: int, cols: int, max_cells: int = MAX_CELLS) -> GridTopology:
    """Rectangular ``rows x cols`` region with 4-adjacency and no wraparound.

    Edges are listed in a stable order: for each cell in row-major order, the
    edge to its right neighbour, then the edge to the neighbour below.
    """
    rows, cols = int(rows), int(cols)
    if rows < 1 or cols < 1:
        raise ValueError(f"grid dimensions must be positive, got {rows}x{cols}")
    if rows * cols > max_cells:
        raise ValueError(
            f"{rows}x{cols} grid has {rows * cols} cells; exhaustive limit is {max_cells}"
        )
    nbrs: list[list[int]] = [[] for _ in range(rows * cols)]
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1))
            if r + 1 < rows:
                edges.append((i, i + cols))
    for i, j in edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    return GridTopology(
        rows=rows,
        cols=cols,
        neighbors=tuple(tuple(sorted(nb)) for nb in nbrs),
        edges=tuple(edges),
    )


def interference_matrix(topology: GridTopology, alpha: float, beta: float) -> np.ndarray:
    """A with ``alpha`` on the diagonal and ``beta`` between adjacent cells."""
    a = np.zeros((topology.n, topology.n))
    np.fill_diagonal(a, alpha)
    for i, j in topology.edges:
        a[i, j] = beta
        a[j, i] = beta
    a.flags.writeable = False
    return a
