"""Exact ML detection under the signal-dependent distance, and 2-D rasters."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from tdmr.channel import pattern_bits
from tdmr.density import PatternEntry, PatternTable, all_mahalanobis, mahalanobis


@dataclass(frozen=True)
class DecisionRaster:
    window: tuple[float, float]
    resolution: int
    axis: np.ndarray  # sample points shared by y1 and y2
    labels: np.ndarray  # labels[i, j] is the decision at (axis[i], axis[j])

    def touches_boundary(self, index: int) -> bool:
        lab = self.labels
        edge = np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]])
        return bool(np.any(edge == index))


def distance(y, entry: PatternEntry):
    """D(y|x) = Mahalanobis distance plus ln|S(x)|."""
    return mahalanobis(y, entry) + entry.factor.log_det


def all_distances(y, table: PatternTable) -> np.ndarray:
    return all_mahalanobis(y, table) + table.log_dets[None, :]


def _negative_side(y: np.ndarray) -> np.ndarray:
    """True where the first nonzero coordinate of y is negative."""
    nz = y != 0
    first = np.argmax(nz, axis=1)
    lead = y[np.arange(len(y)), first]
    return lead < 0


def ml_indices(y, table: PatternTable) -> np.ndarray:
    """Table rank of the ML decision for each row of ``y``.

    Exact ties go to the lowest rank, except when ``y`` lies on the negative
    side (first nonzero coordinate < 0), where they go to the highest rank.
    Together with the mirrored table order this makes the decision
    antisymmetric for every y != 0.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    d = all_distances(y, table)
    tied = d == d.min(axis=1, keepdims=True)
    lowest = np.argmax(tied, axis=1)
    highest = len(table) - 1 - np.argmax(tied[:, ::-1], axis=1)
    return np.where(_negative_side(y), highest, lowest)


def ml_detect(y, table: PatternTable) -> np.ndarray:
    """Pattern(s) minimizing D(y|x); (n,) for a single y, else (batch, n)."""
    y = np.asarray(y, dtype=float)
    idx = ml_indices(y, table)
    return table.patterns[idx[0]] if y.ndim == 1 else table.patterns[idx]


def decision_raster(table: PatternTable, window, resolution: int) -> DecisionRaster:
    """ML labels on a uniform ``resolution x resolution`` grid over the window.

    ``window`` is ``(lo, hi)`` applied to both axes, or a half-width ``w`` for
    ``(-w, w)``.
    """
    if table.n != 2:
        raise ValueError(f"decision raster needs a two-cell table, got n={table.n}")
    resolution = int(resolution)
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    lo, hi = (-float(window), float(window)) if np.isscalar(window) else map(float, window)
    if not hi > lo:
        raise ValueError(f"empty window [{lo}, {hi}]")
    axis = np.linspace(lo, hi, resolution)
    if lo == -hi:
        # exact mirror symmetry of the sample points
        axis = 0.5 * (axis - axis[::-1])
    labels = np.empty((resolution, resolution), dtype=np.int64)
    rows_per_block = max(1, 65536 // resolution)
    for start in range(0, resolution, rows_per_block):
        stop = min(start + rows_per_block, resolution)
        y1, y2 = np.meshgrid(axis[start:stop], axis, indexing="ij")
        pts = np.column_stack([y1.ravel(), y2.ravel()])
        labels[start:stop] = ml_indices(pts, table).reshape(stop - start, resolution)
    return DecisionRaster(window=(lo, hi), resolution=resolution, axis=axis, labels=labels)


def write_raster_csv(raster: DecisionRaster, table: PatternTable, f) -> None:
    """Rows ``y1,y2,label_index,x_bits``; y1 outer loop, y2 inner."""
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["y1", "y2", "label_index", "x_bits"])
    bits = [pattern_bits(p) for p in table.patterns]
    ax = [f"{v:.17g}" for v in raster.axis]
    for i, y1 in enumerate(ax):
        for j, y2 in enumerate(ax):
            k = int(raster.labels[i, j])
            w.writerow([y1, y2, k, bits[k]])
