"""Weighted graphs, graph filtrations and Betti curves.

A graph is stored as a dense symmetric ``p x p`` matrix. Absent edges are
encoded by ``NaN`` (:data:`NO_EDGE`) so that a legitimate weight of zero,
or a negative correlation, is never confused with a missing edge. The
diagonal is always ``NaN``.

Filtration follows the convention that an edge survives threshold ``eps``
iff its weight is strictly larger than ``eps``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyGraph, NotSymmetric, ShapeMismatch, ValidationError

NO_EDGE = np.nan

#: Ties in weight are broken by the (row, col) node pair, row < col.
TIE_RULE = "weight-then-lexicographic-node-pair"

SYMMETRY_TOL = 1e-12


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.components = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        """Merge the sets of ``a`` and ``b``; return False if already joined."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.components -= 1
        return True


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected weighted graph on nodes ``0..p-1``.

    ``weights`` is copied, its diagonal set to :data:`NO_EDGE`, and frozen.
    Instances hash by identity, which lets derived data (decompositions) be
    cached per graph.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ShapeMismatch(f"weights must be a square matrix, got shape {w.shape}")
        if w.shape[0] < 2:
            raise ValidationError("a graph needs at least 2 nodes")
        np.fill_diagonal(w, NO_EDGE)
        if np.isinf(w).any():
            raise ValidationError("edge weights must be finite (use NaN for no edge)")
        if not _nan_equal(w, w.T):
            raise NotSymmetric("weight matrix is not symmetric")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def node_count(self) -> int:
        return self.weights.shape[0]

    @property
    def edge_mask(self) -> np.ndarray:
        return ~np.isnan(self.weights)

    @property
    def edge_count(self) -> int:
        return int(self.edge_mask.sum()) // 2

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Present edges as ``(i, j, weight)`` arrays with ``i < j``, row-major."""
        iu, ju = np.triu_indices(self.node_count, k=1)
        w = self.weights[iu, ju]
        keep = ~np.isnan(w)
        return iu[keep], ju[keep], w[keep]

    def __add__(self, c: float) -> "WeightedGraph":
        return WeightedGraph(self.weights + c)

    __radd__ = __add__

    def __mul__(self, c: float) -> "WeightedGraph":
        return WeightedGraph(self.weights * c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"WeightedGraph(p={self.node_count}, edges={self.edge_count})"


def _nan_equal(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.array_equal(a, b, equal_nan=True))


def from_edges(p: int, edges, weights=None) -> WeightedGraph:
    """Build a graph from ``(i, j)`` pairs (and optional weights, default 1)."""
    w = np.full((p, p), NO_EDGE)
    if weights is None:
        weights = np.ones(len(edges))
    for (i, j), v in zip(edges, weights):
        w[i, j] = w[j, i] = v
    return WeightedGraph(w)


def complete_graph(values: np.ndarray) -> WeightedGraph:
    """Complete graph whose upper triangle (row-major) holds ``values``."""
    values = np.asarray(values, dtype=float)
    q = values.size
    p = int(round((1 + np.sqrt(1 + 8 * q)) / 2))
    if p * (p - 1) // 2 != q:
        raise ShapeMismatch(f"{q} values do not fill the upper triangle of any square matrix")
    w = np.full((p, p), NO_EDGE)
    iu = np.triu_indices(p, k=1)
    w[iu] = values
    w.T[iu] = values
    return WeightedGraph(w)


@dataclass(frozen=True)
class SortedEdgeList:
    """Present edges in strictly increasing order under :data:`TIE_RULE`."""

    weights: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    tie_rule: str = TIE_RULE

    def __len__(self):
        return len(self.weights)

    def __iter__(self):
        return zip(self.weights.tolist(), self.rows.tolist(), self.cols.tolist())


def sort_edges(g: WeightedGraph) -> SortedEdgeList:
    i, j, w = g.edges()
    if w.size == 0:
        raise EmptyGraph("graph has no edges")
    order = np.lexsort((j, i, w))
    return SortedEdgeList(w[order], i[order], j[order])


def threshold(g: WeightedGraph, eps: float) -> WeightedGraph:
    """Binary graph keeping exactly the edges with weight ``> eps``."""
    with np.errstate(invalid="ignore"):
        keep = g.weights > eps
    return WeightedGraph(np.where(keep, 1.0, NO_EDGE))


@dataclass(frozen=True)
class BettiCurve:
    """Betti numbers along the graph filtration.

    Entry 0 is the unthresholded graph (filtration value ``-inf``); entry
    ``m`` is the graph after the ``m`` smallest edges, in tie-rule order,
    have been deleted, at filtration value equal to the weight of the
    ``m``-th deleted edge. Tied weights therefore produce repeated
    filtration values, one step per edge.
    """

    filtration_values: np.ndarray
    beta0: np.ndarray
    beta1: np.ndarray
    node_count: int
    edge_counts: np.ndarray = field(repr=False)

    def euler_characteristic(self) -> np.ndarray:
        return self.beta0 - self.beta1

    def at(self, eps: float) -> tuple[int, int]:
        """Betti numbers of the thresholded graph ``X_eps``."""
        idx = int(np.searchsorted(self.filtration_values[1:], eps, side="right"))
        return int(self.beta0[idx]), int(self.beta1[idx])


def betti_curve(g: WeightedGraph) -> BettiCurve:
    p = g.node_count
    i, j, w = g.edges()
    q = w.size
    order = np.lexsort((j, i, w))
    rows, cols = i[order].tolist(), j[order].tolist()

    # Run the filtration backwards: start from the bare node set and insert
    # edges from the largest down, recording components after each insert.
    beta0 = np.empty(q + 1, dtype=int)
    uf = UnionFind(p)
    beta0[q] = p
    for m in range(q - 1, -1, -1):
        uf.union(rows[m], cols[m])
        beta0[m] = uf.components
    edge_counts = q - np.arange(q + 1)
    beta1 = edge_counts - p + beta0
    values = np.concatenate([[-np.inf], w[order]])
    return BettiCurve(values, beta0, beta1, p, edge_counts)


def load_graph_csv(path: str | Path, tol: float = SYMMETRY_TOL) -> WeightedGraph:
    """Read a ``p x p`` CSV matrix; ``NA`` (or empty) cells are absent edges.

    The matrix is symmetrized by averaging with its transpose; a warning is
    issued when the asymmetry exceeds ``tol``.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        w = np.array([[_parse_cell(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ShapeMismatch(f"{path}: expected a square matrix, got {w.shape}")
    np.fill_diagonal(w, NO_EDGE)
    if not np.array_equal(np.isnan(w), np.isnan(w.T)):
        raise NotSymmetric(f"{path}: edge pattern is not symmetric")
    with np.errstate(invalid="ignore"):
        asym = np.nanmax(np.abs(w - w.T)) if w.shape[0] > 1 else 0.0
    if asym > tol:
        warnings.warn(f"{path}: asymmetry {asym:.3g} exceeds {tol:g}; symmetrizing", stacklevel=2)
    return WeightedGraph((w + w.T) / 2)


def save_graph_csv(g: WeightedGraph, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in g.weights:
            writer.writerow(["NA" if np.isnan(v) else repr(float(v)) for v in row])


def _parse_cell(cell: str) -> float:
    cell = cell.strip()
    if cell in ("", "NA", "NaN", "nan"):
        return np.nan
    return float(cell)
