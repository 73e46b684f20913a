"""Wasserstein graph clustering, the k-means baseline, and fit diagnostics.

Each graph is represented by its sorted births followed by its sorted
deaths. Under that embedding the combined Wasserstein distance is the
squared Euclidean distance and the Wasserstein cluster mean is the
coordinate-wise mean. The EM iteration (means from assignments, then
nearest-mean reassignment) is therefore the same Lloyd iteration the
k-means baseline runs on vectorized correlation matrices, and both share
:func:`_lloyd` so that restarts, seeding, empty-cluster repair and tie
handling are identical for a fair comparison.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from ._parallel import parallel_map
from .decomposition import GraphMean, realize_on_template, decompose_all
from .errors import (
    DegenerateBetween,
    EmptyClusterCollapse,
    LabelOutOfRange,
    ShapeMismatch,
    TooFewGraphs,
    TooFewPoints,
    TooFewVectors,
    ValidationError,
)

log = logging.getLogger(__name__)

DEFAULT_RESTARTS = 10
DEFAULT_MAX_ITER = 100


@dataclass
class ClusterModel:
    """Result of a clustering run (the best of several restarts).

    ``assignments`` holds labels ``1..k``. ``centers`` are the cluster means
    in the embedding space; for Wasserstein clustering ``means`` additionally
    holds each mean as a :class:`GraphMean` realized on the edges of the
    cluster's first member.
    """

    k: int
    assignments: np.ndarray
    centers: np.ndarray
    objective_trace: list[float]
    seed: int | None
    iterations: int
    converged: bool
    method: str
    restart_objectives: list[float] = field(default_factory=list)
    means: list[GraphMean] | None = None

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    @property
    def labels0(self) -> np.ndarray:
        return self.assignments - 1

    def restart_summary(self) -> tuple[float, float]:
        """Mean and standard deviation of the final objective across restarts."""
        r = np.asarray(self.restart_objectives, dtype=float)
        return float(r.mean()), float(r.std())


@dataclass
class _Run:
    labels: np.ndarray
    centers: np.ndarray
    trace: list[float]
    converged: bool


def _assign(X: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dist = cdist(X, centers, "sqeuclidean")
    # argmin returns the first minimum, so ties go to the lowest cluster index
    return np.argmin(dist, axis=1), dist


def _repair_empty(labels: np.ndarray, dist: np.ndarray, k: int) -> np.ndarray:
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        own = dist[np.arange(len(labels)), labels]
        movable = counts[labels] > 1
        if not movable.any():
            raise EmptyClusterCollapse(f"cluster {j + 1} is empty and no point can be moved into it")
        # farthest point from its own mean among clusters that can spare one
        i = int(np.argmax(np.where(movable, own, -np.inf)))
        counts[labels[i]] -= 1
        labels[i] = j
        counts[j] += 1
    return labels


def _centers(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    return np.array([X[labels == j].mean(axis=0) for j in range(k)])


def _objective(X: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> float:
    return float(np.sum((X - centers[labels]) ** 2))


def _lloyd(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int) -> _Run:
    n = X.shape[0]
    centers = X[rng.choice(n, size=k, replace=False)].copy()
    trace: list[float] = []
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        labels, dist = _assign(X, centers)
        labels = _repair_empty(labels, dist, k)
        new = _centers(X, labels, k)
        trace.append(_objective(X, labels, new))
        if np.array_equal(new, centers):
            return _Run(labels, new, trace, True)
        centers = new
    return _Run(labels, centers, trace, False)


def _fit(X: np.ndarray, k: int, restarts: int, seed: int | None, max_iter: int, method: str) -> ClusterModel:
    if restarts < 1:
        raise ValidationError("restarts must be >= 1")
    children = np.random.SeedSequence(seed).spawn(restarts)
    runs = parallel_map(lambda ss: _lloyd(X, k, np.random.default_rng(ss), max_iter), children)
    finals = [r.trace[-1] for r in runs]
    best = runs[int(np.argmin(finals))]
    if not best.converged:
        warnings.warn(f"{method} clustering hit the iteration cap ({max_iter})", stacklevel=3)
    return ClusterModel(
        k=k,
        assignments=best.labels + 1,
        centers=best.centers,
        objective_trace=best.trace,
        seed=seed,
        iterations=len(best.trace),
        converged=best.converged,
        method=method,
        restart_objectives=finals,
    )


def topological_vectors(gs: Sequence) -> np.ndarray:
    """Stack each graph's births-then-deaths vector into an ``(n, q)`` array."""
    decomps = decompose_all(gs)
    shape = decomps[0].shape
    for d in decomps[1:]:
        if d.shape != shape:
            raise ShapeMismatch(f"decomposition shapes differ: {shape} vs {d.shape}")
    return np.array([d.vector() for d in decomps]).reshape(len(decomps), -1)


def wasserstein_cluster(
    gs: Sequence,
    k: int,
    restarts: int = DEFAULT_RESTARTS,
    seed: int | None = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    realize_means: bool = True,
) -> ClusterModel:
    """Cluster graphs into ``k`` groups by the combined Wasserstein distance.

    Initial means are ``k`` distinct graphs drawn uniformly at random; each
    restart draws from its own child of ``SeedSequence(seed)``. Iteration
    stops when the cluster means no longer change. The returned
    ``objective_trace`` is the within-cluster distance after every mean
    update: strictly decreasing, with the last value repeated at the fixpoint.
    """
    n = len(gs)
    if k < 1 or n < k:
        raise TooFewGraphs(f"need at least k={k} graphs, got {n}")
    decomps = decompose_all(gs)
    X = topological_vectors(decomps)
    model = _fit(X, k, restarts, seed, max_iter, "wasserstein")
    if realize_means:
        model.means = cluster_means(decomps, model)
    return model


def cluster_means(decomps, model: ClusterModel) -> list[GraphMean]:
    out = []
    q0 = decomps[0].q0
    for j in range(model.k):
        members = np.flatnonzero(model.labels0 == j)
        first = int(members[0])
        template = decomps[first]
        c = model.centers[j]
        m = realize_on_template(template.with_values(c[:q0], c[q0:]), template, first)
        out.append(GraphMean(m.decomposition, m.representative, m.template_id, n=len(members)))
    return out


def kmeans_baseline(
    vectors, k: int, restarts: int = DEFAULT_RESTARTS, seed: int | None = 0, max_iter: int = DEFAULT_MAX_ITER
) -> ClusterModel:
    """Lloyd's k-means on raw vectors, with the same seeding contract."""
    X = np.asarray(vectors, dtype=float)
    if X.ndim != 2:
        raise ShapeMismatch("vectors must form a 2-D array")
    if k < 1 or X.shape[0] < k:
        raise TooFewVectors(f"need at least k={k} vectors, got {X.shape[0]}")
    return _fit(X, k, restarts, seed, max_iter, "kmeans")


def within_between(model: ClusterModel, data) -> tuple[float, float]:
    """Within-cluster ``l_W`` and between-cluster ``l_B`` distances.

    ``l_B = sum_j |C_j| * D(mu_j, mu)`` with ``mu`` the mean of all items,
    so that ``l_W + l_B`` is the total spread about ``mu``. ``data`` is the
    graph collection for Wasserstein models and the vectors for k-means.
    """
    X = _embed(model, data)
    if X.shape[0] != len(model.assignments):
        raise ShapeMismatch("data and model assignments differ in length")
    labels = model.labels0
    l_w = _objective(X, labels, model.centers)
    grand = X.mean(axis=0)
    sizes = np.bincount(labels, minlength=model.k)
    l_b = float(np.sum(sizes * np.sum((model.centers - grand) ** 2, axis=1)))
    return l_w, l_b


def within_between_ratio(model: ClusterModel, data) -> float:
    """``l_W / l_B``; ``inf`` when ``k == 1`` (no between-cluster spread)."""
    l_w, l_b = within_between(model, data)
    if model.k == 1:
        return math.inf
    if l_b == 0.0:
        raise DegenerateBetween("all cluster means coincide")
    return l_w / l_b


def _embed(model: ClusterModel, data) -> np.ndarray:
    if model.method == "wasserstein":
        return topological_vectors(data)
    return np.asarray(data, dtype=float)


def elbow_select(ratios: Mapping[int, float], tol: float = 1e-12) -> int:
    """Pick ``k`` at the largest discrete second difference of the ratio curve."""
    ks = sorted(ratios)
    if len(ks) < 3:
        raise TooFewPoints("elbow selection needs ratios for at least 3 values of k")
    if ks != list(range(ks[0], ks[0] + len(ks))):
        raise TooFewPoints(f"k values must be consecutive, got {ks}")
    r = np.array([ratios[k] for k in ks], dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValidationError("ratios must be finite (drop k=1)")
    second = r[:-2] - 2 * r[1:-1] + r[2:]
    i = int(np.argmax(second))
    if second[i] <= tol * max(1.0, float(np.abs(r).max())):
        warnings.warn("ratio curve has no elbow; returning the smallest k", stacklevel=2)
        return ks[0]
    return ks[i + 1]


def confusion_matrix(predicted, truth, k: int) -> np.ndarray:
    """``F[i, j]`` = number of items predicted ``i + 1`` whose true label is ``j + 1``."""
    pred = np.asarray(predicted, dtype=int).reshape(-1)
    true = np.asarray(truth, dtype=int).reshape(-1)
    if pred.size != true.size:
        raise ShapeMismatch(f"label sequences differ in length: {pred.size} vs {true.size}")
    for name, lab in (("predicted", pred), ("truth", true)):
        if lab.size and (lab.min() < 1 or lab.max() > k):
            raise LabelOutOfRange(f"{name} labels must lie in 1..{k}")
    f = np.zeros((k, k), dtype=int)
    np.add.at(f, (pred - 1, true - 1), 1)
    return f


def lsap_max_trace(f: np.ndarray) -> tuple[int, np.ndarray]:
    """Maximal trace of ``Q @ F`` over permutation matrices, and the permutation.

    ``perm[i]`` is the true label index matched to predicted label index ``i``.
    """
    f = np.asarray(f)
    rows, cols = linear_sum_assignment(f, maximize=True)
    perm = np.empty(f.shape[0], dtype=int)
    perm[rows] = cols
    return int(f[rows, cols].sum()), perm


def clustering_accuracy(predicted, truth, k: int) -> float:
    f = confusion_matrix(predicted, truth, k)
    n = int(f.sum())
    if n == 0:
        raise ValidationError("no labels")
    best, _ = lsap_max_trace(f)
    return best / n


def align_labels(predicted, truth, k: int) -> np.ndarray:
    """Relabel ``predicted`` by the permutation that best matches ``truth``."""
    f = confusion_matrix(predicted, truth, k)
    _, perm = lsap_max_trace(f)
    return perm[np.asarray(predicted, dtype=int) - 1] + 1
