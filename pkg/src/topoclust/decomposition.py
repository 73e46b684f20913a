"""Birth-death decomposition of graph filtrations and its algebra.

Deleting edges in increasing weight order, every edge either splits a
component (a 0-cycle is born) or breaks a loop (a 1-cycle dies), never
both. The birth edges are exactly the maximum spanning tree, so the
decomposition is computed with Kruskal's algorithm run from the heaviest
edge down.

The sorted birth and death values are the whole topological signature used
downstream. Different weight matrices can share the same signature, so any
operation that has to return a *graph* (projection, sum, mean) picks one
realization and records which.
"""

from __future__ import annotations

import json
import logging
import warnings
import weakref
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._parallel import parallel_map
from .errors import (
    BadCInf,
    Disconnected,
    EmptyCollection,
    LengthMismatch,
    NegativeScalar,
    NonPositiveEntry,
    NotOrdered,
    ProjectionError,
    ShapeMismatch,
    ValidationError,
)
from .graph import NO_EDGE, TIE_RULE, UnionFind, WeightedGraph, sort_edges

log = logging.getLogger(__name__)


class ProjectionWarning(UserWarning):
    """A projection did not reproduce the source decomposition."""


@dataclass(frozen=True, eq=False)
class BirthDeathDecomposition:
    """Sorted birth and death values plus the edges that realize them.

    ``births[i]`` is carried by edge ``birth_edges[i]`` (a ``(row, col)``
    pair with ``row < col``), likewise for deaths. Both sequences are in
    increasing order under the tie rule.
    """

    p: int
    births: np.ndarray
    deaths: np.ndarray
    birth_edges: np.ndarray
    death_edges: np.ndarray
    tie_rule: str = TIE_RULE

    def __post_init__(self):
        for name in ("births", "deaths"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        for name in ("birth_edges", "death_edges"):
            arr = np.array(getattr(self, name), dtype=int).reshape(-1, 2)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if len(self.births) != len(self.birth_edges) or len(self.deaths) != len(self.death_edges):
            raise ShapeMismatch("value and edge sequences differ in length")

    @property
    def q0(self) -> int:
        return len(self.births)

    @property
    def q1(self) -> int:
        return len(self.deaths)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.p, self.q0, self.q1

    def vector(self) -> np.ndarray:
        """Births followed by deaths; squared L2 between vectors is the graph distance."""
        return np.concatenate([self.births, self.deaths])

    def same_values(self, other: "BirthDeathDecomposition") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.births, other.births)
            and np.array_equal(self.deaths, other.deaths)
        )

    def to_graph(self) -> WeightedGraph:
        """Place every value back on its own edge."""
        return _place(self.p, self.births, self.birth_edges, self.deaths, self.death_edges)

    def with_values(self, births, deaths) -> "BirthDeathDecomposition":
        return BirthDeathDecomposition(self.p, births, deaths, self.birth_edges, self.death_edges, self.tie_rule)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "births": self.births.tolist(),
            "deaths": self.deaths.tolist(),
            "birth_edges": self.birth_edges.tolist(),
            "death_edges": self.death_edges.tolist(),
            "tie_rule": self.tie_rule,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "BirthDeathDecomposition":
        return cls(
            int(data["p"]),
            data["births"],
            data["deaths"],
            data["birth_edges"],
            data["death_edges"],
            data.get("tie_rule", TIE_RULE),
        )

    def __repr__(self):
        return f"BirthDeathDecomposition(p={self.p}, q0={self.q0}, q1={self.q1})"


@dataclass(frozen=True)
class GraphMean:
    """A topological average together with one concrete realization.

    ``template_id`` names the graph whose edge structure the representative
    borrows; ``None`` means the canonical star realization was used because
    projecting onto the template would have changed the spanning tree.
    """

    decomposition: BirthDeathDecomposition
    representative: WeightedGraph
    template_id: int | None
    n: int = 1


def _place(p, births, birth_edges, deaths, death_edges) -> WeightedGraph:
    w = np.full((p, p), NO_EDGE)
    for vals, edges in ((births, birth_edges), (deaths, death_edges)):
        if len(vals):
            r, c = edges[:, 0], edges[:, 1]
            w[r, c] = vals
            w[c, r] = vals
    return WeightedGraph(w)


def decompose(g: WeightedGraph) -> BirthDeathDecomposition:
    edges = sort_edges(g)
    w, rows, cols = edges.weights, edges.rows, edges.cols
    q = len(w)
    uf = UnionFind(g.node_count)
    in_tree = np.zeros(q, dtype=bool)
    ri, ci = rows.tolist(), cols.tolist()
    need = g.node_count - 1
    for m in range(q - 1, -1, -1):
        if uf.union(ri[m], ci[m]):
            in_tree[m] = True
            need -= 1
            if need == 0:
                break
    if uf.components != 1:
        raise Disconnected(f"graph has {uf.components} connected components; no spanning tree")
    pairs = np.column_stack([rows, cols])
    return BirthDeathDecomposition(
        g.node_count, w[in_tree], w[~in_tree], pairs[in_tree], pairs[~in_tree], edges.tie_rule
    )


_cache: "weakref.WeakKeyDictionary[WeightedGraph, BirthDeathDecomposition]" = weakref.WeakKeyDictionary()


def decompose_cached(g: WeightedGraph) -> BirthDeathDecomposition:
    """:func:`decompose`, memoized per graph object."""
    d = _cache.get(g)
    if d is None:
        d = decompose(g)
        _cache[g] = d
    return d


def as_decomposition(x) -> BirthDeathDecomposition:
    if isinstance(x, BirthDeathDecomposition):
        return x
    if isinstance(x, GraphMean):
        return x.decomposition
    if isinstance(x, WeightedGraph):
        return decompose_cached(x)
    raise TypeError(f"expected a graph or decomposition, got {type(x).__name__}")


def decompose_all(gs: Sequence) -> list[BirthDeathDecomposition]:
    return parallel_map(as_decomposition, gs)


# --- scalar and set algebra -------------------------------------------------


def scalar_multiply(d: BirthDeathDecomposition, c: float) -> BirthDeathDecomposition:
    if c < 0:
        raise NegativeScalar("scalar multiplication is only order preserving for c >= 0")
    return d.with_values(d.births * c, d.deaths * c)


def scalar_add(d: BirthDeathDecomposition, c: float) -> BirthDeathDecomposition:
    return d.with_values(d.births + c, d.deaths + c)


def _check_increment(c, n: int, what: str) -> np.ndarray:
    c = np.asarray(c, dtype=float).reshape(-1)
    if c.size != n:
        raise LengthMismatch(f"{what} has length {c.size}, expected {n}")
    if np.any(c <= 0):
        raise NonPositiveEntry(f"{what} must be strictly positive")
    if np.any(np.diff(c) < 0):
        raise NotOrdered(f"{what} must be non-decreasing")
    return c


def set_add_births(d: BirthDeathDecomposition, c_b) -> tuple[BirthDeathDecomposition, WeightedGraph]:
    """Raise the ``i``-th birth by ``c_b[i]``.

    Raising tree edges cannot dethrone the maximum spanning tree, so deaths
    and all edge assignments stay put.
    """
    c_b = _check_increment(c_b, d.q0, "c_b")
    out = d.with_values(d.births + c_b, d.deaths)
    return out, out.to_graph()


def set_add_deaths(d: BirthDeathDecomposition, c_d, c_inf: float) -> tuple[BirthDeathDecomposition, WeightedGraph]:
    """Shift the ``i``-th death by ``c_d[i] - c_inf`` (a strict decrease)."""
    c_d = _check_increment(c_d, d.q1, "c_d")
    if c_d.size and c_inf <= c_d.max():
        raise BadCInf(f"c_inf={c_inf} must exceed max(c_d)={c_d.max()}")
    out = d.with_values(d.births, d.deaths + (c_d - c_inf))
    return out, out.to_graph()


# --- realizations -----------------------------------------------------------


def project(
    source: BirthDeathDecomposition, template: BirthDeathDecomposition, *, strict: bool = False
) -> WeightedGraph:
    """Write ``source``'s ranked values onto ``template``'s ranked edges.

    The ``i``-th smallest birth of ``source`` goes on the edge carrying the
    ``i``-th smallest birth of ``template``, likewise for deaths. When the
    result's own decomposition differs from ``source`` (the template tree is
    no longer maximal under the new values) a :class:`ProjectionWarning` is
    issued, or :class:`ProjectionError` raised if ``strict``.
    """
    if source.shape != template.shape:
        raise ShapeMismatch(f"source shape {source.shape} != template shape {template.shape}")
    g = _place(template.p, source.births, template.birth_edges, source.deaths, template.death_edges)
    check = decompose(g)
    if not check.same_values(source):
        msg = "projected values do not keep the template's spanning tree maximal"
        if strict:
            raise ProjectionError(msg)
        warnings.warn(msg, ProjectionWarning, stacklevel=2)
    return g


def realizable(births, deaths) -> bool:
    """Whether some graph on ``len(births) + 1`` nodes has these birth/death values.

    With ``m`` births above a threshold the surviving edges span
    ``len(births) + 1 - m`` components, so at most ``m(m-1)/2`` deaths can
    exceed it. For the ``j``-th largest death this requires it to be no
    larger than the ``m_j``-th largest birth, ``m_j`` the least ``m`` with
    ``m(m-1)/2 >= j``. The star construction in :func:`realize_canonical`
    shows the condition is also sufficient.
    """
    b = np.sort(np.asarray(births, dtype=float))[::-1]
    dd = np.sort(np.asarray(deaths, dtype=float))[::-1]
    p = b.size + 1
    if dd.size > (p - 1) * (p - 2) // 2:
        return False
    for j in range(1, dd.size + 1):
        m = _min_clique_rank(j)
        if dd[j - 1] > b[m - 1]:
            return False
    return True


def _min_clique_rank(j: int) -> int:
    m = 2
    while m * (m - 1) // 2 < j:
        m += 1
    return m


def realize_canonical(births, deaths) -> WeightedGraph:
    """Star-shaped realization of a birth/death signature.

    Node 0 is joined to node ``m`` by the ``m``-th largest birth. Deaths fill
    the leaf pairs ``(i, j)``, ``1 <= i < j``, ordered by ``j`` then ``i``,
    largest death first; the tree path of leaf pair ``(i, j)`` has minimum
    weight equal to the ``j``-th largest birth, which is exactly the bound in
    :func:`realizable`.
    """
    b = np.sort(np.asarray(births, dtype=float))[::-1]
    dd = np.sort(np.asarray(deaths, dtype=float))[::-1]
    p = b.size + 1
    if p < 2:
        raise ValidationError("need at least one birth value")
    if dd.size > (p - 1) * (p - 2) // 2:
        raise ShapeMismatch(f"{dd.size} deaths cannot fit on {p} nodes")
    w = np.full((p, p), NO_EDGE)
    for m in range(1, p):
        w[0, m] = w[m, 0] = b[m - 1]
    slots = ((i, j) for j in range(2, p) for i in range(1, j))
    for v, (i, j) in zip(dd, slots):
        w[i, j] = w[j, i] = v
    g = WeightedGraph(w)
    got = decompose(g)
    if not (np.array_equal(got.births, np.sort(b)) and np.array_equal(got.deaths, np.sort(dd))):
        raise ProjectionError("birth/death values are not realizable by any graph")
    return g


def realize_on_template(decomp: BirthDeathDecomposition, template: BirthDeathDecomposition, template_id) -> GraphMean:
    try:
        rep = project(decomp, template, strict=True)
    except ProjectionError:
        log.debug("projection onto template %s failed; using star realization", template_id)
        rep = realize_canonical(decomp.births, decomp.deaths)
        template_id = None
    # Edge assignment follows the representative actually returned.
    final = decompose(rep)
    return GraphMean(final, rep, template_id)


def graph_sum(g1, g2, template: int = 0) -> GraphMean:
    """Wasserstein graph sum: rank-wise sums of births and of deaths.

    The representative borrows the edge structure of operand ``template``
    (0 or 1) when that keeps its spanning tree maximal, else falls back to
    :func:`realize_canonical`.
    """
    d1, d2 = as_decomposition(g1), as_decomposition(g2)
    if d1.shape != d2.shape:
        raise ShapeMismatch(f"operand shapes differ: {d1.shape} vs {d2.shape}")
    if template not in (0, 1):
        raise ValidationError("template must be 0 or 1")
    summed = d1.with_values(d1.births + d2.births, d1.deaths + d2.deaths)
    out = realize_on_template(summed, (d1, d2)[template], template)
    return GraphMean(out.decomposition, out.representative, out.template_id, n=2)


def mean_values(decomps: Sequence[BirthDeathDecomposition]) -> tuple[np.ndarray, np.ndarray]:
    if not decomps:
        raise EmptyCollection("cannot average an empty collection")
    shape = decomps[0].shape
    for d in decomps[1:]:
        if d.shape != shape:
            raise ShapeMismatch(f"decomposition shapes differ: {shape} vs {d.shape}")
    births = np.mean([d.births for d in decomps], axis=0).reshape(-1)
    deaths = np.mean([d.deaths for d in decomps], axis=0).reshape(-1)
    return births, deaths


def graph_mean(gs: Sequence, template_index: int = 0) -> GraphMean:
    """Wasserstein graph mean.

    The minimizer of the summed combined distance is the rank-wise average
    of births and of deaths. Its representative is realized on the edges of
    ``gs[template_index]``.
    """
    if len(gs) == 0:
        raise EmptyCollection("cannot average an empty collection")
    if not -len(gs) <= template_index < len(gs):
        raise ValidationError(f"template_index {template_index} out of range")
    decomps = decompose_all(gs)
    births, deaths = mean_values(decomps)
    template = decomps[template_index]
    out = realize_on_template(template.with_values(births, deaths), template, template_index % len(gs))
    return GraphMean(out.decomposition, out.representative, out.template_id, n=len(gs))


def _sq_dist(a: BirthDeathDecomposition, b: BirthDeathDecomposition) -> float:
    return float(np.sum((a.births - b.births) ** 2) + np.sum((a.deaths - b.deaths) ** 2))


def mean_pairwise_distance(gs: Sequence) -> float:
    """``(1/n^2) * sum_{j,k} D(X_j, X_k)`` over all ordered pairs."""
    decomps = decompose_all(gs)
    if not decomps:
        raise EmptyCollection("empty collection")
    _check_shapes(decomps)
    v = np.array([d.vector() for d in decomps])
    diff = v[:, None, :] - v[None, :, :]
    return float(np.sum(diff**2)) / len(decomps) ** 2


def graph_variance(gs: Sequence, method: str = "mean") -> float:
    """Wasserstein graph variance ``(1/n) * sum_k D(mean, X_k)``.

    ``method="pairwise"`` evaluates the same quantity without forming the
    mean, as half of :func:`mean_pairwise_distance` (the combined distance is
    a squared Euclidean distance between sorted value vectors, so the
    pairwise sum double counts every deviation from the mean).
    """
    if method == "pairwise":
        return 0.5 * mean_pairwise_distance(gs)
    if method != "mean":
        raise ValidationError(f"unknown method {method!r}")
    decomps = decompose_all(gs)
    births, deaths = mean_values(decomps)
    mu = decomps[0].with_values(births, deaths)
    return sum(_sq_dist(mu, d) for d in decomps) / len(decomps)


def _check_shapes(decomps):
    shape = decomps[0].shape
    for d in decomps[1:]:
        if d.shape != shape:
            raise ShapeMismatch(f"decomposition shapes differ: {shape} vs {d.shape}")
