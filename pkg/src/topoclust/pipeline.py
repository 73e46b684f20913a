"""State-space estimation for dynamically changing correlation networks.

Multi-subject time series are smoothed with the heat kernel, turned into
one correlation graph per (subject, time point), pooled, clustered into
recurring states, and summarized by a Markov transition matrix. A
synthetic generator with planted sticky Markov states stands in for real
recordings.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ._parallel import parallel_map
from .cluster import (
    ClusterModel,
    align_labels,
    clustering_accuracy,
    elbow_select,
    kmeans_baseline,
    wasserstein_cluster,
    within_between_ratio,
)
from .errors import ConfigError, NonFiniteData, NotSPD, ShapeMismatch, SingleTimePoint, ValidationError
from .graph import NO_EDGE, WeightedGraph
from .smoothing import bandwidth_from_window, correlation_matrices, rescale_unit, sample_grid

log = logging.getLogger(__name__)


@dataclass
class TimeSeriesPanel:
    """Per-subject ``T x p`` series, each channel rescaled onto ``[0, 1]``.

    ``offsets`` and ``spans`` keep the affine map back to raw units;
    ``constant`` flags channels with zero range, whose correlations are
    reported as 0 downstream.
    """

    subjects: list[tuple[str, np.ndarray]]
    region_names: list[str]
    offsets: list[np.ndarray] = field(default_factory=list, repr=False)
    spans: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def trs(self) -> int:
        return self.subjects[0][1].shape[0]

    @property
    def n_regions(self) -> int:
        return len(self.region_names)

    @property
    def subject_ids(self) -> list[str]:
        return [sid for sid, _ in self.subjects]

    @property
    def constant(self) -> dict[str, list[int]]:
        return {sid: np.flatnonzero(sp == 0).tolist() for (sid, _), sp in zip(self.subjects, self.spans) if (sp == 0).any()}


def panel_from_arrays(arrays, region_names=None, subject_ids=None, rescale: bool = True) -> TimeSeriesPanel:
    arrays = [np.asarray(a, dtype=float) for a in arrays]
    if not arrays:
        raise ValidationError("panel needs at least one subject")
    subject_ids = list(subject_ids) if subject_ids is not None else [f"sub-{i:03d}" for i in range(len(arrays))]
    shape = arrays[0].shape
    for sid, a in zip(subject_ids, arrays):
        if a.ndim != 2 or a.shape != shape:
            raise ShapeMismatch(f"subject {sid}: shape {a.shape} differs from {shape}")
        bad = ~np.isfinite(a).all(axis=1)
        if bad.any():
            raise NonFiniteData(f"subject {sid}: non-finite values in rows {np.flatnonzero(bad).tolist()}")
    region_names = list(region_names) if region_names is not None else [f"r{i}" for i in range(shape[1])]
    if len(region_names) != shape[1]:
        raise ShapeMismatch("region_names length does not match channel count")
    subjects, offsets, spans = [], [], []
    for sid, a in zip(subject_ids, arrays):
        if rescale:
            a, lo, span = rescale_unit(a)
        else:
            lo, span = np.zeros(shape[1]), np.ptp(a, axis=0)
        subjects.append((sid, a))
        offsets.append(lo)
        spans.append(span)
    return TimeSeriesPanel(subjects, region_names, offsets, spans)


def _read_table(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValidationError(f"{path}: empty file")
    return rows[0], rows[1:]


def _to_float(rows, path) -> np.ndarray:
    try:
        return np.array([[float(c) if c.strip() not in ("", "NA") else np.nan for c in r] for r in rows])
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def ingest(path: str | Path, rescale: bool = True) -> TimeSeriesPanel:
    """Load a panel from a directory of per-subject CSVs or one long-format CSV.

    Per-subject files have a header of channel names and one row per time
    point; the subject id is the file stem. A long-format file has a
    ``subject`` column followed by channel columns, rows in time order.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"{path}: no such file or directory")
    arrays, ids, names = [], [], None
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise ValidationError(f"{path}: no CSV files")
        for f in files:
            header, rows = _read_table(f)
            a = _to_float(rows, f)
            if names is not None and (header != names or a.shape != arrays[0].shape):
                raise ShapeMismatch(f"{f}: shape {a.shape} / header differ from {files[0]}")
            if not np.isfinite(a).all():
                raise NonFiniteData(f"{f}: non-finite values in rows {np.flatnonzero(~np.isfinite(a).all(axis=1)).tolist()}")
            names = header
            arrays.append(a)
            ids.append(f.stem)
    else:
        header, rows = _read_table(path)
        if header[0].strip().lower() != "subject":
            raise ValidationError(f"{path}: long format needs a leading 'subject' column")
        names = header[1:]
        groups: dict[str, list[list[str]]] = {}
        for r in rows:
            groups.setdefault(r[0], []).append(r[1:])
        for sid, rs in groups.items():
            a = _to_float(rs, path)
            if arrays and a.shape != arrays[0].shape:
                raise ShapeMismatch(f"{path}: subject {sid} has shape {a.shape}, expected {arrays[0].shape}")
            arrays.append(a)
            ids.append(sid)
    return panel_from_arrays(arrays, names, ids, rescale=rescale)


def write_panel(panel: TimeSeriesPanel, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for sid, a in panel.subjects:
        p = out_dir / f"{sid}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(panel.region_names)
            w.writerows([[repr(float(v)) for v in row] for row in a])
        paths.append(p)
    return paths


# --- synthetic data -----------------------------------------------------------


@dataclass
class SyntheticSpec:
    """Planted-state generator settings.

    By default states ``1..k-1`` split the channels into ``1..k-1``
    contiguous, near-equal blocks with correlation ``within_block_corr``
    inside each block and 0 across; the last state has independent channels.
    ``block_sizes`` overrides this with explicit partitions per state.
    """

    k_true: int = 3
    p: int = 10
    T: int = 100
    n_subjects: int = 10
    stay_prob: float = 0.95
    noise_level: float = 0.1
    within_block_corr: float = 0.9
    seed: int = 0
    block_sizes: list[list[int]] | None = None

    def partitions(self) -> list[list[int]]:
        if self.block_sizes is not None:
            if len(self.block_sizes) != self.k_true:
                raise ConfigError("block_sizes needs one partition per state")
            for sizes in self.block_sizes:
                if sum(sizes) != self.p:
                    raise ConfigError(f"block sizes {sizes} do not sum to p={self.p}")
            return [list(b) for b in self.block_sizes]
        if self.k_true > self.p:
            raise ConfigError("k_true cannot exceed p with the default block layout")
        counts = list(range(1, self.k_true)) + [self.p]
        return [_even_split(self.p, c) for c in counts]

    def state_covariances(self) -> list[np.ndarray]:
        out = []
        for sizes in self.partitions():
            c = np.zeros((self.p, self.p))
            start = 0
            for b in sizes:
                c[start : start + b, start : start + b] = self.within_block_corr
                start += b
            np.fill_diagonal(c, 1.0)
            out.append(c)
        return out

    def transition(self) -> np.ndarray:
        k = self.k_true
        if k == 1:
            return np.ones((1, 1))
        m = np.full((k, k), (1.0 - self.stay_prob) / (k - 1))
        np.fill_diagonal(m, self.stay_prob)
        return m


def _even_split(p: int, parts: int) -> list[int]:
    base, extra = divmod(p, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def sample_chain(transition: np.ndarray, length: int, rng: np.random.Generator) -> np.ndarray:
    """0-based state path started from the uniform distribution."""
    k = transition.shape[0]
    cum = np.cumsum(transition, axis=1)
    u = rng.random(length)
    path = np.empty(length, dtype=int)
    path[0] = min(int(u[0] * k), k - 1)
    for t in range(1, length):
        path[t] = min(int(np.searchsorted(cum[path[t - 1]], u[t], side="right")), k - 1)
    return path


def generate_synthetic(spec: SyntheticSpec) -> tuple[TimeSeriesPanel, "StateSequence"]:
    if not 0 < spec.stay_prob < 1:
        raise ConfigError("stay_prob must lie in (0, 1)")
    if spec.k_true < 1 or spec.p < 2 or spec.T < 2 or spec.n_subjects < 1:
        raise ConfigError("need k_true >= 1, p >= 2, T >= 2, n_subjects >= 1")
    covs = spec.state_covariances()
    factors = []
    for j, c in enumerate(covs):
        try:
            factors.append(np.linalg.cholesky(c))
        except np.linalg.LinAlgError:
            raise NotSPD(f"state {j + 1} covariance is not positive definite") from None
    rng = np.random.default_rng(spec.seed)
    trans = spec.transition()
    arrays, labels = [], []
    for _ in range(spec.n_subjects):
        path = sample_chain(trans, spec.T, rng)
        z = rng.standard_normal((spec.T, spec.p))
        x = np.einsum("tij,tj->ti", np.stack(factors)[path], z)
        x += spec.noise_level * rng.standard_normal((spec.T, spec.p))
        arrays.append(x)
        labels.append(path + 1)
    panel = panel_from_arrays(arrays)
    return panel, StateSequence(np.array(labels), spec.k_true, panel.subject_ids)


# --- graphs, states, transitions ---------------------------------------------


@dataclass
class GraphPanel:
    """Correlation graphs indexed ``graphs[subject][time]``."""

    graphs: list[list[WeightedGraph]]
    t_grid: np.ndarray
    time_index: np.ndarray
    subject_ids: list[str]
    bandwidth: float
    degenerate_fraction: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.graphs), len(self.t_grid)

    def flat(self) -> list[WeightedGraph]:
        return [g for row in self.graphs for g in row]

    def upper_vectors(self) -> np.ndarray:
        """Upper-triangle (off-diagonal) weights of every graph, subject-major."""
        flat = self.flat()
        iu = np.triu_indices(flat[0].node_count, k=1)
        return np.array([g.weights[iu] for g in flat])


def correlation_graphs(
    panel: TimeSeriesPanel,
    s: float,
    t_grid=None,
    stride: int = 1,
    *,
    kernel: str = "heat",
    window: int | None = None,
    degree: int | None = None,
    max_degenerate_fraction: float | None = None,
) -> GraphPanel:
    """One heat-kernel correlation graph per subject and grid time.

    The default grid is every ``stride``-th sample time.
    """
    if stride < 1:
        raise ValidationError("stride must be >= 1")
    T = panel.trs
    if t_grid is None:
        index = np.arange(0, T, stride)
        t_grid = sample_grid(T)[index]
    else:
        t_grid = np.asarray(t_grid, dtype=float)
        index = np.clip(np.rint(t_grid * T - 0.5).astype(int), 0, T - 1)

    def one(item):
        _, x = item
        corr, mask = correlation_matrices(
            x, t_grid, s, kernel=kernel, window=window, degree=degree, max_degenerate_fraction=max_degenerate_fraction
        )
        off = ~np.eye(x.shape[1], dtype=bool)
        corr[:, ~off] = NO_EDGE
        return [WeightedGraph(c) for c in corr], float(mask[:, off].mean())

    results = parallel_map(one, panel.subjects)
    graphs = [r[0] for r in results]
    frac = float(np.mean([r[1] for r in results]))
    return GraphPanel(graphs, t_grid, index, panel.subject_ids, s, frac)


@dataclass
class StateSequence:
    """Labels ``1..k`` with shape ``(n_subjects, n_times)``."""

    labels: np.ndarray
    k: int
    subject_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.atleast_2d(np.asarray(self.labels, dtype=int))
        if self.labels.size and (self.labels.min() < 1 or self.labels.max() > self.k):
            raise ValidationError(f"labels must lie in 1..{self.k}")

    def flat(self) -> np.ndarray:
        return self.labels.reshape(-1)


@dataclass
class TransitionMatrix:
    """Row-stochastic transition estimate; zero-count rows are uniform and flagged."""

    probs: np.ndarray
    counts: np.ndarray
    empty_rows: np.ndarray

    def diagonal_mass(self) -> float:
        return float(np.mean(np.diag(self.probs)))

    def to_dict(self) -> dict:
        return {"probs": self.probs.tolist(), "counts": self.counts.tolist(), "empty_rows": self.empty_rows.tolist()}


def _normalize(counts: np.ndarray) -> TransitionMatrix:
    totals = counts.sum(axis=1)
    empty = totals == 0
    k = counts.shape[0]
    probs = np.where(empty[:, None], 1.0 / k, counts / np.where(empty, 1, totals)[:, None])
    return TransitionMatrix(probs, counts, empty)


def transition_counts(labels, k: int) -> np.ndarray:
    lab = np.asarray(labels, dtype=int)
    counts = np.zeros((k, k), dtype=int)
    np.add.at(counts, (lab[:-1] - 1, lab[1:] - 1), 1)
    return counts


def transition_matrix(states: StateSequence) -> TransitionMatrix:
    """Pool consecutive-label transitions over subjects and row-normalize."""
    if states.labels.shape[1] < 2:
        raise SingleTimePoint("need at least two time points per subject")
    counts = sum(transition_counts(row, states.k) for row in states.labels)
    return _normalize(counts)


def subject_transition_matrices(states: StateSequence) -> list[TransitionMatrix]:
    if states.labels.shape[1] < 2:
        raise SingleTimePoint("need at least two time points per subject")
    return [_normalize(transition_counts(row, states.k)) for row in states.labels]


def estimate_states(
    graphs: GraphPanel,
    k: int,
    method: str = "wasserstein",
    restarts: int = 10,
    seed: int | None = 0,
) -> tuple[StateSequence, ClusterModel]:
    """Cluster all pooled graphs and map labels back to ``(subject, time)``."""
    n_sub, n_t = graphs.shape
    if method == "wasserstein":
        model = wasserstein_cluster(graphs.flat(), k, restarts=restarts, seed=seed)
    elif method == "kmeans":
        model = kmeans_baseline(graphs.upper_vectors(), k, restarts=restarts, seed=seed)
    else:
        raise ValidationError(f"unknown method {method!r}")
    labels = model.assignments.reshape(n_sub, n_t)
    return StateSequence(labels, k, list(graphs.subject_ids)), model


def _cluster_data(graphs: GraphPanel, method: str):
    return graphs.flat() if method == "wasserstein" else graphs.upper_vectors()


# --- end-to-end ---------------------------------------------------------------

METHODS = ("wasserstein", "kmeans")

CONFIG_KEYS = {
    "input",
    "synthetic",
    "bandwidth",
    "window",
    "degree",
    "k_min",
    "k_max",
    "restarts",
    "seed",
    "stride",
}


def load_config(path: str | Path) -> dict:
    """Read a TOML or JSON run configuration."""
    import json

    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such file")
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def synthetic_spec(cfg: Mapping[str, Any]) -> SyntheticSpec:
    known = set(SyntheticSpec.__dataclass_fields__)
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"unknown synthetic keys: {sorted(unknown)}")
    return SyntheticSpec(**cfg)


def _validate(config: Mapping[str, Any]) -> dict:
    unknown = set(config) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if ("input" in config) == ("synthetic" in config):
        raise ConfigError("config needs exactly one of 'input' or 'synthetic'")
    cfg = {"k_min": 2, "k_max": 6, "restarts": 10, "seed": 0, "stride": 1, "degree": None, **config}
    if cfg["k_min"] < 1 or cfg["k_max"] < cfg["k_min"]:
        raise ConfigError(f"empty k range {cfg['k_min']}..{cfg['k_max']}")
    if cfg["restarts"] < 1 or cfg["stride"] < 1:
        raise ConfigError("restarts and stride must be >= 1")
    if "bandwidth" in cfg and "window" in cfg:
        raise ConfigError("give either 'bandwidth' or 'window', not both")
    if cfg.get("bandwidth", 1.0) <= 0:
        raise ConfigError("bandwidth must be positive")
    return cfg


def run_pipeline(config: Mapping[str, Any]) -> dict:
    """Estimate states over a range of ``k`` with both methods and report.

    All numbers except those under ``"runtime"`` are deterministic given the
    config (including its seed).
    """
    cfg = _validate(config)
    clock = {}
    t0 = time.perf_counter()
    planted = None
    if "synthetic" in cfg:
        panel, planted = generate_synthetic(synthetic_spec(cfg["synthetic"]))
    else:
        panel = ingest(cfg["input"])
    if "bandwidth" in cfg:
        s = float(cfg["bandwidth"])
    else:
        s = bandwidth_from_window(int(cfg.get("window", 20)), panel.trs, cfg["degree"])
    clock["load"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    graphs = correlation_graphs(panel, s, stride=cfg["stride"], degree=cfg["degree"])
    clock["correlation"] = time.perf_counter() - t0
    truth = None
    if planted is not None:
        truth = StateSequence(planted.labels[:, graphs.time_index], planted.k, planted.subject_ids)

    t0 = time.perf_counter()
    ks = list(range(cfg["k_min"], cfg["k_max"] + 1))
    fits: dict[str, dict[int, tuple[StateSequence, ClusterModel]]] = {m: {} for m in METHODS}
    ratios: dict[str, dict[int, float]] = {m: {} for m in METHODS}
    for method in METHODS:
        data = _cluster_data(graphs, method)
        for k in ks:
            states, model = estimate_states(graphs, k, method, cfg["restarts"], cfg["seed"])
            fits[method][k] = (states, model)
            ratios[method][k] = within_between_ratio(model, data)
    clock["clustering"] = time.perf_counter() - t0

    selected = {m: _select_k(ratios[m]) for m in METHODS}
    k_sel = selected["wasserstein"]
    report: dict[str, Any] = {
        "bandwidth": s,
        "n_subjects": len(panel.subjects),
        "n_times": len(graphs.t_grid),
        "n_regions": panel.n_regions,
        "constant_channels": panel.constant,
        "degenerate_fraction": graphs.degenerate_fraction,
        "k_range": ks,
        "selected_k": k_sel,
        "selected_k_by_method": selected,
        "methods": {},
    }
    for method in METHODS:
        states, model = fits[method][k_sel]
        trans = transition_matrix(states)
        entry = {
            "ratios": {str(k): _finite(v) for k, v in ratios[method].items()},
            "objective": model.objective,
            "restart_objective_mean_sd": list(model.restart_summary()),
            "states": states.labels.tolist(),
            "transition": trans.to_dict(),
            "subject_transitions": [t.probs.tolist() for t in subject_transition_matrices(states)],
            "diagonal_mass": trans.diagonal_mass(),
        }
        report["methods"][method] = entry
    if truth is not None:
        report["planted"] = {"k": truth.k, "transition": transition_matrix(truth).to_dict(), "methods": {}}
        if truth.k in fits["wasserstein"]:
            for method in METHODS:
                report["planted"]["methods"][method] = _score(fits[method][truth.k][0], truth)
    report["runtime"] = clock
    return report


def _score(states: StateSequence, truth: StateSequence) -> dict:
    """Accuracy and transition diagonal after aligning labels to the planted states."""
    k = truth.k
    aligned = align_labels(states.flat(), truth.flat(), k).reshape(states.labels.shape)
    diag = np.diag(transition_matrix(StateSequence(aligned, k)).probs)
    return {
        "accuracy": clustering_accuracy(states.flat(), truth.flat(), k),
        "aligned_transition_diagonal": diag.tolist(),
        "aligned_diagonal_mass": float(diag.mean()),
    }


def _select_k(ratios: dict[int, float]) -> int:
    finite = {k: v for k, v in ratios.items() if np.isfinite(v)}
    if len(ratios) == 1:
        return next(iter(ratios))
    if len(finite) < 3:
        raise ConfigError("elbow selection needs at least 3 values of k >= 2")
    return elbow_select(finite)


def _finite(v: float):
    return float(v) if np.isfinite(v) else None


def config_to_dict(spec: SyntheticSpec) -> dict:
    return asdict(spec)
