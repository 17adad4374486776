"""Cluster stability selection.

Run a base selector on every half sample of a complementary-pairs plan,
count how often each feature and each cluster is hit, turn the per-feature
counts into within-cluster weights, and emit one representative column per
cluster.  Thresholding or ranking the cluster proportions then gives the
selected model.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import DataSet
from .lasso import (
    PathTie,
    cross_validate_lambda,
    fit_lasso_at,
    fit_lasso_path,
    select_first_k,
)
from .subsampling import SubsamplePlan, draw_complementary_pairs, restrict

SCHEMES = ("weighted", "simple", "sparse")
BASES = ("fixed-lambda-set", "first-k-path", "cv-lambda-per-half")


@dataclass(frozen=True)
class ClusterPartition:
    """Disjoint nonempty clusters covering features 0..p-1."""

    clusters: tuple[tuple[int, ...], ...]
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        clusters = tuple(tuple(sorted(int(j) for j in c)) for c in self.clusters)
        object.__setattr__(self, "clusters", clusters)
        if not clusters:
            raise ValueError("need at least one cluster")
        seen: set[int] = set()
        total = 0
        for c in clusters:
            if not c:
                raise ValueError("empty cluster")
            s = set(c)
            if len(s) != len(c):
                raise ValueError(f"repeated feature in cluster {c}")
            if s & seen:
                raise ValueError(f"cluster {c} overlaps another")
            seen |= s
            total += len(c)
        if seen != set(range(total)):
            raise ValueError("clusters must cover 0..p-1 exactly")
        if self.names is not None:
            names = tuple(self.names)
            if len(names) != len(clusters):
                raise ValueError("one name per cluster required")
            object.__setattr__(self, "names", names)

    @classmethod
    def singletons(cls, p: int) -> "ClusterPartition":
        return cls(clusters=tuple((j,) for j in range(p)))

    @property
    def K(self) -> int:
        return len(self.clusters)

    @property
    def p(self) -> int:
        return sum(len(c) for c in self.clusters)

    def cluster_of(self) -> np.ndarray:
        """Feature index -> cluster index."""
        out = np.empty(self.p, dtype=int)
        for k, c in enumerate(self.clusters):
            out[list(c)] = k
        return out


@dataclass(frozen=True)
class SelectionRecord:
    """One half sample's selected features, already unioned over lambdas."""

    pair: int
    half: str  # "A" or "Ac"
    selected: frozenset[int]

    def __post_init__(self):
        if self.half not in ("A", "Ac"):
            raise ValueError(f"half tag must be 'A' or 'Ac', got {self.half!r}")
        object.__setattr__(self, "selected", frozenset(int(j) for j in self.selected))


class HalfSampleFailure(RuntimeError):
    """A solver failed on one half sample."""

    def __init__(self, pair: int, half: str, cause: Exception):
        self.pair = pair
        self.half = half
        super().__init__(f"solver failure on half sample (pair {pair}, {half}): {cause}")


def _fixed_lambda_supports(half: DataSet, lambdas: tuple[float, ...]) -> set[int]:
    """Union of lasso supports over `lambdas`, read off one homotopy path.

    A knot tie, or a path that stops above the smallest lambda, falls back to
    coordinate descent per lambda; both routes solve the same problem.
    """
    lam_min = min(lambdas)
    try:
        path = fit_lasso_path(half, stop_lambda=lam_min)
    except PathTie:
        path = None
    if path is not None and (path.completed or path.terminal_lambda <= lam_min):
        sel: set[int] = set()
        for lam in lambdas:
            sel.update(np.flatnonzero(path.coefficients_at(lam)).tolist())
        return sel
    sel = set()
    for lam in lambdas:
        sel |= fit_lasso_at(half, lam).support
    return sel


def run_base_selections(
    data: DataSet,
    plan: SubsamplePlan,
    lambdas=None,
    base: str = "fixed-lambda-set",
    first_k: int | None = None,
    cv_folds: int = 10,
    seed: int = 0,
    threads: int = 1,
) -> list[SelectionRecord]:
    """Run the base selector on all 2B half samples.

    base "fixed-lambda-set": union of lasso supports over the given lambdas.
    base "first-k-path": the first `first_k` features to enter the path.
    base "cv-lambda-per-half": support at a per-half cross-validated lambda.
    """
    if base not in BASES:
        raise ValueError(f"base must be one of {BASES}, got {base!r}")
    if base == "fixed-lambda-set":
        if lambdas is None or len(tuple(lambdas)) == 0:
            raise ValueError("fixed-lambda-set base needs a nonempty lambda list")
        lambdas = tuple(float(l) for l in lambdas)
    if base == "first-k-path" and (first_k is None or first_k < 1):
        raise ValueError("first-k-path base needs a positive first_k")

    tasks = []
    for b, (first, second) in enumerate(plan.pairs):
        tasks.append((b, "A", first))
        tasks.append((b, "Ac", second))

    def solve(task):
        b, tag, rows = task
        half = restrict(data, rows)
        try:
            if base == "fixed-lambda-set":
                sel = _fixed_lambda_supports(half, lambdas)
            elif base == "first-k-path":
                sel = set(select_first_k(fit_lasso_path(half), first_k))
            else:
                lam = cross_validate_lambda(
                    half, folds=cv_folds, seed=seed, stream=1 + 2 * b + (tag == "Ac")
                )
                sel = set(fit_lasso_at(half, lam).support)
        except Exception as exc:
            raise HalfSampleFailure(b, tag, exc) from exc
        return b, tag, frozenset(sel)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve, tasks))
    else:
        results = [solve(t) for t in tasks]
    by_id = {(b, tag): sel for b, tag, sel in results}
    return [
        SelectionRecord(pair=b, half=tag, selected=by_id[(b, tag)])
        for b, tag, _ in tasks
    ]


def feature_proportions(records: list[SelectionRecord], p: int) -> np.ndarray:
    """Fraction of half samples selecting each feature."""
    if not records:
        raise ValueError("no records")
    counts = np.zeros(p)
    for rec in records:
        for j in rec.selected:
            if not 0 <= j < p:
                raise ValueError(f"feature {j} out of range for p={p}")
            counts[j] += 1
    return counts / len(records)


def cluster_proportions(
    records: list[SelectionRecord], partition: ClusterPartition
) -> np.ndarray:
    """Fraction of half samples hitting each cluster (any member selected)."""
    if not records:
        raise ValueError("no records")
    counts = np.zeros(partition.K)
    sets = [set(c) for c in partition.clusters]
    for rec in records:
        for k, members in enumerate(sets):
            if rec.selected & members:
                counts[k] += 1
    return counts / len(records)


def simultaneous_cluster_proportions(
    records: list[SelectionRecord], partition: ClusterPartition
) -> np.ndarray:
    """Fraction of pairs hitting each cluster in both halves."""
    halves: dict[int, dict[str, frozenset[int]]] = {}
    for rec in records:
        slot = halves.setdefault(rec.pair, {})
        if rec.half in slot:
            raise ValueError(f"duplicate record for pair {rec.pair} half {rec.half}")
        slot[rec.half] = rec.selected
    for b, slot in halves.items():
        if set(slot) != {"A", "Ac"}:
            raise ValueError(f"pair {b} is missing a half; records must be paired")
    counts = np.zeros(partition.K)
    sets = [set(c) for c in partition.clusters]
    for slot in halves.values():
        for k, members in enumerate(sets):
            if (slot["A"] & members) and (slot["Ac"] & members):
                counts[k] += 1
    return counts / len(halves)


def compute_weights(
    feature_props: np.ndarray, cluster: tuple[int, ...], scheme: str
) -> tuple[np.ndarray, bool]:
    """Within-cluster simplex weights under the given scheme.

    weighted: proportional to each member's selection proportion; falls back
    to simple averaging (flagged) when every proportion is zero.  simple:
    uniform.  sparse: uniform over the argmax proportions (flagged when the
    whole cluster has proportion zero, where the argmax is uninformative).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    props = np.asarray([feature_props[j] for j in cluster], dtype=float)
    size = len(cluster)
    if size == 0:
        raise ValueError("empty cluster")
    if scheme == "simple":
        return np.full(size, 1.0 / size), False
    if scheme == "weighted":
        total = props.sum()
        if total == 0.0:
            return np.full(size, 1.0 / size), True
        return props / total, False
    top = props.max()
    argmax = props == top
    return argmax / argmax.sum(), bool(top == 0.0)


def cluster_representative(
    data: DataSet, cluster: tuple[int, ...], weights: np.ndarray
) -> np.ndarray:
    """Weighted average of the cluster's raw columns."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(cluster),):
        raise ValueError("one weight per cluster member required")
    if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must lie on the simplex")
    return data.X[:, list(cluster)] @ w


@dataclass(frozen=True)
class CssResult:
    """Everything the selection run produced.

    feature_props and cluster_props are the per-feature and per-cluster hit
    fractions over all 2B half samples; weights and representatives follow
    the chosen scheme; weight_fallback marks clusters where the weighted
    scheme degraded to uniform (or a sparse argmax carried no information).
    """

    partition: ClusterPartition
    feature_props: np.ndarray
    cluster_props: np.ndarray
    weights: tuple[np.ndarray, ...]
    weight_fallback: tuple[bool, ...]
    representatives: np.ndarray
    scheme: str
    B: int
    base: str
    lambdas: tuple[float, ...] | None
    seed: int

    def kept_features(self, k: int) -> tuple[int, ...]:
        """Members of cluster k with nonzero weight."""
        c = self.partition.clusters[k]
        w = self.weights[k]
        return tuple(j for j, wj in zip(c, w) if wj != 0.0)

    def to_json_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "base": self.base,
            "B": self.B,
            "seed": self.seed,
            "lambdas": None if self.lambdas is None else list(self.lambdas),
            "clusters": [list(c) for c in self.partition.clusters],
            "cluster_names": (
                list(self.partition.names) if self.partition.names else None
            ),
            "feature_props": self.feature_props.tolist(),
            "cluster_props": self.cluster_props.tolist(),
            "weights": [w.tolist() for w in self.weights],
            "weight_fallback": list(self.weight_fallback),
            "kept_features": [
                list(self.kept_features(k)) for k in range(self.partition.K)
            ],
        }

    def csv_rows(self) -> list[tuple]:
        """Flat per-feature rows: feature, cluster, pi_hat, theta_hat, weight."""
        rows = []
        for k, c in enumerate(self.partition.clusters):
            for pos, j in enumerate(c):
                rows.append(
                    (
                        j,
                        k,
                        float(self.feature_props[j]),
                        float(self.cluster_props[k]),
                        float(self.weights[k][pos]),
                    )
                )
        rows.sort(key=lambda r: r[0])
        return rows


def run_css(
    data: DataSet,
    partition: ClusterPartition,
    scheme: str,
    plan: SubsamplePlan | None = None,
    B: int = 100,
    seed: int = 0,
    lambdas=None,
    base: str = "fixed-lambda-set",
    first_k: int | None = None,
    cv_folds: int = 10,
    threads: int = 1,
) -> CssResult:
    """One full cluster stability selection run.

    With the default base and no lambdas given, a single lambda is chosen by
    cross-validation on the full data before subsampling.
    """
    if partition.p != data.p:
        raise ValueError(
            f"partition covers {partition.p} features but data has {data.p}"
        )
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    if plan is None:
        plan = draw_complementary_pairs(data.n, B, seed)
    if base == "fixed-lambda-set" and lambdas is None:
        lambdas = (cross_validate_lambda(data, folds=cv_folds, seed=seed),)
    records = run_base_selections(
        data,
        plan,
        lambdas=lambdas,
        base=base,
        first_k=first_k,
        cv_folds=cv_folds,
        seed=seed,
        threads=threads,
    )
    return summarize_records(
        data, partition, records, scheme,
        B=plan.B, base=base,
        lambdas=None if lambdas is None else tuple(float(l) for l in lambdas),
        seed=seed,
    )


def summarize_records(
    data: DataSet,
    partition: ClusterPartition,
    records: list[SelectionRecord],
    scheme: str,
    B: int,
    base: str,
    lambdas: tuple[float, ...] | None,
    seed: int,
) -> CssResult:
    """Aggregate half-sample records into a CssResult."""
    props = feature_proportions(records, partition.p)
    cprops = cluster_proportions(records, partition)
    weights = []
    fallback = []
    reps = np.empty((data.n, partition.K))
    for k, c in enumerate(partition.clusters):
        w, flag = compute_weights(props, c, scheme)
        weights.append(w)
        fallback.append(flag)
        reps[:, k] = cluster_representative(data, c, w)
    return CssResult(
        partition=partition,
        feature_props=props,
        cluster_props=cprops,
        weights=tuple(weights),
        weight_fallback=tuple(fallback),
        representatives=reps,
        scheme=scheme,
        B=B,
        base=base,
        lambdas=lambdas,
        seed=seed,
    )


@dataclass(frozen=True)
class SelectedCluster:
    cluster: int
    kept: tuple[int, ...]


def threshold_select(result: CssResult, tau: float) -> list[SelectedCluster]:
    """Clusters whose hit fraction reaches tau, with their kept features."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    out = []
    for k in range(result.partition.K):
        if result.cluster_props[k] >= tau:
            out.append(SelectedCluster(cluster=k, kept=result.kept_features(k)))
    return out


def candidate_sets(
    cluster_props: np.ndarray, partition: ClusterPartition
) -> list[tuple[int, ...]]:
    """Nested candidate feature sets, one per distinct proportion level.

    The i-th set unions all clusters whose proportion reaches the i-th
    largest distinct level, so later sets contain earlier ones.
    """
    levels = sorted(set(float(v) for v in cluster_props), reverse=True)
    out = []
    for level in levels:
        feats: list[int] = []
        for k, c in enumerate(partition.clusters):
            if cluster_props[k] >= level:
                feats.extend(c)
        out.append(tuple(sorted(feats)))
    return out


def select_top_s(cluster_props: np.ndarray, s: int) -> tuple[int, ...] | None:
    """The s entries with the largest proportions, or None on a boundary tie.

    None means "no set of exactly s is implied by the proportions"; ties
    inside the top s are fine, a tie straddling the boundary is not.  Works
    on any proportion vector (clusters or single features).
    """
    K = len(cluster_props)
    if not 1 <= s <= K:
        raise ValueError(f"s must lie in 1..{K}")
    order = np.argsort(-np.asarray(cluster_props), kind="stable")
    if s < K and cluster_props[order[s - 1]] == cluster_props[order[s]]:
        return None
    return tuple(sorted(int(k) for k in order[:s]))
