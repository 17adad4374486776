"""Comparator methods: SS and MB stability selection, prototype lasso,
and the simple-average cluster representative lasso."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import HalfSampleFailure, ClusterPartition
from .data import DataSet
from .lasso import LassoPath, fit_lasso_at, fit_lasso_path
from .subsampling import SubsamplePlan, restrict


def _per_lambda_proportions(
    data: DataSet, row_sets, labels, lambdas, threads: int
) -> np.ndarray:
    """Max over lambdas of per-lambda selection frequency across row sets."""
    lambdas = tuple(float(l) for l in lambdas)
    if not lambdas:
        raise ValueError("need at least one lambda")

    def solve(item):
        label, rows = item
        half = restrict(data, rows)
        try:
            return [fit_lasso_at(half, lam).support for lam in lambdas]
        except Exception as exc:
            raise HalfSampleFailure(label[0], label[1], exc) from exc

    items = list(zip(labels, row_sets))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            supports = list(pool.map(solve, items))
    else:
        supports = [solve(it) for it in items]

    counts = np.zeros((len(lambdas), data.p))
    for per_set in supports:
        for i, sup in enumerate(per_set):
            for j in sup:
                counts[i, j] += 1
    return (counts / len(row_sets)).max(axis=0)


def stability_selection_ss(
    data: DataSet, plan: SubsamplePlan, lambdas, threads: int = 1
) -> np.ndarray:
    """Per-feature selection proportions over complementary half-sample pairs.

    With one lambda this is the plain fraction of the 2B halves selecting
    each feature; with several it is the max over lambdas of the per-lambda
    fractions.
    """
    row_sets = []
    labels = []
    for b, (first, second) in enumerate(plan.pairs):
        row_sets.append(first)
        labels.append((b, "A"))
        row_sets.append(second)
        labels.append((b, "Ac"))
    return _per_lambda_proportions(data, row_sets, labels, lambdas, threads)


def stability_selection_mb(
    data: DataSet, subsample_list, lambdas, threads: int = 1
) -> np.ndarray:
    """Per-feature selection proportions over unpaired half subsamples."""
    m = data.n // 2
    row_sets = []
    labels = []
    for i, rows in enumerate(subsample_list):
        rows = np.asarray(rows, dtype=int)
        if rows.shape != (m,):
            raise ValueError(f"subsample {i} must have {m} rows, got {rows.shape}")
        row_sets.append(rows)
        labels.append((i, "subsample"))
    if not row_sets:
        raise ValueError("need at least one subsample")
    return _per_lambda_proportions(data, row_sets, labels, lambdas, threads)


@dataclass(frozen=True)
class PrototypeMap:
    """One representative feature per cluster, chosen by marginal correlation.

    tie_flags marks clusters where the argmax was not unique (lowest index
    wins); excluded lists zero-variance members that never competed.
    """

    prototypes: tuple[int, ...]
    tie_flags: tuple[bool, ...]
    excluded: tuple[tuple[int, ...], ...]


def marginal_prototypes(data: DataSet, partition: ClusterPartition) -> PrototypeMap:
    """Pick each cluster's member with the largest |corr(X_j, y)|."""
    y = data.y - data.y.mean()
    y_norm = float(np.linalg.norm(y))
    if y_norm == 0.0:
        raise ValueError("response is constant; marginal correlations undefined")
    Xc = data.X - data.X.mean(axis=0)
    col_norms = np.linalg.norm(Xc, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.abs(Xc.T @ y) / (col_norms * y_norm)

    prototypes = []
    ties = []
    excluded = []
    for c in partition.clusters:
        dead = tuple(j for j in c if col_norms[j] == 0.0)
        live = [j for j in c if col_norms[j] > 0.0]
        if not live:
            raise ValueError(f"cluster {c} has no non-constant member")
        vals = corr[live]
        best = vals.max()
        winners = [j for j, v in zip(live, vals) if v == best]
        prototypes.append(min(winners))
        ties.append(len(winners) > 1)
        excluded.append(dead)
    return PrototypeMap(
        prototypes=tuple(prototypes),
        tie_flags=tuple(ties),
        excluded=tuple(excluded),
    )


def protolasso(
    data: DataSet, partition: ClusterPartition
) -> tuple[LassoPath, PrototypeMap]:
    """Lasso path on one prototype column per cluster.

    Path feature indices refer to clusters (position in the prototype list),
    not to original columns; translate through the returned PrototypeMap.
    """
    proto = marginal_prototypes(data, partition)
    reduced = DataSet(
        X=data.X[:, list(proto.prototypes)], y=data.y, center=data.center
    )
    return fit_lasso_path(reduced), proto


def average_representatives(data: DataSet, partition: ClusterPartition) -> np.ndarray:
    """One simple-average column per cluster, raw columns, no rescaling."""
    reps = np.empty((data.n, partition.K))
    for k, c in enumerate(partition.clusters):
        reps[:, k] = data.X[:, list(c)].mean(axis=1)
    return reps


def cluster_rep_lasso(data: DataSet, partition: ClusterPartition) -> LassoPath:
    """Lasso path on simple-average cluster representatives.

    Path feature indices refer to clusters in partition order.
    """
    reduced = DataSet(
        X=average_representatives(data, partition), y=data.y, center=data.center
    )
    return fit_lasso_path(reduced)
