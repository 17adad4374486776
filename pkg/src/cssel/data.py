"""The (X, y) container shared by every solver and estimator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DataSet:
    """A response vector and feature matrix.

    X has one row per observation and one column per feature; y matches the
    rows.  `center` asks downstream solvers to subtract column means from X
    and the mean from y before scaling (for real data with nonzero means);
    the default leaves the data untouched apart from the solvers' internal
    L2 column scaling.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] | None = None
    center: bool = False

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be a 2-D matrix")
        if y.ndim != 1:
            raise ValueError("y must be a 1-D vector")
        n, p = X.shape
        if n < 2:
            raise ValueError(f"need at least 2 rows, got {n}")
        if p < 1:
            raise ValueError("need at least 1 column")
        if y.shape[0] != n:
            raise ValueError(f"y has {y.shape[0]} entries for {n} rows of X")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite entries")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite entries")
        if self.feature_names is not None:
            names = tuple(self.feature_names)
            if len(names) != p:
                raise ValueError(f"{len(names)} feature names for {p} columns")
            object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        self.X.setflags(write=False)
        self.y.setflags(write=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]
