"""Cluster stability selection: subsample-and-aggregate feature selection
that scores clusters of correlated features instead of individual columns,
built on an exact lasso path solver, with baselines, closed-form risk
oracles, and seeded simulation studies."""

__version__ = "0.1.0"
