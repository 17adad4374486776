"""Deterministic random streams.

Every stochastic component draws from a counter-based Philox generator keyed
by (seed, domain, index).  The domain word keeps streams from different parts
of the package (subsample plans, CV shuffles, each simulation family) disjoint
even when the user passes the same seed everywhere, and the index word gives
each pair / replication its own stream so work can be scheduled in any order,
or in parallel, with identical output.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_MASK48 = (1 << 48) - 1

# Stream domains.  Values are arbitrary but frozen: changing them changes
# every seeded output of the package.
DOMAIN_SUBSAMPLE = 1
DOMAIN_CV = 2
DOMAIN_SIM_SPARSE = 3
DOMAIN_SIM_WEIGHTED = 4
DOMAIN_SIM_TWO_PROXY = 5
DOMAIN_SIM_PROXY = 6
DOMAIN_STUDY = 7


def stream_rng(seed: int, domain: int, index: int = 0) -> np.random.Generator:
    """Return the Philox generator for one (seed, domain, index) stream."""
    if index < 0 or index > _MASK48:
        raise ValueError(f"stream index {index} outside [0, 2^48)")
    key = np.array(
        [seed & _MASK64, ((domain & 0xFFFF) << 48) | index], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=key))


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Normal draws via the documented probit transform.

    z = ndtri((k + 1/2) / 2^53) with k uniform on {0, ..., 2^53 - 1}; the
    shifted uniform lies strictly inside (0, 1) so the probit is always
    finite.  Pinned so a reimplementation can reproduce the distribution
    from the same uniform stream.
    """
    k = rng.integers(0, 1 << 53, size=size, dtype=np.int64)
    return ndtri((k + 0.5) / (1 << 53))
