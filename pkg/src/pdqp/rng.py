"""Seeded random streams.

Every random draw in the package goes through a ``numpy.random.Generator``
(PCG64).  Independent streams for trials or corpus items are derived from a
root seed by counter, so results do not depend on scheduling order.
"""

import numpy as np

DEFAULT_SEED = 20140101


def make_rng(seed=None, *keys):
    """Return a generator for ``seed`` and an optional counter path ``keys``."""
    if isinstance(seed, np.random.Generator):
        if keys:
            raise TypeError("cannot derive keyed streams from a Generator")
        return seed
    if seed is None:
        seed = DEFAULT_SEED
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))
