"""Counter-based random substreams.

Every random quantity in the package is drawn from a Philox generator keyed by
``(seed, *key)``.  Philox is counter based, so a substream depends only on its
key and never on how many other streams were consumed before it or on which
thread consumed them.
"""

import numpy as np

# Stream tags keep unrelated experiments from sharing keys.
TAG_PATH = 0
TAG_EXP_MARTINGALE = 1
TAG_BDG = 2
TAG_INCREMENTS = 3
TAG_ERGODIC = 4
TAG_ERGODIC_ORACLE = 5


def substream(seed, *key):
    """Return an independent ``numpy.random.Generator`` for ``(seed, *key)``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    key = tuple(int(k) for k in key)
    if any(k < 0 for k in key):
        raise ValueError("stream keys must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def path_stream(seed, n, J, k, j):
    """Substream for replicate ``j`` of scenario ``k`` in the ``(n, J)`` experiment."""
    return substream(seed, TAG_PATH, n, J, k, j)
