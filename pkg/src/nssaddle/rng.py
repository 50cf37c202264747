"""Deterministic random substreams.

Every random draw in the package comes from a generator keyed by
``(seed, *key)``.  Keys are small integer tuples such as ``(t, site)``, so a
round's draws never depend on what other rounds consumed.
"""

from __future__ import annotations

import numpy as np

# call-site tags used as the last element of substream keys
SITE_X = 0
SITE_Y = 1
SITE_X_HALF = 2
SITE_Y_HALF = 3
SITE_SAMPLE_R = 7


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the substream ``key`` of experiment ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))
