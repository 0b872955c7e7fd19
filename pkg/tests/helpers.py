"""Shared builders for the test modules."""

import numpy as np

from ietlab import random_iet, random_symlog_roof
from ietlab.rigidity import _column_data
from ietlab.rauzy import induction_trace


def instance(seed, perm=(4, 3, 2, 1), g_level=0.5):
    """A random IET with a random symmetric logarithmic roof."""
    r = np.random.default_rng(seed)
    T = random_iet(perm, r)
    return T, random_symlog_roof(T, r, g_level=g_level)


def deep_column(T, max_height, j=1, steps=4000):
    """``(a, w, h, shift)`` as floats for column ``j`` of the last Rauzy-Veech state under ``max_height``."""
    tr = induction_trace(T, steps, mode="rauzy", max_height=max_height, store_matrices=False)
    a, w, h, sh = _column_data(tr.states[-1], j)
    return float(a), float(w), h, float(sh)
