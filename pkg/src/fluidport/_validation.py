"""Small argument-checking helpers shared across the package."""

import numpy as np


def check_positive(name, value):
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return float(value)


def check_int(name, value, minimum=None, maximum=None):
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ValueError(f"{name} must be <= {maximum}, got {value}")
    return value


def check_finite_array(name, arr):
    arr = np.asarray(arr)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def rng_from(master_seed, *key):
    """Deterministic generator for a (master seed, sub-key...) pair.

    Independent streams for distinct keys, so work can be fanned out across
    chunks or trials without the results depending on worker count.
    """
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, key)]))
