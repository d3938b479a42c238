"""
Seed derivation for reproducible experiments.

A master seed fans out to per-trial, per-fold and per-sample child seeds with a
splitmix64 mix of the master seed and a path of integer labels, e.g.
``derive_seed(master, TRIAL, trial_id, FOLD, fold)``. A child seed depends only on
its path, so the order in which parallel work completes never changes it.
"""

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Path labels keep different uses of the same index apart.
TRIAL = 1
FOLD = 2
SEED = 3
SAMPLE = 4
INIT = 5
SUGGEST = 6


def splitmix64(state: int) -> int:
    """One splitmix64 output for the given 64-bit state."""
    z = (state + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, *path: int) -> int:
    """
    Derive a child seed from a master seed and a path of labels.

    Args:
        master: Master seed (any integer)
        *path: Integer labels identifying the consumer

    Returns:
        int: Non-negative seed below 2**63, usable by numpy generators
    """
    state = splitmix64(master & _MASK)
    for label in path:
        state = splitmix64(state ^ (label & _MASK))
    return state >> 1
