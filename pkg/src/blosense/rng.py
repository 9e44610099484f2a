"""Stage-local random streams derived from a single scenario seed."""

import zlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def stage_key(stage: str) -> int:
    return zlib.crc32(stage.encode("utf-8"))


def derive_rng(seed: int, *stages: str) -> np.random.Generator:
    """Generator for ``seed`` specialised by a path of stage names.

    The same (seed, stages) always yields the same stream, and streams for
    different stage paths are statistically independent.
    """
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    if not 0 <= seed <= SEED_MASK:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    entropy = [int(seed)] + [stage_key(s) for s in stages]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *stages: str) -> int:
    """A child 64-bit seed, for handing independent jobs their own seed."""
    return int(derive_rng(seed, *stages).integers(0, SEED_MASK, dtype=np.uint64, endpoint=True))
