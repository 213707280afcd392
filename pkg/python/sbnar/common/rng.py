"""Seeded random number generation.

All randomness in sbnar flows from 64-bit integer seeds. A seed is expanded
by `numpy.random.SeedSequence` and drives a `numpy.random.PCG64` bit
generator; Gaussian variates come from `Generator.standard_normal()`, which
fills arrays in order, so drawing a block of n values consumes the stream
exactly like n successive single draws. Independent streams for parallel
trajectories are derived with `split_seeds()`, which uses
`SeedSequence.spawn()`: child i of seed s is the same on every machine and
for every pool size.
"""

__all__ = [ #@
    'make_rng',
    'split_seeds',
    'snapshot',
    'restore',
    'derive_seed',
]

import copy

import numpy as np

from sbnar.common.error import ConfigError

_SEED_MASK = (1 << 64) - 1

def _seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    try:
        seed = int(seed)
    except (TypeError, ValueError):
        raise ConfigError("seed must be an integer, not {!r}".format(seed))
    if seed < 0 or seed > _SEED_MASK:
        raise ConfigError("seed must fit in 64 unsigned bits: {}".format(seed))
    return np.random.SeedSequence(seed)

def make_rng(seed):
    """Returns a fresh `numpy.random.Generator` for the given seed (an integer
    or a `SeedSequence` produced by `split_seeds()`)."""
    return np.random.Generator(np.random.PCG64(_seed_sequence(seed)))

def split_seeds(seed, n):
    """Derives n independent child seed sequences from seed."""
    if n < 0:
        raise ConfigError("cannot split a seed into {} streams".format(n))
    return _seed_sequence(seed).spawn(int(n))

def snapshot(rng):
    """Returns a copy of the generator state that `restore()` accepts."""
    return copy.deepcopy(rng.bit_generator.state)

def restore(state):
    """Returns a new generator continuing from a `snapshot()`."""
    bitgen = np.random.PCG64()
    bitgen.state = state
    return np.random.Generator(bitgen)

def derive_seed(seed, *path):
    """Derives a plain 64-bit integer seed from seed and a path of indices,
    so that configuration objects taking integer seeds can be given
    independent streams. The same (seed, path) always gives the same
    result."""
    parent = _seed_sequence(seed)
    child = np.random.SeedSequence(parent.entropy, spawn_key=tuple(int(i) for i in path))
    return int(child.generate_state(1, dtype=np.uint64)[0])
