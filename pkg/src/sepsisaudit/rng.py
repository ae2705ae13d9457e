"""Deterministic random-number streams.

Every stream in the package is a Philox4x64 counter-based generator keyed
through ``numpy.random.SeedSequence`` from an explicit integer tuple, so any
draw is a pure function of its key: runs are bit-reproducible across
platforms, processes, and thread schedules. Replicated procedures
(bootstrap resamples, permutation replicates, forest trees, shuffle epochs)
key each replicate as ``(master_seed, replicate_index, ...)`` instead of
drawing from one shared stream, which makes results independent of
execution order.
"""

import hashlib

import numpy as np


def string_key(text):
    """Map a string to a stable 64-bit integer (blake2s digest)."""
    digest = hashlib.blake2s(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def keyed_rng(*key):
    """Philox generator keyed by a tuple of ints and/or strings."""
    parts = tuple(string_key(k) if isinstance(k, str) else int(k) for k in key)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(parts)))


def replicate_rng(seed, index):
    """Generator for one replicate, keyed by (master seed, replicate index)."""
    return keyed_rng(int(seed), int(index))


def derive_seed(*key):
    """Stable 32-bit integer seed derived from a tuple of ints and/or strings.

    Used to hand each report cell (classifier x group x scheme) its own
    master seed so sweep results never depend on evaluation order.
    """
    parts = tuple(string_key(k) if isinstance(k, str) else int(k) for k in key)
    return int(np.random.SeedSequence(parts).generate_state(1)[0])
