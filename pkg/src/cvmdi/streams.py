"""Deterministic random streams derived from a single seed.

Every random number in a run comes from a named sub-stream of one integer
seed, so any output value can be regenerated in isolation. Streams are keyed
by ``(name, *path)`` through :class:`numpy.random.SeedSequence` spawn keys;
the same key always yields the same generator regardless of how work is
split between processes.
"""
import numpy as np

STREAM_IDS = {"alphabet": 0, "quantum": 1, "phase": 2, "oracle": 3}


class Streams:
    """Factory for reproducible generators.

    Parameters
    ----------
    seed : int
        Root seed (any non-negative integer up to 2**64 - 1).
    path : tuple of int
        Prefix appended to every spawn key; used to give sweep points or the
        oracle their own independent families of streams.
    """

    def __init__(self, seed, path=()):
        if isinstance(seed, Streams):
            seed, path = seed.seed, seed.path + tuple(path)
        self.seed = int(seed)
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        self.path = tuple(int(p) for p in path)

    def child(self, *key):
        return Streams(self.seed, self.path + tuple(int(k) for k in key))

    def named(self, name):
        """Child family for one of the named streams."""
        return self.child(STREAM_IDS[name])

    def generator(self, name, *key):
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path + (STREAM_IDS[name],) + tuple(key))
        return np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"Streams(seed={self.seed}, path={self.path})"


def as_streams(rng, default_seed):
    """Accept a ``Streams``, an int seed or ``None`` (use ``default_seed``)."""
    if rng is None:
        return Streams(default_seed)
    if isinstance(rng, Streams):
        return rng
    return Streams(int(rng))
