"""Deterministic named random streams derived from one 64-bit seed.

Every random choice in the package (synthetic tree generation, latent
initialization, epoch shuffling, pair sampling) draws from a stream named
here, so one seed fixes the whole run and independent concerns never
share a stream.  Stream keys hash via blake2s, which is stable across
platforms and processes.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(name: str) -> int:
    """Stable 64-bit key for a stream name."""
    digest = hashlib.blake2s(name.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def child_rng(seed: int, *names: object) -> np.random.Generator:
    """Generator for the stream identified by (seed, names...).

    Args:
        seed: the run's master seed (any Python int; 64-bit in practice).
        names: stream identifiers; strings hash via blake2s, integers pass
            through (epoch and digit indices are used directly).

    Returns:
        An independent numpy Generator, deterministic in all arguments.
    """
    entropy: list[int] = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for part in names:
        if isinstance(part, str):
            entropy.append(stream_key(part))
        else:
            entropy.append(int(part) & 0xFFFFFFFFFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(entropy))


__all__ = ["child_rng", "stream_key"]
