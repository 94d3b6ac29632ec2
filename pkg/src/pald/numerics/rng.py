"""Named, reproducible random streams.

Every stochastic component draws from its own stream so that independent
runs (seeds x modes x t-levels x participants) stay reproducible no matter
in which order they execute.  A stream is a PCG64 generator keyed by the
run seed plus the SHA-256 of a label path, e.g. ``stream(13, "ae", "init")``.
The derivation is fixed: changing it invalidates recorded expectations.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, *labels) -> np.random.Generator:
    """Return a fresh generator for (seed, labels), independent across labels."""
    tag = "\x1f".join(str(x) for x in labels)
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    ss = np.random.SeedSequence(entropy=[int(seed) & _MASK64, *words])
    return np.random.Generator(np.random.PCG64(ss))


def spawn_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit seed usable to key a child stream."""
    return int(rng.integers(0, 1 << 63))
