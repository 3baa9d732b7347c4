"""Seedable, split-stream random number generation.

All randomness in the package flows from a single 64-bit seed through named
sub-streams, so that any pipeline stage can be re-run in isolation and
results are reproducible across platforms and process counts.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_to_ints(parts: tuple) -> tuple[int, ...]:
    out = []
    for p in parts:
        if isinstance(p, str):
            out.append(zlib.crc32(p.encode("utf-8")))
        elif isinstance(p, (int, np.integer)):
            out.append(int(p) & 0xFFFFFFFF)
        else:
            raise TypeError(f"stream key parts must be str or int, got {type(p)}")
    return tuple(out)


def stream(seed: int, *parts) -> np.random.Generator:
    """Return a Generator for the sub-stream named by `parts` under `seed`.

    The same (seed, parts) always yields the same bit stream; distinct
    part tuples yield statistically independent streams.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=_key_to_ints(parts))
    return np.random.Generator(np.random.PCG64(ss))
