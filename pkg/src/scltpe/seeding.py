"""Named, independent random streams derived from one integer seed."""

import zlib

import numpy as np

STREAMS = ("split", "init", "batch", "augment", "hpo", "classifier", "classifier_batch", "resample")


def stream(seed: int, name: str) -> np.random.Generator:
    """Generator for sub-stream ``name`` of ``seed``.

    Streams with different names are statistically independent, so one
    component's consumption never shifts another's draws.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, key])
