"""Reproducible random streams.

All randomness goes through numpy's Philox4x64 counter-based generator keyed by
(seed, stream). Philox output is fixed by its published algorithm, so draws are
identical across platforms and numpy versions that keep the bit generator.
"""

import numpy as np


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), int(stream) & (2**64 - 1)]))


def complex_gaussian(n: int, seed: int, stream: int = 0) -> np.ndarray:
    g = generator(seed, stream)
    return g.standard_normal(n) + 1j * g.standard_normal(n)
