"""Splittable, counter-based random streams for reproducible parallel runs.

Every consumer of randomness gets its own Philox generator derived from an
integer key tuple, so a run decomposed over any number of workers draws the
exact same numbers as a serial run.
"""

from __future__ import annotations

import numpy as np

# Key-tuple tags distinguishing stream families under one master seed.
KIND_CHAIN = 0
KIND_SWAP = 1
KIND_DATA = 2
KIND_MISC = 3


def substream(*key: int) -> np.random.Generator:
    """Independent generator for an integer key tuple."""
    ss = np.random.SeedSequence(entropy=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def chain_stream(master_seed: int, algo_index: int, run: int, chain: int) -> np.random.Generator:
    return substream(master_seed, algo_index, run, KIND_CHAIN, chain)


def swap_stream(master_seed: int, algo_index: int, run: int) -> np.random.Generator:
    return substream(master_seed, algo_index, run, KIND_SWAP, 0)


def data_stream(data_seed: int) -> np.random.Generator:
    return substream(data_seed, KIND_DATA)


def normal_box_muller(gen: np.random.Generator, size: int) -> np.ndarray:
    """Standard normals via Box-Muller on the uniform stream.

    Used for synthetic-data noise so regeneration is bit-identical from the
    seed alone, independent of numpy's internal normal algorithm.
    """
    n_pairs = (size + 1) // 2
    # 1 - uniform[0,1) lies in (0,1], keeping log() finite.
    u1 = 1.0 - gen.random(n_pairs)
    u2 = gen.random(n_pairs)
    r = np.sqrt(-2.0 * np.log(u1))
    out = np.empty(2 * n_pairs)
    out[0::2] = r * np.cos(2.0 * np.pi * u2)
    out[1::2] = r * np.sin(2.0 * np.pi * u2)
    return out[:size]
