"""
Counter-based random streams

Every stochastic consumer draws from a named stream keyed by the run seed and a
tuple of integer counters (step, sample index, ...). Streams are Philox
generators, so a draw never depends on how many draws other consumers made.
"""
import zlib
from typing import Union

import numpy as np

STREAMS = ("scene", "noise", "dropout", "init", "batch", "timestep")


def stream_id(name: str) -> int:
    """
    Stable 32-bit identifier of a stream name.

    Args:
        name: Stream name

    Returns:
        int: CRC32 of the UTF-8 name
    """
    return zlib.crc32(name.encode("utf-8"))


def stream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """
    Open a named random stream.

    Args:
        seed: Run seed
        name: Stream name (one of STREAMS, other names are allowed)
        *keys: Non-negative integer counters that select an independent substream

    Returns:
        np.random.Generator: A Philox-backed generator
    """
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError(f"seed and keys must be non-negative, got seed={seed}, keys={keys}")
    sequence = np.random.SeedSequence(int(seed), spawn_key=(stream_id(name), *map(int, keys)))
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed: int, name: str, *keys: int) -> int:
    """
    Derive a 31-bit integer seed, e.g. for torch.manual_seed or a per-sample scene seed.
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=(stream_id(name), *map(int, keys)))
    return int(sequence.generate_state(1, dtype=np.uint32)[0] & 0x7FFFFFFF)


def standard_normal(rng: np.random.Generator, shape, dtype: Union[str, np.dtype] = np.float32) -> np.ndarray:
    """Draw float64 normals and cast, so the values do not depend on the requested dtype's sampler."""
    return rng.standard_normal(size=shape).astype(dtype)
