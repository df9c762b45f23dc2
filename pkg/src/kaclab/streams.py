"""Deterministic random streams and an order-preserving parallel map.

Every unit of Monte Carlo work is a fixed block of replicas. Its generator is
seeded from (master seed, purpose, time index, block index), so results do not
depend on how many worker threads run the blocks.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

_MASK64 = (1 << 64) - 1


def purpose_code(purpose: str | int) -> int:
    if isinstance(purpose, int):
        return purpose
    return zlib.crc32(purpose.encode("utf-8"))


def block_rng(seed: int, purpose: str | int, t_index: int = 0, block: int = 0) -> np.random.Generator:
    entropy = [int(seed) & _MASK64, purpose_code(purpose), int(t_index), int(block)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def default_threads() -> int:
    return max(1, min(8, os.cpu_count() or 1))


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """map() over a thread pool; output order follows input order."""
    items = list(items)
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def split_blocks(total: int, block_size: int) -> list[tuple[int, int]]:
    """(start, stop) pairs covering range(total) in fixed-size blocks."""
    if total < 0 or block_size < 1:
        raise ValueError("need total >= 0 and block_size >= 1")
    return [(s, min(s + block_size, total)) for s in range(0, total, block_size)]
