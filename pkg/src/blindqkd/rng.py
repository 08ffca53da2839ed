"""Seeded random streams split by round and role.

Every round gets one independent stream per role. Streams are carved out of
fixed-size blocks generated with numpy ``SeedSequence`` spawn keys, so the
draws for ``(seed, round, role)`` never depend on which thread ran the round
or in what order rounds were executed.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np

from .polarization import canonicalize

ROLES = ("alice", "bob", "eve", "measurement")
_ROLE_IDS = {role: i for i, role in enumerate(ROLES)}
BLOCK_ROUNDS = 1024
# draws available to one role in one round; the protocols use at most 4
ROUND_BUDGET = 16


class StreamExhausted(RuntimeError):
    pass


class RandomStream:
    """Uniform reals in [0, 1) with a draw counter and an angle source.

    ``grid`` switches angle draws from continuous uniform on [0, 2pi) to the
    ``2*grid`` multiples of ``pi/grid``.
    """

    __slots__ = ("_it", "draws", "grid")

    def __init__(self, values: Iterable[float], grid: int | None = None):
        self._it: Iterator[float] = iter(values)
        self.draws = 0
        self.grid = grid

    @classmethod
    def from_seed(cls, seed: int, grid: int | None = None) -> RandomStream:
        """Unbounded stream, for Monte Carlo checks outside the harness."""
        rng = np.random.default_rng(seed)

        def gen() -> Iterator[float]:
            while True:
                yield from rng.random(4096).tolist()

        return cls(gen(), grid)

    def uniform(self) -> float:
        try:
            u = next(self._it)
        except StopIteration:
            raise StreamExhausted("random stream exhausted") from None
        self.draws += 1
        return u

    def bit(self) -> int:
        return 1 if self.uniform() >= 0.5 else 0

    def angle(self) -> float:
        u = self.uniform()
        if self.grid is None:
            return canonicalize(2.0 * math.pi * u)
        return math.pi * int(u * 2 * self.grid) / self.grid


@lru_cache(maxsize=256)
def _block(seed: int, role: int, block: int) -> list[list[float]]:
    ss = np.random.SeedSequence(seed, spawn_key=(role, block))
    rng = np.random.Generator(np.random.PCG64(ss))
    return rng.random((BLOCK_ROUNDS, ROUND_BUDGET)).tolist()


class RngDiscipline:
    def __init__(self, seed: int, grid: int | None = None):
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.grid = grid

    def stream(self, round_index: int, role: str) -> RandomStream:
        if round_index < 0:
            raise ValueError("round index must be nonnegative")
        block, row = divmod(round_index, BLOCK_ROUNDS)
        values = _block(self.seed, _ROLE_IDS[role], block)[row]
        return RandomStream(values, self.grid)
