"""Random streams: per-replicate seed derivation and buffered draws."""

from __future__ import annotations

import math

import numpy as np

DEFAULT_SEED = 20240601


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replicate ``index`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)]))


def child_seed(seed: int, *keys: int) -> int:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class Draws:
    """Block-buffered scalar draws from a Generator.

    Simulators consume thousands of tiny draws; pulling them one at a time
    from numpy costs more than the geometry. Buffering keeps the stream a
    deterministic function of the generator state.
    """

    __slots__ = ("rng", "_g", "_gi", "_u", "_ui", "block")

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self.rng = rng
        self.block = block
        self._g: list[float] = []
        self._gi = 0
        self._u: list[float] = []
        self._ui = 0

    def normal(self) -> float:
        if self._gi >= len(self._g):
            self._g = self.rng.standard_normal(self.block).tolist()
            self._gi = 0
        v = self._g[self._gi]
        self._gi += 1
        return v

    def uniform(self) -> float:
        if self._ui >= len(self._u):
            self._u = self.rng.random(self.block).tolist()
            self._ui = 0
        v = self._u[self._ui]
        self._ui += 1
        return v

    def exponential(self) -> float:
        return -math.log1p(-self.uniform())

    def index(self, n: int) -> int:
        return min(int(self.uniform() * n), n - 1)

    def unit(self, D: int) -> tuple:
        while True:
            g = [self.normal() for _ in range(D)]
            s = math.sqrt(sum(x * x for x in g))
            if s > 1e-150:
                return tuple(x / s for x in g)

    def unit3(self) -> tuple:
        while True:
            a, b, c = self.normal(), self.normal(), self.normal()
            s = math.sqrt(a * a + b * b + c * c)
            if s > 1e-150:
                return (a / s, b / s, c / s)
