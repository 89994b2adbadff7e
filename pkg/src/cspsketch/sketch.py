"""Mergeable linear sketch for the l1 norm of a turnstile vector.

Each row keeps the dot product of the vector with an i.i.d. standard Cauchy
row; the median of the absolute row values estimates ||x||_1 (the median of
|Cauchy| is 1).  Projection entries are regenerated on demand from a Philox
stream keyed by the seed and counter-addressed by the coordinate, so no
matrix is ever stored.

Per-row contributions are rounded to fixed point and accumulated in int64.
Integer addition is associative, so sketches of split streams merge to
exactly the accumulators of the single-pass sketch.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError

ROWS_CONSTANT = 48
FRAC_BITS = 24
SCALE = float(1 << FRAC_BITS)
# Cauchy draws are clipped here so products stay inside int64
ENTRY_CAP = float(1 << 20)
MAX_DELTA = float(1 << 18)
SEED_MASK = (1 << 64) - 1
# columns kept in memory for repeated indices; purely a speed knob
COLUMN_CACHE = 64


def rows_for(epsilon: float, c: int = ROWS_CONSTANT) -> int:
    return math.ceil(c / epsilon**2)


class L1Sketch:
    """l1-norm sketch of x in R^n under updates x[index] += delta.

    estimate() is within (1 +- epsilon) ||x||_1 with probability well above
    2/3 for rows = ceil(48 / epsilon^2).  Inputs must keep ||x||_1 below
    about 5e5 for the fixed-point accumulators to stay exact.
    """

    def __init__(self, n: int, epsilon: float = 0.1, seed: int = 0, rows: int | None = None):
        if n < 1:
            raise ValidationError("dimension must be positive")
        if not 0 < epsilon < 1:
            raise ValidationError("epsilon must lie in (0, 1)")
        self.n = int(n)
        self.epsilon = float(epsilon)
        self.seed = int(seed) & SEED_MASK
        self.rows = int(rows) if rows is not None else rows_for(epsilon)
        self.acc = np.zeros(self.rows, dtype=np.int64)
        self._cache: dict = {}

    def column(self, index: int) -> np.ndarray:
        col = self._cache.get(index)
        if col is None:
            g = np.random.Generator(np.random.Philox(key=self.seed, counter=[0, index, 0, 0]))
            col = np.clip(g.standard_cauchy(self.rows), -ENTRY_CAP, ENTRY_CAP)
            if len(self._cache) < COLUMN_CACHE:
                self._cache[index] = col
        return col

    def update(self, index: int, delta: float) -> None:
        if not 0 <= index < self.n:
            raise ValidationError(f"index {index} outside [0, {self.n})")
        if not abs(delta) <= MAX_DELTA:
            raise ValidationError(f"update magnitude {delta} exceeds {MAX_DELTA}")
        if delta == 0:
            return
        contrib = np.rint(self.column(index) * (delta * SCALE)).astype(np.int64)
        self.acc += contrib

    def extend(self, updates) -> None:
        for index, delta in updates:
            self.update(index, delta)

    def compatible(self, other: "L1Sketch") -> bool:
        return (self.n, self.rows, self.seed) == (other.n, other.rows, other.seed)

    def merge(self, other: "L1Sketch") -> "L1Sketch":
        if not self.compatible(other):
            raise ValidationError("cannot merge sketches with different (n, rows, seed)")
        out = L1Sketch(self.n, self.epsilon, self.seed, self.rows)
        out.acc = self.acc + other.acc
        return out

    __add__ = merge

    def estimate(self) -> float:
        return float(np.median(np.abs(self.acc.astype(float)))) / SCALE

    def state(self) -> dict:
        return {"n": self.n, "rows": self.rows, "seed": self.seed, "epsilon": self.epsilon}
