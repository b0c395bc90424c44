"""Dyadic cubes on the periodic grid.

A cube ``(j, l)`` is ``prod_i [L 2^-j l_i, L 2^-j (l_i + 1))``; half-open, so
each level tiles the torus exactly.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import Grid, GridMismatchError, SampledFunction


class LevelError(ValueError):
    """A requested dyadic level is outside the lattice."""


@dataclass(frozen=True, order=True)
class CubeIndex:
    j: int
    l: tuple[int, ...]

    def __post_init__(self):
        l = tuple(int(v) for v in self.l)
        object.__setattr__(self, "l", l)
        if self.j < 0:
            raise ValueError("level must be non-negative")
        if any(v < 0 or v >= (1 << self.j) for v in l):
            raise ValueError(f"cube coordinates {l} out of range for level {self.j}")

    @property
    def n(self) -> int:
        return len(self.l)

    def side(self, length: float = 1.0) -> float:
        return length * 2.0**-self.j

    def measure(self, length: float = 1.0) -> float:
        return self.side(length) ** self.n

    def corner(self, length: float = 1.0) -> tuple[float, ...]:
        s = self.side(length)
        return tuple(s * v for v in self.l)

    def centre(self, length: float = 1.0) -> tuple[float, ...]:
        s = self.side(length)
        return tuple(s * (v + 0.5) for v in self.l)

    def parent(self) -> CubeIndex:
        if self.j == 0:
            raise LevelError("the level-0 cube has no parent")
        return CubeIndex(self.j - 1, tuple(v >> 1 for v in self.l))

    def ancestor(self, level: int) -> CubeIndex:
        if level > self.j:
            raise LevelError(f"level {level} is finer than {self.j}")
        shift = self.j - level
        return CubeIndex(level, tuple(v >> shift for v in self.l))

    def children(self) -> list[CubeIndex]:
        return [
            CubeIndex(self.j + 1, tuple(2 * v + b for v, b in zip(self.l, bits)))
            for bits in itertools.product((0, 1), repeat=self.n)
        ]

    def contains(self, other: CubeIndex) -> bool:
        """``other`` is a subset of ``self`` (not necessarily proper)."""
        return other.j >= self.j and other.ancestor(self.j) == self

    def slices(self, grid: Grid) -> tuple[slice, ...]:
        s = grid.size >> self.j
        if s == 0:
            raise LevelError(f"level {self.j} is finer than the grid")
        return tuple(slice(v * s, (v + 1) * s) for v in self.l)

    def indicator(self, grid: Grid) -> np.ndarray:
        out = np.zeros(grid.shape, dtype=bool)
        out[self.slices(grid)] = True
        return out

    def to_dict(self) -> dict:
        return {"j": self.j, "l": list(self.l)}

    @classmethod
    def from_dict(cls, d: dict) -> CubeIndex:
        return cls(int(d["j"]), tuple(d["l"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class DyadicLattice:
    """Dyadic levels ``0..max_level`` on ``grid``.

    ``max_level`` defaults to the grid depth (single-sample cubes), the level
    needed to sample the top filter scale at every grid point.
    """

    grid: Grid
    max_level: int | None = None

    def __post_init__(self):
        if self.max_level is None:
            object.__setattr__(self, "max_level", self.grid.depth)
        if not 0 <= self.max_level <= self.grid.depth:
            raise LevelError(
                f"max_level {self.max_level} outside [0, {self.grid.depth}] for this grid"
            )

    def check_level(self, j: int) -> None:
        if j < 0 or j > self.max_level:
            raise LevelError(f"level {j} outside lattice levels 0..{self.max_level}")

    def samples_per_side(self, j: int) -> int:
        self.check_level(j)
        return self.grid.size >> j

    def cube_measure(self, j: int) -> float:
        return (self.grid.length * 2.0**-j) ** self.grid.n

    def cubes_at_level(self, j: int) -> list[CubeIndex]:
        self.check_level(j)
        m = 1 << j
        return [CubeIndex(j, l) for l in itertools.product(range(m), repeat=self.grid.n)]

    def locate(self, x, j: int) -> CubeIndex:
        self.check_level(j)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        side = self.grid.length * 2.0**-j
        l = np.floor(np.mod(x, self.grid.length) / side).astype(int)
        l = np.minimum(l, (1 << j) - 1)
        return CubeIndex(j, tuple(l))

    def cube_of_sample(self, index, j: int) -> CubeIndex:
        self.check_level(j)
        shift = self.grid.depth - j
        idx = (index,) if np.isscalar(index) else tuple(index)
        return CubeIndex(j, tuple(int(i) >> shift for i in idx))

    def corner_indices(self, j: int) -> tuple[slice, ...]:
        """Slices selecting the corner sample of every level-``j`` cube."""
        s = self.samples_per_side(j)
        return (slice(0, None, s),) * self.grid.n

    def reduce(self, values: np.ndarray, j: int, op: str) -> np.ndarray:
        """Per-cube sum/max/min at level ``j``; shape ``(2^j,) * n``."""
        self.check_level(j)
        return _kernels.cube_reduce(np.asarray(values, dtype=float), j, op)

    def expand(self, cube_values: np.ndarray) -> np.ndarray:
        return _kernels.expand_cubes(np.asarray(cube_values, dtype=float), self.grid.size)

    def averages(self, values: np.ndarray, j: int) -> np.ndarray:
        s = self.samples_per_side(j)
        return self.reduce(values, j, "sum") / s**self.grid.n

    def overlap_fractions(self, E, j: int) -> np.ndarray:
        """Fraction of samples in each level-``j`` cube where ``E`` holds."""
        e = _as_mask(E, self.grid)
        return self.averages(e.astype(float), j)

    def overlap_fraction(self, Q: CubeIndex, E) -> float:
        e = _as_mask(E, self.grid)
        self.check_level(Q.j)
        return float(e[Q.slices(self.grid)].mean())


def _as_mask(E, grid: Grid) -> np.ndarray:
    if isinstance(E, SampledFunction):
        if E.grid != grid:
            raise GridMismatchError(f"grid mismatch: {E.grid} vs {grid}")
        E = E.values
    e = np.asarray(E)
    if e.shape != grid.shape:
        raise GridMismatchError(f"mask shape {e.shape} does not match grid {grid.shape}")
    return e.astype(bool)


def cubes_at_level(lat: DyadicLattice, j: int) -> list[CubeIndex]:
    return lat.cubes_at_level(j)


def locate(lat: DyadicLattice, x, j: int) -> CubeIndex:
    return lat.locate(x, j)


def overlap_fraction(lat: DyadicLattice, Q: CubeIndex, E) -> float:
    return lat.overlap_fraction(Q, E)


def maximal_antichain(cubes) -> set[CubeIndex]:
    """Cubes of the input not strictly contained in another input cube."""
    pool = set(cubes)
    out = set()
    for Q in pool:
        covered = False
        for level in range(Q.j):
            if Q.ancestor(level) in pool:
                covered = True
                break
        if not covered:
            out.add(Q)
    return out


def assign_to_maximal(cubes, maximal) -> dict[CubeIndex, list[CubeIndex]]:
    """Group ``cubes`` under the unique member of ``maximal`` containing each."""
    top = set(maximal)
    groups: dict[CubeIndex, list[CubeIndex]] = {Q: [] for Q in top}
    for Q in cubes:
        for level in range(Q.j + 1):
            A = Q.ancestor(level)
            if A in top:
                groups[A].append(Q)
                break
        else:
            raise ValueError(f"{Q} is not covered by the maximal family")
    for v in groups.values():
        v.sort()
    return groups


def dilated_cube(grid: Grid, Q: CubeIndex, factor: float) -> tuple[np.ndarray, float]:
    """Mask and measure of the cube with the same centre and ``factor`` times the side.

    Sides at or above ``L`` cover the whole torus along that axis.
    """
    side = factor * Q.side(grid.length)
    if side >= grid.length:
        return np.ones(grid.shape, dtype=bool), grid.volume
    centre = Q.centre(grid.length)
    mask = np.ones(grid.shape, dtype=bool)
    for c, x in zip(centre, grid.coords()):
        # sample x belongs to the half-open cube [c - side/2, c + side/2)
        t = (x - (c - side / 2)) % grid.length
        mask &= t < side - 1e-12 * grid.length
    return mask, side**grid.n
