"""Sampled functions on a uniform periodic grid.

The torus ``[0, L)^n`` stands in for ``R^n``. Samples sit at ``x_k = k h`` with
``h = L / N_g``. Quadrature is the rectangle rule.

DFT convention: the forward transform is unnormalised and the inverse carries
``1 / N_g^n`` (numpy's default), so for real ``f``

    h^n * sum |f|^2 == h^n / N_g^n * sum |fft(f)|^2

and :func:`convolve` equals ``h^n * ifft(fft(f) * fft(g))``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

MAGIC = b"HLGF"
_HEADER = struct.Struct("<4sIId12x")
HEADER_SIZE = _HEADER.size  # 32 bytes


class GridMismatchError(ValueError):
    """Two sampled objects live on different grids."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with ``size`` points per axis on ``[0, length)^n``."""

    n: int
    size: int
    length: float = 1.0

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.n}")
        if self.size < 8 or self.size & (self.size - 1):
            raise ValueError(f"points per axis must be a power of two >= 8, got {self.size}")
        if not self.length > 0:
            raise ValueError(f"side length must be positive, got {self.length}")

    @property
    def spacing(self) -> float:
        return self.length / self.size

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.size,) * self.n

    @property
    def depth(self) -> int:
        """Dyadic level whose cubes are single samples."""
        return self.size.bit_length() - 1

    @property
    def volume(self) -> float:
        return self.length**self.n

    def axis(self) -> np.ndarray:
        return np.arange(self.size) * self.spacing

    def centred_axis(self) -> np.ndarray:
        """Sample coordinates mapped into ``(-L/2, L/2]``."""
        k = np.arange(self.size)
        return np.where(k > self.size // 2, k - self.size, k) * self.spacing

    def coords(self) -> list[np.ndarray]:
        ax = self.axis()
        return list(np.meshgrid(*([ax] * self.n), indexing="ij"))

    def centred_coords(self) -> list[np.ndarray]:
        ax = self.centred_axis()
        return list(np.meshgrid(*([ax] * self.n), indexing="ij"))

    def wavenumbers(self) -> list[np.ndarray]:
        """Integer wavenumbers per axis, broadcast to the grid shape."""
        k = np.fft.fftfreq(self.size, d=1.0 / self.size)
        return list(np.meshgrid(*([k] * self.n), indexing="ij"))

    def wavenumber_radius(self) -> np.ndarray:
        return np.sqrt(sum(k**2 for k in self.wavenumbers()))

    def refine(self, factor: int = 2) -> Grid:
        return Grid(self.n, self.size * factor, self.length)

    def to_dict(self) -> dict:
        return {"n": self.n, "N_g": self.size, "L": self.length}


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Samples of a function on ``grid``; ``values`` has shape ``grid.shape``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values)
        if vals.dtype.kind not in "fc":
            vals = vals.astype(float)
        if vals.shape != self.grid.shape:
            if vals.size == self.grid.size**self.grid.n:
                vals = vals.reshape(self.grid.shape)
            else:
                raise ValueError(
                    f"expected {self.grid.size ** self.grid.n} samples, got {vals.size}"
                )
        if not np.all(np.isfinite(vals)):
            raise ValueError("sampled values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: Grid) -> SampledFunction:
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> SampledFunction:
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> SampledFunction:
        return cls(grid, fn(*grid.coords()))

    @cached_property
    def spectrum(self) -> np.ndarray:
        return np.fft.fftn(self.values)

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def _check(self, other: SampledFunction):
        if other.grid != self.grid:
            raise GridMismatchError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other):
        if isinstance(other, SampledFunction):
            self._check(other)
            return SampledFunction(self.grid, self.values + other.values)
        return SampledFunction(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, SampledFunction):
            self._check(other)
            return SampledFunction(self.grid, self.values - other.values)
        return SampledFunction(self.grid, self.values - other)

    def __mul__(self, c):
        if isinstance(c, SampledFunction):
            self._check(c)
            return SampledFunction(self.grid, self.values * c.values)
        return SampledFunction(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return SampledFunction(self.grid, -self.values)

    def __truediv__(self, c):
        return SampledFunction(self.grid, self.values / c)

    # serialisation

    def to_bytes(self) -> bytes:
        if np.iscomplexobj(self.values):
            raise TypeError("binary format stores real samples only")
        head = _HEADER.pack(MAGIC, self.grid.n, self.grid.size, float(self.grid.length))
        return head + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> SampledFunction:
        magic, n, size, length = _HEADER.unpack_from(data, offset)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
        grid = Grid(n, size, length)
        count = size**n
        body = np.frombuffer(data, dtype="<f8", count=count, offset=offset + HEADER_SIZE)
        return cls(grid, body.astype(float).reshape(grid.shape))

    def record_size(self) -> int:
        return HEADER_SIZE + 8 * self.values.size

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> SampledFunction:
        return cls.from_bytes(Path(path).read_bytes())

    def to_json(self) -> str:
        return json.dumps({**self.grid.to_dict(), "values": self.values.ravel().tolist()})

    @classmethod
    def from_json(cls, text: str) -> SampledFunction:
        d = json.loads(text)
        return cls(Grid(d["n"], d["N_g"], d["L"]), np.asarray(d["values"], dtype=float))


def convolve(f: SampledFunction, g: SampledFunction) -> SampledFunction:
    """Circular convolution scaled by ``h^n``, approximating ``int f(x-y) g(y) dy``."""
    if f.grid != g.grid:
        raise GridMismatchError(f"grid mismatch: {f.grid} vs {g.grid}")
    out = np.fft.ifftn(f.spectrum * g.spectrum) * f.grid.cell_volume
    if not (np.iscomplexobj(f.values) or np.iscomplexobj(g.values)):
        out = out.real
    return SampledFunction(f.grid, out)


def apply_multiplier(f: SampledFunction, symbol: np.ndarray) -> SampledFunction:
    """Fourier multiplier: ``ifft(symbol * fft(f))`` (real part for real input)."""
    out = np.fft.ifftn(symbol * f.spectrum)
    if not np.iscomplexobj(f.values):
        out = out.real
    return SampledFunction(f.grid, out)


def lp_norm(f: SampledFunction, p: float) -> float:
    """``(h^n sum |f|^p)^(1/p)``; a quasi-norm when ``p < 1``."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    a = np.abs(f.values)
    if np.isinf(p):
        return float(a.max())
    return float((f.grid.cell_volume * np.sum(a**p)) ** (1.0 / p))


def delta(grid: Grid, index: tuple[int, ...] | int = 0) -> SampledFunction:
    """Discrete Dirac mass: ``1 / h^n`` at one sample."""
    v = np.zeros(grid.shape)
    v[index if isinstance(index, tuple) else (index,) * grid.n] = 1.0 / grid.cell_volume
    return SampledFunction(grid, v)
