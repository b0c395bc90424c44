"""Seeded test-function families.

Each member is a :class:`TestFunction`: a description plus a sampler that
evaluates the same continuous function on any grid, so a family can be
compared across grid refinements.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .filters import DEFAULT_BASE_FREQUENCY, bandpass_profile, lowpass_profile
from .grid import Grid, SampledFunction


@dataclass(frozen=True)
class TestFunction:
    __test__ = False  # not a pytest class

    name: str
    sampler: Callable[[Grid], np.ndarray]

    def sample(self, grid: Grid) -> SampledFunction:
        return SampledFunction(grid, self.sampler(grid))


def _torus_offsets(grid: Grid, centre) -> list[np.ndarray]:
    L = grid.length
    return [(x - c * L + L / 2) % L - L / 2 for x, c in zip(grid.coords(), centre)]


def bump(centre, width: float, amplitude: float = 1.0) -> TestFunction:
    """Periodised Gaussian; ``centre`` and ``width`` in units of ``L``."""
    centre = tuple(float(c) for c in centre)

    def sampler(grid):
        r2 = sum(d**2 for d in _torus_offsets(grid, centre))
        return amplitude * np.exp(-r2 / (2 * (width * grid.length) ** 2))

    return TestFunction(f"bump(c={centre},w={width:.3f})", sampler)


def modulated_bump(centre, width: float, freq: int, phase: float, amplitude: float = 1.0) -> TestFunction:
    centre = tuple(float(c) for c in centre)

    def sampler(grid):
        d = _torus_offsets(grid, centre)
        r2 = sum(t**2 for t in d)
        return amplitude * np.exp(-r2 / (2 * (width * grid.length) ** 2)) * np.cos(
            2 * np.pi * freq * d[0] / grid.length + phase
        )

    return TestFunction(f"modbump(c={centre},w={width:.3f},k={freq})", sampler)


def piecewise_constant(breaks, levels) -> TestFunction:
    """Step function along the first axis; ``breaks`` are multiples of ``L/64``."""
    breaks = tuple(int(b) for b in breaks)
    levels = tuple(float(v) for v in levels)

    def sampler(grid):
        t = np.floor(grid.coords()[0] / grid.length * 64).astype(int)
        out = np.full(grid.shape, levels[-1])
        for b, v in sorted(zip(breaks, levels[:-1]), reverse=True):
            out[t < b] = v
        return out

    return TestFunction(f"steps(breaks={breaks})", sampler)


def molecule(scale: int, shift, amplitude: float = 1.0, base_frequency: float = DEFAULT_BASE_FREQUENCY) -> TestFunction:
    """Band-pass filter of ``scale`` (0 gives the low-pass) translated by ``shift * L``.

    Built from the window itself, so it is the same function on every grid
    whose Nyquist frequency exceeds the window support.
    """
    shift = tuple(float(s) for s in shift)

    def sampler(grid):
        nu = grid.wavenumber_radius() / base_frequency
        win = lowpass_profile(nu) if scale == 0 else bandpass_profile(nu / 2.0**scale)
        phase = sum(k * s for k, s in zip(grid.wavenumbers(), shift))
        spec = win * np.exp(-2j * np.pi * phase)
        return amplitude * np.fft.ifftn(spec).real / grid.cell_volume

    return TestFunction(f"molecule(j={scale},shift={shift})", sampler)


def mixed_family(n: int = 1, count: int = 20, seed: int = 0) -> list[TestFunction]:
    """Bumps, modulated bumps and piecewise constants in rotation."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        kind = k % 3
        c = rng.random(n)
        if kind == 0:
            out.append(bump(c, 0.025 + 0.075 * rng.random(), 0.5 + rng.random()))
        elif kind == 1:
            out.append(
                modulated_bump(c, 0.03 + 0.07 * rng.random(), int(rng.integers(4, 33)), float(2 * np.pi * rng.random()))
            )
        else:
            m = int(rng.integers(2, 6))
            breaks = np.sort(rng.choice(np.arange(1, 64), size=m, replace=False))
            out.append(piecewise_constant(breaks, rng.uniform(-1, 1, size=m + 1)))
    return out


def molecule_family(n: int = 1, count: int = 20, seed: int = 0, max_scale: int = 3) -> list[TestFunction]:
    rng = np.random.default_rng(seed)
    return [
        molecule(int(rng.integers(1, max_scale + 1)), rng.random(n), float(rng.choice([-1, 1]) * (0.5 + rng.random())))
        for _ in range(count)
    ]


def white_noise(grid: Grid, count: int, seed: int = 0) -> list[SampledFunction]:
    rng = np.random.default_rng(seed)
    return [SampledFunction(grid, rng.standard_normal(grid.shape)) for _ in range(count)]


def single_modes(grid: Grid, freqs) -> list[SampledFunction]:
    x = grid.coords()[0]
    return [SampledFunction(grid, np.cos(2 * np.pi * k * x / grid.length)) for k in freqs]


def calibration_family(grid: Grid, seed: int = 0) -> list[SampledFunction]:
    """White noise, bumps and single modes sampled on ``grid``."""
    fam = white_noise(grid, 4, seed)
    rng = np.random.default_rng(seed + 1)
    fam += [bump(rng.random(grid.n), w).sample(grid) for w in (0.01, 0.03, 0.1)]
    fam += single_modes(grid, [1, 7, grid.size // 8, grid.size // 3])
    return fam


FAMILIES = {"mixed": mixed_family, "molecules": molecule_family}


def parse_family(spec: str, n: int = 1, seed: int = 0) -> list[TestFunction]:
    """``"molecules:20"`` or ``"mixed:20"``."""
    kind, _, arg = spec.partition(":")
    if kind not in FAMILIES:
        raise ValueError(f"unknown family {kind!r}; choose from {sorted(FAMILIES)}")
    return FAMILIES[kind](n=n, count=int(arg) if arg else 20, seed=seed)
