"""Littlewood-Paley filter banks with an exact discrete Calderon identity.

Windows live in scaled frequency ``nu = |k| / K0`` where ``k`` is the integer
wavenumber and ``K0`` the bank's ``base_frequency``. The low-pass window is 1
on ``nu <= 1`` and 0 on ``nu >= 2``; band-pass window ``j`` is supported in
``2^(j-1) <= nu <= 2^(j+1)``. Adjacent windows are ``cos(theta)`` and
``sin(theta)`` of the same angle, so the squares sum to one at every grid
frequency. The top window is held at 1 from its peak up to Nyquist.

Spatial filters are defined through :func:`whardy.grid.convolve`:
``convolve(psi_j, f)`` multiplies the spectrum of ``f`` by window ``j``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Grid, SampledFunction, apply_multiplier

DEFAULT_BASE_FREQUENCY = 4

# Gauss-Legendre nodes for the smooth step integral
_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)


def _bump(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


_BUMP_MASS = float(np.sum(_GL_W * _bump(_GL_X)))


def _step_integral(t: np.ndarray) -> np.ndarray:
    half = t  # the integration interval [-1, 2t - 1] has half-length t
    nodes = -1.0 + half[..., None] * (_GL_X + 1.0)
    return np.sum(_GL_W * _bump(nodes), axis=-1) * half / _BUMP_MASS


def smooth_step(t) -> np.ndarray:
    """C-infinity step from 0 (t <= 0) to 1 (t >= 1) with ``S(t) + S(1-t) = 1``.

    ``S(t)`` is the normalised integral of ``exp(-1/(1-s^2))`` over
    ``[-1, 2t - 1]``. Only the lower half is integrated; the upper half is
    its mirror, which keeps the symmetry exact.
    """
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    lo = np.minimum(t, 1.0 - t)
    s = _step_integral(lo)
    return np.where(t <= 0.5, s, 1.0 - s)


def _angle(u: np.ndarray) -> np.ndarray:
    """Transition angle on ``1 <= u <= 2``: 0 at u=1, pi/2 at u=2."""
    return 0.5 * np.pi * smooth_step(u - 1.0)


def lowpass_profile(nu: np.ndarray) -> np.ndarray:
    nu = np.abs(np.asarray(nu, dtype=float))
    return np.where(nu <= 1.0, 1.0, np.where(nu >= 2.0, 0.0, np.cos(_angle(nu))))


def bandpass_profile(nu: np.ndarray) -> np.ndarray:
    """Band-pass window on ``1/2 <= nu <= 2``."""
    nu = np.abs(np.asarray(nu, dtype=float))
    rise = (nu > 0.5) & (nu <= 1.0)
    fall = (nu > 1.0) & (nu < 2.0)
    out = np.zeros_like(nu)
    out[rise] = np.sin(_angle(2.0 * nu[rise]))
    out[fall] = np.cos(_angle(nu[fall]))
    return out


def top_profile(nu: np.ndarray) -> np.ndarray:
    """Band-pass window flattened to 1 at and above its peak."""
    nu = np.abs(np.asarray(nu, dtype=float))
    out = np.ones_like(nu)
    out[nu <= 0.5] = 0.0
    rise = (nu > 0.5) & (nu < 1.0)
    out[rise] = np.sin(_angle(2.0 * nu[rise]))
    return out


def max_admissible_jmax(grid: Grid, base_frequency: float = DEFAULT_BASE_FREQUENCY) -> int:
    """Largest ``j_max`` with ``2^(j_max+1) * K0 <= N_g / 2``."""
    return int(np.floor(np.log2(grid.size / (4.0 * base_frequency)) + 1e-12))


class FilterBankError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Frequency windows for scales ``0..j_max`` on ``grid``.

    ``windows[j]`` is the (real, non-negative) multiplier of scale ``j``.
    """

    grid: Grid
    j_max: int
    base_frequency: float = DEFAULT_BASE_FREQUENCY
    windows: np.ndarray = field(default=None, repr=False)

    @property
    def scales(self) -> range:
        return range(self.j_max + 1)

    @property
    def freq_profiles(self) -> np.ndarray:
        return self.windows

    def psi(self, j: int) -> SampledFunction:
        """Spatial filter of scale ``j`` (``j = 0`` is the low-pass)."""
        vals = np.fft.ifftn(self.windows[j]).real / self.grid.cell_volume
        return SampledFunction(self.grid, vals)

    @property
    def psi0(self) -> SampledFunction:
        return self.psi(0)

    @property
    def bandpass(self) -> list[SampledFunction]:
        return [self.psi(j) for j in range(1, self.j_max + 1)]

    def filter(self, f: SampledFunction, j: int) -> SampledFunction:
        """``psi_j * f``."""
        return apply_multiplier(f, self.windows[j])

    def filter_all(self, f: SampledFunction) -> np.ndarray:
        """Stack of ``psi_j * f`` for all scales, shape ``(j_max+1, *grid.shape)``."""
        out = np.fft.ifftn(self.windows * f.spectrum, axes=tuple(range(1, self.grid.n + 1)))
        return out.real if not np.iscomplexobj(f.values) else out

    def reconstruct(self, f: SampledFunction) -> SampledFunction:
        """``sum_j psi_j * psi_j * f``."""
        return apply_multiplier(f, np.sum(self.windows**2, axis=0))

    def manifest(self, moment_order: int = 4, tail_radius: float = 8.0) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "j_max": self.j_max,
            "base_frequency": self.base_frequency,
            "calderon_residual": check_calderon_identity(self),
            "lowpass_integral": lowpass_integral(self),
            "moment_order": moment_order,
            "moment_errors": moment_errors(self, moment_order),
            "tail_radius": tail_radius,
            "tail_mass": spatial_tail_mass(self, tail_radius),
        }

    def export(self, directory, moment_order: int = 4, tail_radius: float = 8.0) -> dict:
        """Write ``psi_<j>.hlgf`` per scale and ``manifest.json``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        files = []
        for j in self.scales:
            name = f"psi_{j}.hlgf"
            self.psi(j).save(directory / name)
            files.append(name)
        man = self.manifest(moment_order, tail_radius)
        man["files"] = files
        (directory / "manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True))
        return man


def build_filter_bank(
    grid: Grid, j_max: int | None = None, base_frequency: float = DEFAULT_BASE_FREQUENCY
) -> FilterBank:
    """Meyer-type bank whose squared windows sum to one on the grid.

    ``j_max=None`` picks the largest admissible value.
    """
    jmax_ok = max_admissible_jmax(grid, base_frequency)
    if j_max is None:
        j_max = jmax_ok
    if j_max < 1 or j_max > jmax_ok:
        raise FilterBankError(
            f"j_max={j_max} not admissible on {grid.size} points with base frequency "
            f"{base_frequency}: maximal admissible j_max is {jmax_ok}"
        )
    nu = grid.wavenumber_radius() / base_frequency
    wins = [lowpass_profile(nu)]
    for j in range(1, j_max):
        wins.append(bandpass_profile(nu / 2.0**j))
    wins.append(top_profile(nu / 2.0**j_max))
    windows = np.array(wins)
    windows.setflags(write=False)
    return FilterBank(grid, j_max, base_frequency, windows)


def with_windows(bank: FilterBank, windows: np.ndarray) -> FilterBank:
    """Copy of ``bank`` with replaced windows (for perturbation studies)."""
    windows = np.array(windows, dtype=float)
    windows.setflags(write=False)
    return FilterBank(bank.grid, bank.j_max, bank.base_frequency, windows)


def check_calderon_identity(bank: FilterBank) -> float:
    """``max_xi |1 - sum_j |window_j(xi)|^2|``."""
    return float(np.max(np.abs(1.0 - np.sum(np.abs(bank.windows) ** 2, axis=0))))


def multi_indices(n: int, s: int):
    """All ``alpha`` in ``N^n`` with ``|alpha| <= s``, graded order."""
    for total in range(s + 1):
        for alpha in itertools.product(range(total + 1), repeat=n):
            if sum(alpha) == total:
                yield alpha


def monomial(grid: Grid, alpha, centre=None, basis: str = "sine") -> np.ndarray:
    """Torus monomial ``prod_i m(x_i - c_i)^alpha_i``.

    ``basis="sine"`` uses the periodic coordinate ``m(t) = L/(2 pi) sin(2 pi t / L)``,
    which equals ``t`` to second order and has wavenumber 1. ``basis="sawtooth"``
    uses ``t`` itself, wrapped into ``(-L/2, L/2]``.
    """
    L = grid.length
    centre = np.zeros(grid.n) if centre is None else np.asarray(centre, dtype=float)
    out = np.ones(grid.shape)
    for i, (x, a) in enumerate(zip(grid.coords(), alpha)):
        if a == 0:
            continue
        t = x - centre[i]
        if basis == "sine":
            m = L / (2 * np.pi) * np.sin(2 * np.pi * t / L)
        elif basis == "sawtooth":
            m = t - L * np.round(t / L)
            m = np.where(m <= -L / 2, m + L, m)
        else:
            raise ValueError(f"unknown monomial basis {basis!r}")
        out = out * m**a
    return out


def moment_errors(bank: FilterBank, s: int, basis: str = "sine") -> list[float]:
    """Per band-pass scale ``j = 1..j_max``: ``max_{|alpha|<=s} |int psi_j x^alpha dx|``."""
    if s > 8:
        raise ValueError("moment order above 8 is not supported")
    g = bank.grid
    monos = [monomial(g, a, basis=basis) for a in multi_indices(g.n, s)]
    out = []
    for j in range(1, bank.j_max + 1):
        psi = bank.psi(j).values
        out.append(max(abs(float(np.sum(psi * m)) * g.cell_volume) for m in monos))
    return out


def lowpass_integral(bank: FilterBank) -> float:
    return bank.psi0.integral()


def spatial_tail_mass(bank: FilterBank, radius_in_cubes: float) -> list[float]:
    """Fraction of ``||psi_j||_1`` outside the ball of radius ``radius * L 2^-j``."""
    if not radius_in_cubes > 0:
        raise ValueError("radius must be positive")
    g = bank.grid
    r = np.sqrt(sum(c**2 for c in g.centred_coords()))
    out = []
    for j in bank.scales:
        a = np.abs(bank.psi(j).values)
        outside = r > radius_in_cubes * g.length * 2.0**-j
        out.append(float(a[outside].sum() / a.sum()))
    return out
