"""Square functions, maximal operators and the weighted local Hardy norm."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .bands import RatioBand
from .dyadic import DyadicLattice, LevelError
from .families import TestFunction
from .filters import FilterBank, build_filter_bank
from .grid import Grid, GridMismatchError, SampledFunction
from .weights import Weight, parse_weight, weighted_lp_norm


@dataclass(frozen=True, eq=False)
class SquareFunctionProfile:
    grid: Grid
    values: SampledFunction
    variant: str
    bank: FilterBank | None = None
    lattice: DyadicLattice | None = None
    N: int = 0

    def norm(self, p: float, w: Weight) -> float:
        return weighted_lp_norm(self.values, p, w)


@dataclass(frozen=True, eq=False)
class OscillationProfiles:
    """Low-pass layer ``S0`` and band-pass layer ``S1`` of the per-cube sup/inf square function."""

    s0: SquareFunctionProfile
    s1: SquareFunctionProfile
    mode: str

    def combined(self) -> SquareFunctionProfile:
        v = np.sqrt(self.s0.values.values**2 + self.s1.values.values**2)
        return SquareFunctionProfile(self.s0.grid, SampledFunction(self.s0.grid, v), f"S-{self.mode}", self.s0.bank, self.s0.lattice, self.s0.N)


def _match(f: SampledFunction, bank: FilterBank, lat: DyadicLattice | None = None):
    if f.grid != bank.grid:
        raise GridMismatchError(f"function grid {f.grid} does not match filter bank grid {bank.grid}")
    if lat is not None and lat.grid != f.grid:
        raise GridMismatchError(f"function grid {f.grid} does not match lattice grid {lat.grid}")


def _check_levels(bank: FilterBank, lat: DyadicLattice, N: int):
    if N < 0:
        raise ValueError("sampling offset N must be non-negative")
    if bank.j_max + N > lat.max_level:
        raise LevelError(
            f"scale j_max={bank.j_max} with offset N={N} needs level {bank.j_max + N}, "
            f"lattice stops at {lat.max_level}"
        )


def lp_square_function(f: SampledFunction, bank: FilterBank) -> SquareFunctionProfile:
    """Pointwise l2 norm over scales of ``psi_j * f``."""
    _match(f, bank)
    layers = bank.filter_all(f)
    vals = np.sqrt(np.sum(np.abs(layers) ** 2, axis=0))
    return SquareFunctionProfile(f.grid, SampledFunction(f.grid, vals), "g", bank)


def _corner_layer(layer: np.ndarray, lat: DyadicLattice, level: int) -> np.ndarray:
    corners = np.abs(layer[lat.corner_indices(level)])
    return lat.expand(corners)


def discrete_square_function(
    f: SampledFunction, bank: FilterBank, lat: DyadicLattice, N: int = 0
) -> SquareFunctionProfile:
    """Scale ``j`` frozen at the corner of each level-``(j+N)`` cube."""
    _match(f, bank, lat)
    _check_levels(bank, lat, N)
    layers = bank.filter_all(f)
    acc = np.zeros(f.grid.shape)
    for j in bank.scales:
        acc += _corner_layer(layers[j], lat, j + N) ** 2
    return SquareFunctionProfile(f.grid, SampledFunction(f.grid, np.sqrt(acc)), "g_d", bank, lat, N)


def _cube_extreme(layer: np.ndarray, lat: DyadicLattice, level: int, mode: str) -> np.ndarray:
    op = {"sup": "max", "inf": "min"}[mode]
    return lat.expand(lat.reduce(np.abs(layer), level, op))


def oscillation_square_function(
    f: SampledFunction, bank: FilterBank, lat: DyadicLattice, N: int = 0, mode: str = "sup"
) -> OscillationProfiles:
    """Per-cube sup (or inf) of ``|psi_j * f|``; low-pass on level ``N``, band ``j`` on ``j+N``."""
    if mode not in ("sup", "inf"):
        raise ValueError(f"mode must be 'sup' or 'inf', got {mode!r}")
    _match(f, bank, lat)
    _check_levels(bank, lat, N)
    layers = bank.filter_all(f)
    s0 = _cube_extreme(layers[0], lat, N, mode)
    acc = np.zeros(f.grid.shape)
    for j in range(1, bank.j_max + 1):
        acc += _cube_extreme(layers[j], lat, j + N, mode) ** 2
    g = f.grid
    return OscillationProfiles(
        SquareFunctionProfile(g, SampledFunction(g, s0), f"S0-{mode}", bank, lat, N),
        SquareFunctionProfile(g, SampledFunction(g, np.sqrt(acc)), f"S1-{mode}", bank, lat, N),
        mode,
    )


def hl_maximal(f: SampledFunction, lat: DyadicLattice) -> SampledFunction:
    """Dyadic maximal function of ``|f|``."""
    if f.grid != lat.grid:
        raise GridMismatchError(f"grid mismatch: {f.grid} vs {lat.grid}")
    return SampledFunction(f.grid, _kernels.dyadic_maximal(np.abs(f.values), lat.max_level))


def fractional_maximal(f: SampledFunction, alpha: float, lat: DyadicLattice) -> SampledFunction:
    """Dyadic ``sup_Q |Q|^(alpha/n) avg_Q |f|``."""
    n = f.grid.n
    if not 0 <= alpha < n:
        raise ValueError(f"alpha must lie in [0, {n}), got {alpha}")
    if f.grid != lat.grid:
        raise GridMismatchError(f"grid mismatch: {f.grid} vs {lat.grid}")
    factors = np.array([lat.cube_measure(j) ** (alpha / n) for j in range(lat.max_level + 1)])
    return SampledFunction(f.grid, _kernels.dyadic_maximal(np.abs(f.values), lat.max_level, factors))


def dilated_profile(profile: SampledFunction, m: int) -> np.ndarray:
    """Samples of ``2^(mn) Phi(2^m x)``, zero where ``2^m x`` leaves the centred domain."""
    g = profile.grid
    k = np.arange(g.size)
    kc = np.where(k > g.size // 2, k - g.size, k)
    src = kc * 2**m
    # half-open window so the sample at L/2 is counted once
    inside = (src > -(g.size // 2)) & (src <= g.size // 2)
    src = np.mod(src, g.size)
    out = profile.values
    for axis in range(g.n):
        out = np.take(out, src, axis=axis)
        shape = [1] * g.n
        shape[axis] = g.size
        out = out * inside.reshape(shape)
    return out * 2.0 ** (m * g.n)


def grand_maximal(
    f: SampledFunction, profile: SampledFunction | None = None, levels: int | None = None, bank: FilterBank | None = None
) -> SampledFunction:
    """``max_m |Phi_t * f|`` over the ladder ``t = 2^-m``, ``m = 0..levels``.

    ``profile`` defaults to the low-pass filter of ``bank`` (built on demand)
    and ``levels`` to the bank's ``j_max``.
    """
    if profile is None:
        bank = bank or build_filter_bank(f.grid)
        profile = bank.psi0
    if profile.grid != f.grid:
        raise GridMismatchError(f"grid mismatch: {f.grid} vs {profile.grid}")
    mass = profile.integral()
    if abs(mass) < 1e-12 * max(1.0, float(np.abs(profile.values).sum() * f.grid.cell_volume)):
        raise ValueError("grand maximal profile must have non-zero integral")
    if levels is None:
        levels = bank.j_max if bank is not None else f.grid.depth - 4
    axes = tuple(range(f.grid.n))
    fs = f.spectrum
    out = np.zeros(f.grid.shape)
    for m in range(levels + 1):
        kern = dilated_profile(profile, m)
        conv = np.fft.ifftn(np.fft.fftn(kern, axes=axes) * fs, axes=axes) * f.grid.cell_volume
        np.maximum(out, np.abs(conv), out=out)
    return SampledFunction(f.grid, out)


def _box_radii(grid: Grid) -> list[int]:
    """Half-widths ``0, 1, 2, 4, ...`` (in samples) of centred boxes up to the half torus."""
    radii = [0]
    r = 1
    while r < grid.size // 2:
        radii.append(r)
        r *= 2
    return radii


def centred_maximal(f: SampledFunction) -> SampledFunction:
    """Max over centred boxes of half-width ``0, 1, 2, 4, ...`` samples of the mean of ``|f|``."""
    g = f.grid
    a = np.abs(f.values)
    axes = tuple(range(g.n))
    spec = np.fft.fftn(a)
    out = np.zeros(g.shape)
    k = np.arange(g.size)
    kc = np.where(k > g.size // 2, k - g.size, k)
    for r in _box_radii(g):
        ind1 = (np.abs(kc) <= r).astype(float)
        box = ind1
        for _ in range(g.n - 1):
            box = np.multiply.outer(box, ind1)
        mean = np.fft.ifftn(np.fft.fftn(box, axes=axes) * spec, axes=axes).real / box.sum()
        np.maximum(out, mean, out=out)
    return SampledFunction(g, out)


def grand_maximal_majorant(profile: SampledFunction, levels: int) -> float:
    """Constant ``C`` with ``grand_maximal(f) <= C * centred_maximal(f)`` at every sample.

    For each ladder step, the kernel is bounded on each shell between
    consecutive boxes of :func:`centred_maximal` by its max there; summing
    ``max * box size * h^n`` over shells majorises the convolution.
    """
    g = profile.grid
    k = np.arange(g.size)
    kc = np.abs(np.where(k > g.size // 2, k - g.size, k))
    dist = kc
    for _ in range(g.n - 1):
        dist = np.maximum.outer(dist, kc)
    radii = _box_radii(g) + [g.size]
    best = 0.0
    for m in range(levels + 1):
        kern = np.abs(dilated_profile(profile, m))
        total, inner = 0.0, -1
        for r in radii:
            shell = (dist > inner) & (dist <= r)
            if shell.any():
                box = min(2 * r + 1, g.size) ** g.n
                total += float(kern[shell].max()) * box * g.cell_volume
            inner = r
        best = max(best, total)
    return best


def local_hardy_norm(
    f: SampledFunction, p: float, w: Weight, bank: FilterBank, lat: DyadicLattice, N: int = 0
) -> float:
    """``|| g_d(f) ||_{L^p_w}``."""
    return discrete_square_function(f, bank, lat, N).norm(p, w)


def energy_table(f: SampledFunction, bank: FilterBank) -> list[tuple[int, float, float]]:
    """``(j, ||psi_j * f||_2, ||psi_j * f||_inf)`` per scale."""
    layers = bank.filter_all(f)
    h = f.grid.cell_volume
    return [
        (j, float(np.sqrt(h * np.sum(np.abs(layers[j]) ** 2))), float(np.abs(layers[j]).max()))
        for j in bank.scales
    ]


def energy_table_csv(f: SampledFunction, bank: FilterBank) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["j", "l2", "linf"])
    for j, a, b in energy_table(f, bank):
        wr.writerow([j, repr(a), repr(b)])
    return buf.getvalue()


# norm-equivalence experiments


@dataclass
class GridContext:
    """Filter bank, lattice and weight for one grid of an experiment."""

    grid: Grid
    bank: FilterBank
    lat: DyadicLattice
    weight: Weight

    @classmethod
    def build(cls, grid: Grid, weight_spec: str = "constant", j_max: int | None = None) -> GridContext:
        return cls(grid, build_filter_bank(grid, j_max), DyadicLattice(grid), parse_weight(weight_spec, grid))


RATIO_KINDS = ("g/g_d", "sup/inf", "grand/g_d")


def equivalence_ratio(kind: str, f: SampledFunction, ctx: GridContext, p: float, N: int) -> float:
    w = ctx.weight
    gd = discrete_square_function(f, ctx.bank, ctx.lat, N).norm(p, w)
    if kind == "g/g_d":
        return lp_square_function(f, ctx.bank).norm(p, w) / gd
    if kind == "sup/inf":
        sup = oscillation_square_function(f, ctx.bank, ctx.lat, N, "sup").combined().norm(p, w)
        inf = oscillation_square_function(f, ctx.bank, ctx.lat, N, "inf").combined().norm(p, w)
        return sup / inf
    if kind == "grand/g_d":
        return weighted_lp_norm(grand_maximal(f, bank=ctx.bank), p, w) / gd
    raise ValueError(f"unknown ratio kind {kind!r}; choose from {RATIO_KINDS}")


def equivalence_experiment(
    kind: str,
    family: list[TestFunction],
    grid: Grid,
    p: float = 1.0,
    weight_spec: str = "constant",
    N: int = 4,
) -> RatioBand:
    """Ratio band of ``kind`` over ``family`` on ``grid`` and its refinement."""
    ctxs = [GridContext.build(grid, weight_spec), GridContext.build(grid.refine(), weight_spec)]
    rows = [tuple(equivalence_ratio(kind, t.sample(c.grid), c, p, N) for t in family) for c in ctxs]
    return RatioBand(rows[0], rows[1], (grid.size, 2 * grid.size), {"kind": kind, "p": p, "weight": weight_spec, "N": N})


def vector_fractional_ratio(
    gs: list[SampledFunction], alpha: float, p: float, q: float, r: float, w: Weight, lat: DyadicLattice
) -> float:
    """``||(sum (M_alpha g_k)^r)^(1/r)||_{L^q(w^q)} / ||(sum |g_k|^r)^(1/r)||_{L^p(w^p)}``."""
    g = gs[0].grid
    num = sum(fractional_maximal(x, alpha, lat).values ** r for x in gs) ** (1 / r)
    den = sum(np.abs(x.values) ** r for x in gs) ** (1 / r)
    return weighted_lp_norm(SampledFunction(g, num), q, w.power(q)) / weighted_lp_norm(
        SampledFunction(g, den), p, w.power(p)
    )


def vector_fractional_experiment(
    families: list[list[TestFunction]],
    grid: Grid,
    alpha: float,
    p: float,
    r: float = 2.0,
    weight_spec: str = "constant",
) -> RatioBand:
    n = grid.n
    q = 1.0 / (1.0 / p - alpha / n)

    def ratio(g, fam):
        return vector_fractional_ratio([t.sample(g) for t in fam], alpha, p, q, r, parse_weight(weight_spec, g), DyadicLattice(g))

    g1 = grid.refine()
    return RatioBand(
        tuple(ratio(grid, fam) for fam in families),
        tuple(ratio(g1, fam) for fam in families),
        (grid.size, g1.size),
        {"alpha": alpha, "p": p, "q": q, "r": r, "weight": weight_spec},
    )
