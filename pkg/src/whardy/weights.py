"""Muckenhoupt-type weights sampled on the grid.

All suprema run over the dyadic lattice (every level, including the whole
torus at level 0). Per-cube power means are scaled by the cube's max or min
before exponentiation, so large exponents near ``p = 1`` do not overflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate

from . import _kernels
from .bands import RatioBand
from .dyadic import CubeIndex, DyadicLattice
from .grid import Grid, GridMismatchError, SampledFunction


@dataclass(frozen=True, eq=False)
class Weight:
    grid: Grid
    values: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("weight values must be positive and finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def mass(self, Q: CubeIndex) -> float:
        return float(self.values[Q.slices(self.grid)].sum() * self.grid.cell_volume)

    def masses(self, j: int) -> np.ndarray:
        """``w(Q)`` for every level-``j`` cube."""
        return _kernels.cube_reduce(self.values, j, "sum") * self.grid.cell_volume

    def mass_of(self, mask: np.ndarray) -> float:
        return float(self.values[mask].sum() * self.grid.cell_volume)

    def power(self, r: float) -> Weight:
        return Weight(self.grid, self.values**r, f"({self.label})^{r:g}")

    @property
    def is_preset(self) -> bool:
        return self.label.split(":")[0] in ("constant", "power", "two-valued")

    def resample(self, grid: Grid) -> Weight:
        """The same preset on another grid."""
        if not self.is_preset:
            raise ValueError(f"weight {self.label!r} is not a preset and cannot be re-sampled")
        return parse_weight(self.label, grid)

    def coarsen(self) -> Weight:
        """Average pairs of samples along each axis onto the half-size grid."""
        m = self.grid.size // 2
        v = _kernels.cube_reduce(self.values, self.grid.depth - 1, "sum") / 2**self.grid.n
        return Weight(Grid(self.grid.n, m, self.grid.length), v.reshape((m,) * self.grid.n), self.label)

    def save(self, path) -> None:
        SampledFunction(self.grid, self.values).save(path)

    def to_function(self) -> SampledFunction:
        return SampledFunction(self.grid, self.values)


def constant_weight(grid: Grid, c: float = 1.0) -> Weight:
    return Weight(grid, np.full(grid.shape, float(c)), "constant" if c == 1 else f"constant:{c:g}")


def _singular_cell_average(a: float, h: float, n: int) -> float:
    """Average of ``|x|^a`` over the cell ``[-h/2, h/2]^n``."""
    if n == 1:
        return 2 * (h / 2) ** (a + 1) / ((a + 1) * h)
    # eight congruent triangles of the square, in polar coordinates
    val, _ = integrate.quad(lambda t: (h / 2 / np.cos(t)) ** (a + 2) / (a + 2), 0, np.pi / 4)
    return 8 * val / h**2


def power_weight(grid: Grid, a: float) -> Weight:
    """``|x - c|^a`` with ``c`` the torus centre, as cell averages.

    Cells are centred at the samples. In 1D every cell average is exact; in
    2D the singular cell is integrated in polar coordinates and the others
    use the sample value.
    """
    if a <= -grid.n:
        raise ValueError(f"power weight exponent must exceed -n, got {a}")
    h = grid.spacing
    c = grid.length / 2
    if grid.n == 1:
        x = grid.axis() - c
        lo, hi = x - h / 2, x + h / 2
        prim = lambda t: np.sign(t) * np.abs(t) ** (a + 1) / (a + 1)  # noqa: E731
        v = (prim(hi) - prim(lo)) / h
    else:
        r = np.sqrt(sum((x - c) ** 2 for x in grid.coords()))
        with np.errstate(divide="ignore"):
            v = np.where(r > 0, r**a, 0.0)
        v[(grid.size // 2,) * 2] = _singular_cell_average(a, h, 2)
    return Weight(grid, v, f"power:{a:g}")


def two_valued_weight(grid: Grid, c1: float, c2: float) -> Weight:
    """``c1`` on the half ``x_0 < L/2`` and ``c2`` on the other half."""
    x0 = grid.coords()[0]
    return Weight(grid, np.where(x0 < grid.length / 2, c1, c2).astype(float), f"two-valued:{c1:g},{c2:g}")


def parse_weight(spec: str, grid: Grid) -> Weight:
    """Build a weight from ``constant``, ``power:a``, ``two-valued:c1,c2`` or ``file:<path>``."""
    kind, _, arg = spec.partition(":")
    if kind in ("constant", "const"):
        return constant_weight(grid, float(arg) if arg else 1.0)
    if kind == "power":
        return power_weight(grid, float(arg))
    if kind == "two-valued":
        c1, c2 = (float(t) for t in arg.split(","))
        return two_valued_weight(grid, c1, c2)
    if kind == "file":
        f = SampledFunction.load(Path(arg))
        if f.grid != grid:
            raise GridMismatchError(f"weight file grid {f.grid} does not match {grid}")
        return Weight(grid, f.values, spec)
    raise ValueError(f"unknown weight spec {spec!r}")


# per-cube power means


def _cube_power_mean(values: np.ndarray, j: int, r: float) -> np.ndarray:
    """``(avg_Q v^r)^(1/r)`` for every level-``j`` cube, for ``r != 0``."""
    n_side = values.shape[0]
    cells = (n_side >> j) ** values.ndim
    scale = _kernels.cube_reduce(values, j, "max" if r > 0 else "min")
    ratio = values / _kernels.expand_cubes(scale, n_side)
    avg = _kernels.cube_reduce(ratio**r, j, "sum") / cells
    return scale * avg ** (1.0 / r)


def _cube_mean(values: np.ndarray, j: int) -> np.ndarray:
    cells = (values.shape[0] >> j) ** values.ndim
    return _kernels.cube_reduce(values, j, "sum") / cells


def _levels(lat: DyadicLattice):
    return range(lat.max_level + 1)


def _check(w: Weight, lat: DyadicLattice):
    if w.grid != lat.grid:
        raise GridMismatchError(f"weight grid {w.grid} does not match lattice grid {lat.grid}")


def ap_constant(w: Weight, p: float, lat: DyadicLattice) -> float:
    """Dyadic ``A_p`` constant; ``p = 1`` gives ``max Mw / w``."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    _check(w, lat)
    v = w.values
    if p == 1:
        mw = _kernels.dyadic_maximal(v, lat.max_level)
        return float(np.max(mw / v))
    e = 1.0 / (p - 1.0)
    best = 1.0
    for j in _levels(lat):
        prod = _cube_mean(v, j) / _cube_power_mean(v, j, -e)
        best = max(best, float(prod.max()))
    return best


def rh_constant(w: Weight, r: float, lat: DyadicLattice) -> float:
    """Dyadic reverse Hoelder constant ``sup (avg w^r)^(1/r) / avg w``."""
    if not r > 1:
        raise ValueError(f"r must exceed 1, got {r}")
    _check(w, lat)
    v = w.values
    best = 1.0
    for j in _levels(lat):
        best = max(best, float((_cube_power_mean(v, j, r) / _cube_mean(v, j)).max()))
    return best


def apq_constant(w: Weight, p: float, q: float, lat: DyadicLattice) -> float:
    """Dyadic ``A_{p,q}`` constant.

    ``sup (avg w^q)^(1/q) (avg w^-p')^(1/p')``; for ``p = 1`` the second
    factor is ``1 / min_Q w``.
    """
    if p < 1 or not q > 1:
        raise ValueError(f"need p >= 1 and q > 1, got p={p}, q={q}")
    _check(w, lat)
    v = w.values
    best = 0.0
    for j in _levels(lat):
        first = _cube_power_mean(v, j, q)
        if p == 1:
            second = 1.0 / _kernels.cube_reduce(v, j, "min")
        else:
            pp = p / (p - 1.0)
            second = 1.0 / _cube_power_mean(v, j, -pp)
        best = max(best, float((first * second).max()))
    return best


class BracketingError(RuntimeError):
    pass


def refinement_growth(w: Weight, p: float, lat: DyadicLattice) -> float:
    """Growth of the ``A_p`` constant under one grid refinement.

    Presets are re-sampled on the doubled grid. Other weights are compared
    with their pairwise average on the half-size grid instead.
    """
    if w.is_preset:
        fine = w.resample(w.grid.refine())
        return ap_constant(fine, p, DyadicLattice(fine.grid)) / ap_constant(w, p, lat)
    coarse = w.coarsen()
    lat_c = DyadicLattice(coarse.grid, min(lat.max_level, coarse.grid.depth))
    return ap_constant(w, p, lat) / ap_constant(coarse, p, lat_c)


def critical_index(
    w: Weight,
    lat: DyadicLattice,
    blowup_threshold: float = 1.05,
    p_max: float = 8.0,
    resolution: float = 0.01,
) -> float:
    """Estimate ``inf {p : w in A_p}``.

    ``p`` counts as admissible when the ``A_p`` constant grows by at most
    ``blowup_threshold`` under one refinement. A coarse scan checks that the
    classifier is monotone, then bisection refines the transition.
    """
    if not blowup_threshold > 1:
        raise ValueError("blowup threshold must exceed 1")
    member = lambda p: refinement_growth(w, p, lat) <= blowup_threshold  # noqa: E731
    if member(1.0):
        return 1.0
    scan = np.arange(1.0, p_max + 1e-9, 0.25)
    flags = [member(p) for p in scan]
    first = next((k for k, f in enumerate(flags) if f), None)
    if first is None:
        raise BracketingError(f"no admissible p found up to {p_max}")
    if not all(flags[first:]):
        bad = [float(p) for p, f in zip(scan[first:], flags[first:]) if not f]
        raise BracketingError(
            f"classifier is not monotone in p: admissible at {scan[first]:.2f} "
            f"but not at {bad}"
        )
    lo, hi = float(scan[first - 1]), float(scan[first])
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if member(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _rh_growth(w: Weight, r: float, lat: DyadicLattice) -> float:
    if w.is_preset:
        fine = w.resample(w.grid.refine())
        return rh_constant(fine, r, DyadicLattice(fine.grid)) / rh_constant(w, r, lat)
    coarse = w.coarsen()
    lat_c = DyadicLattice(coarse.grid, min(lat.max_level, coarse.grid.depth))
    return rh_constant(w, r, lat) / rh_constant(coarse, r, lat_c)


def reverse_holder_index(
    w: Weight, lat: DyadicLattice, r_values=(1.5, 2.0, 3.0, 4.0, 8.0, 16.0), blowup_threshold: float = 1.05
) -> float:
    """Largest tested ``r`` whose ``RH_r`` constant is stable under refinement.

    Returns 1.0 when even the smallest candidate fails. The scan stops at the
    first failure, so the answer is the top of a contiguous admissible run.
    """
    best = 1.0
    for r in sorted(r_values):
        if _rh_growth(w, r, lat) > blowup_threshold:
            break
        best = float(r)
    return best


def hoelder_exponent_floor(p: float, r: float) -> float:
    """Smallest ``q`` with ``q > max(p, 1)`` and ``(q/p)' <= r``; the bound itself is excluded."""
    if r <= 1:
        return float("inf")
    return max(max(p, 1.0), p * r / (r - 1.0))


def cube_mass(w: Weight, Q: CubeIndex) -> float:
    return w.mass(Q)


def weighted_lp_norm(f: SampledFunction, p: float, w: Weight) -> float:
    """``(h^n sum |f|^p w)^(1/p)``."""
    if f.grid != w.grid:
        raise GridMismatchError(f"grid mismatch: {f.grid} vs {w.grid}")
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    a = np.abs(f.values)
    if np.isinf(p):
        return float(a.max())
    return float((f.grid.cell_volume * np.sum(a**p * w.values)) ** (1.0 / p))


def _lpw(values: np.ndarray, p: float, w: Weight) -> float:
    return float((w.grid.cell_volume * np.sum(np.abs(values) ** p * w.values)) ** (1.0 / p))


# vector-valued maximal inequality


def _random_bumps(rng, count, n):
    """Parameters of ``count`` random bumps: centres, widths, amplitudes."""
    return [
        (rng.random(n), 0.01 + 0.1 * rng.random(), rng.standard_normal()) for _ in range(count)
    ]


def _sample_bumps(grid: Grid, bumps) -> np.ndarray:
    out = np.zeros(grid.shape)
    L = grid.length
    for c, width, amp in bumps:
        r2 = 0.0
        for ci, x in zip(c, grid.coords()):
            d = (x - ci * L + L / 2) % L - L / 2
            r2 = r2 + d**2
        out += amp * np.exp(-r2 / (2 * (width * L) ** 2))
    return out


def fefferman_stein_ratio(
    fs: list[np.ndarray], p: float, w: Weight, lat: DyadicLattice, q: float = 2.0
) -> float:
    """``|| ||{M f_i}||_{l^q} ||_{L^p_w} / || ||{f_i}||_{l^q} ||_{L^p_w}`` with dyadic ``M``."""
    num = sum(_kernels.dyadic_maximal(np.abs(f), lat.max_level) ** q for f in fs) ** (1 / q)
    den = sum(np.abs(f) ** q for f in fs) ** (1 / q)
    return _lpw(num, p, w) / _lpw(den, p, w)


def fefferman_stein_experiment(
    grid: Grid, p: float, weight_spec: str, count: int = 10, family_size: int = 4, q: float = 2.0, seed: int = 0
) -> RatioBand:
    """Ratios of :func:`fefferman_stein_ratio` on ``grid`` and its refinement."""
    rng = np.random.default_rng(seed)
    families = [[_random_bumps(rng, 3, grid.n) for _ in range(family_size)] for _ in range(count)]

    def ratio(g, fam):
        lat = DyadicLattice(g)
        w = parse_weight(weight_spec, g)
        return fefferman_stein_ratio([_sample_bumps(g, b) for b in fam], p, w, lat, q)

    g1 = grid.refine()
    return RatioBand(
        tuple(ratio(grid, fam) for fam in families),
        tuple(ratio(g1, fam) for fam in families),
        (grid.size, g1.size),
        {"p": p, "q": q, "weight": weight_spec},
    )


# weighted block sums


def _random_cube_family(rng, n: int, count: int, min_level: int, max_level: int):
    fam = []
    for _ in range(count):
        j = int(rng.integers(min_level, max_level + 1))
        l = tuple(int(v) for v in rng.integers(0, 1 << j, size=n))
        shape = (int(rng.integers(1, 4)), float(rng.random() * 2 * np.pi), 0.3 + 0.6 * rng.random())
        fam.append((CubeIndex(j, l), float(rng.exponential()), shape))
    return fam


def _profile_in_cube(grid: Grid, Q: CubeIndex, shape) -> np.ndarray:
    """Non-negative oscillating profile supported in ``Q``."""
    k, phase, depth = shape
    out = np.zeros(grid.shape)
    sl = Q.slices(grid)
    side = Q.side(grid.length)
    local = 1.0
    for i, x in enumerate(grid.coords()):
        t = (x[sl] - Q.corner(grid.length)[i]) / side
        local = local * (1 + depth * np.cos(2 * np.pi * k * t + phase))
    out[sl] = local
    return out


def block_sum_ratio(family, p: float, q: float, w: Weight, variant: str = "normalised") -> float:
    """Left side over right side of a weighted block-sum inequality.

    ``variant="normalised"``: pieces ``a_j`` scaled to
    ``||a_j||_q = |Q_j|^(1/q) w(Q_j)^(-1/p)``, compared with
    ``|| sum lambda_j chi_Qj / w(Q_j)^(1/p) ||_{L^p_w}``.
    ``variant="averages"``: ``|| sum g_j ||_{L^p_w}`` against
    ``|| sum (avg_Qj g_j^q)^(1/q) chi_Qj ||_{L^p_w}``.
    """
    g = w.grid
    lhs = np.zeros(g.shape)
    rhs = np.zeros(g.shape)
    for Q, lam, shape in family:
        a = _profile_in_cube(g, Q, shape)
        chi = Q.indicator(g)
        volume = Q.measure(g.length)
        norm_q = (g.cell_volume * np.sum(a**q)) ** (1 / q)
        if variant == "normalised":
            wq = w.mass(Q)
            a = a * volume ** (1 / q) * wq ** (-1 / p) / norm_q
            lhs += lam * a
            rhs += lam * chi / wq ** (1 / p)
        elif variant == "averages":
            lhs += lam * a
            rhs += lam * (norm_q / volume ** (1 / q)) * chi
        else:
            raise ValueError(f"unknown variant {variant!r}")
    return _lpw(lhs, p, w) / _lpw(rhs, p, w)


def block_sum_experiment(
    grid: Grid,
    p: float,
    q: float,
    weight_spec: str,
    variant: str = "normalised",
    count: int = 20,
    family_size: int = 12,
    seed: int = 0,
) -> RatioBand:
    rng = np.random.default_rng(seed)
    top = max(1, grid.depth - 3)
    fams = [_random_cube_family(rng, grid.n, family_size, 0, top) for _ in range(count)]

    def ratio(g, fam):
        return block_sum_ratio(fam, p, q, parse_weight(weight_spec, g), variant)

    g1 = grid.refine()
    return RatioBand(
        tuple(ratio(grid, f) for f in fams),
        tuple(ratio(g1, f) for f in fams),
        (grid.size, g1.size),
        {"p": p, "q": q, "weight": weight_spec, "variant": variant},
    )
