"""Corner-sampled Calderon reproducing operator and its Neumann inverse.

For scale ``j`` the filtered function ``psi_j * f`` is sampled at the corner
of every level-``(j+N)`` cube. The samples, weighted by ``|Q|``, form a comb
of point masses that is filtered again by ``psi_j``. Summing over scales
gives ``T_N f``, which equals the double sum over cubes exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicLattice, LevelError
from .filters import FilterBank
from .grid import GridMismatchError, SampledFunction, lp_norm


class CalibrationError(RuntimeError):
    def __init__(self, message: str, table: dict):
        super().__init__(message)
        self.table = table


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True, eq=False)
class ReproducingOperator:
    bank: FilterBank
    lat: DyadicLattice
    N: int
    contraction_estimate: float = float("nan")
    ratio_table: dict = field(default_factory=dict)
    family_description: str = ""

    def __post_init__(self):
        if self.bank.grid != self.lat.grid:
            raise GridMismatchError("filter bank and lattice live on different grids")
        if self.N < 0:
            raise ValueError("sampling offset N must be non-negative")
        if self.bank.j_max + self.N > self.lat.max_level:
            raise LevelError(
                f"offset N={self.N} with j_max={self.bank.j_max} needs level "
                f"{self.bank.j_max + self.N}; lattice stops at {self.lat.max_level}"
            )

    @property
    def max_offset(self) -> int:
        return self.lat.max_level - self.bank.j_max

    def with_offset(self, N: int) -> ReproducingOperator:
        return ReproducingOperator(self.bank, self.lat, N)

    def report(self) -> dict:
        return {
            "N": self.N,
            "contraction_estimate": self.contraction_estimate,
            "ratios": {str(k): v for k, v in sorted(self.ratio_table.items())},
            "family": self.family_description,
            "j_max": self.bank.j_max,
            "grid": self.bank.grid.to_dict(),
        }

    def report_json(self) -> str:
        return json.dumps(self.report(), indent=2, sort_keys=True)


def _combs(op: ReproducingOperator, f: SampledFunction) -> np.ndarray:
    """Per-scale comb ``sum_Q |Q| (psi_j * f)(x_Q) delta_{x_Q}`` as grid samples."""
    layers = op.bank.filter_all(f)
    g = f.grid
    out = np.zeros_like(layers)
    for j in op.bank.scales:
        level = j + op.N
        sl = op.lat.corner_indices(level)
        cube = op.lat.cube_measure(level)
        out[j][sl] = layers[j][sl] * cube / g.cell_volume
    return out


def apply_TN(op: ReproducingOperator, f: SampledFunction) -> SampledFunction:
    if f.grid != op.bank.grid:
        raise GridMismatchError(f"grid mismatch: {f.grid} vs {op.bank.grid}")
    combs = _combs(op, f)
    axes = tuple(range(1, f.grid.n + 1))
    spec = np.sum(op.bank.windows * np.fft.fftn(combs, axes=axes), axis=0)
    out = np.fft.ifftn(spec)
    return SampledFunction(f.grid, out if np.iscomplexobj(f.values) else out.real)


def apply_RN(op: ReproducingOperator, f: SampledFunction) -> SampledFunction:
    """``f - T_N f``."""
    return f - apply_TN(op, f)


def _norm(f: SampledFunction) -> float:
    return lp_norm(f, 2)


@dataclass(frozen=True, eq=False)
class Inversion:
    h: SampledFunction
    residual: float
    iterations: int
    history: tuple[float, ...]


def invert_TN(op: ReproducingOperator, f: SampledFunction, tol: float = 1e-10, max_iter: int = 100) -> Inversion:
    """Partial Neumann sums ``sum_{m<=k} R_N^m f`` until ``||T_N h - f|| <= tol ||f||``."""
    fn = _norm(f)
    if fn == 0:
        return Inversion(f, 0.0, 1, (0.0,))
    h = f
    term = f
    history = []
    for k in range(1, max_iter + 1):
        term = apply_RN(op, term)
        # T_N(h_k) - f = -R_N^(k+1) f, so the next term is the residual
        res = _norm(term) / fn
        history.append(res)
        if res <= tol:
            measured = _norm(apply_TN(op, h) - f) / fn
            if measured <= tol:
                return Inversion(h, measured, k, tuple(history))
        h = h + term
    raise ConvergenceError(
        f"Neumann series did not reach tol={tol:g} in {max_iter} iterations (last residual {history[-1]:.3e})",
        history,
    )


def remainder_ratios(op: ReproducingOperator, family: list[SampledFunction]) -> list[float]:
    return [_norm(apply_RN(op, f)) / _norm(f) for f in family]


def calibrate_N(
    bank: FilterBank,
    lat: DyadicLattice,
    family: list[SampledFunction],
    target: float = 0.5,
    description: str = "",
) -> ReproducingOperator:
    """Smallest ``N`` with ``max ||R_N f|| / ||f|| <= target`` over ``family``."""
    if not 0 < target < 1:
        raise ValueError("target must lie in (0, 1)")
    if not family:
        raise ValueError("calibration family is empty")
    base = ReproducingOperator(bank, lat, 0)
    table = {}
    for N in range(base.max_offset + 1):
        op = base.with_offset(N)
        worst = max(remainder_ratios(op, family))
        table[N] = worst
        if worst <= target:
            return ReproducingOperator(bank, lat, N, worst, dict(table), description)
    best = min(table, key=table.get)
    raise CalibrationError(
        f"no offset N <= {base.max_offset} reaches target {target:g}; best ratio {table[best]:.4g} at N={best}",
        table,
    )


def direct_TN(op: ReproducingOperator, f: SampledFunction) -> SampledFunction:
    """Reference double sum over cubes; ``O(cubes * N_g^n)`` per scale."""
    g = f.grid
    layers = op.bank.filter_all(f)
    out = np.zeros(g.shape)
    for j in op.bank.scales:
        psi = op.bank.psi(j).values
        level = j + op.N
        s = op.lat.samples_per_side(level)
        cube = op.lat.cube_measure(level)
        for Q in op.lat.cubes_at_level(level):
            idx = tuple(v * s for v in Q.l)
            shifted = np.roll(psi, idx, axis=tuple(range(g.n)))
            out += cube * shifted * layers[j][idx]
    return SampledFunction(g, out)
