"""Independent checker for atomic decompositions.

Every quantity is recomputed from the stored piece values with plain numpy.
Only the grid type and the window profile formulas are shared with the
decomposition pipeline; boxes, monomials, filtering and norms are rebuilt
here from scratch.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .filters import bandpass_profile, lowpass_profile, top_profile
from .grid import Grid


@dataclass(frozen=True)
class Tolerances:
    support: float = 1e-3
    size: float = 1e-9
    moment: float = 1e-6
    reconstruction: float = 1e-6

    def to_dict(self) -> dict:
        return {"support": self.support, "size": self.size, "moment": self.moment, "reconstruction": self.reconstruction}


@dataclass(frozen=True)
class PieceCheck:
    kind: str
    index: int
    tail_mass: float
    size_slack: float
    moments: tuple[float, ...]
    split_ok: bool
    tolerances: Tolerances = field(default=Tolerances(), repr=False)

    @property
    def moment_error(self) -> float:
        return max(self.moments, default=0.0)

    def failures(self) -> list[str]:
        t = self.tolerances
        out = []
        if not self.tail_mass <= t.support:
            out.append("support")
        if not self.size_slack <= t.size:
            out.append("size")
        if not self.moment_error <= t.moment:
            out.append("moments")
        if not self.split_ok:
            out.append("split")
        return out

    @property
    def passed(self) -> bool:
        return not self.failures()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "index": self.index,
            "tail_mass": self.tail_mass,
            "size_slack": self.size_slack,
            "moments": list(self.moments),
            "split_ok": self.split_ok,
            "passed": self.passed,
            "failures": self.failures(),
        }


@dataclass(frozen=True)
class Certificate:
    pieces: tuple[PieceCheck, ...]
    reconstruction_error_q: float
    reconstruction_error_2: float
    reconstruction_error_h: float
    coefficient_norm: float
    source_h_norm: float
    tolerances: Tolerances = Tolerances()

    @property
    def ratio(self) -> float:
        if self.source_h_norm == 0:
            return 0.0 if self.coefficient_norm == 0 else float("inf")
        return self.coefficient_norm / self.source_h_norm

    @property
    def reconstruction_ok(self) -> bool:
        tol = self.tolerances.reconstruction
        return self.reconstruction_error_2 <= tol and self.reconstruction_error_q <= tol

    @property
    def valid(self) -> bool:
        return self.reconstruction_ok and all(pc.passed for pc in self.pieces)

    def failed(self) -> list[PieceCheck]:
        return [pc for pc in self.pieces if not pc.passed]

    def piece(self, kind: str, index: int) -> PieceCheck:
        for pc in self.pieces:
            if pc.kind == kind and pc.index == index:
                return pc
        raise KeyError((kind, index))

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "reconstruction": {
                "lq": self.reconstruction_error_q,
                "l2": self.reconstruction_error_2,
                "hpw": self.reconstruction_error_h,
                "ok": self.reconstruction_ok,
            },
            "coefficient_norm": self.coefficient_norm,
            "source_h_norm": self.source_h_norm,
            "ratio": self.ratio,
            "tolerances": self.tolerances.to_dict(),
            "pieces": [pc.to_dict() for pc in self.pieces],
            "failed": len(self.failed()),
        }

    def table(self) -> str:
        rows = ["kind   idx  tail        size_slack   moment     failures"]
        for pc in self.failed():
            rows.append(
                f"{pc.kind:<6} {pc.index:<4} {pc.tail_mass:<11.3e} {pc.size_slack:<12.3e} "
                f"{pc.moment_error:<10.3e} {','.join(pc.failures())}"
            )
        rows.append(
            f"reconstruction l2={self.reconstruction_error_2:.3e} lq={self.reconstruction_error_q:.3e} "
            f"h={self.reconstruction_error_h:.3e}"
        )
        return "\n".join(rows)


@dataclass(frozen=True)
class PieceRecord:
    """What the checker needs to know about one atom or block."""

    kind: str
    level: int
    position: tuple[int, ...]
    scale_factor: float
    coefficient: float
    values: np.ndarray


def _box(grid: Grid, level: int, position, factor: float) -> tuple[np.ndarray, float]:
    """Mask and measure of the centred box of side ``factor`` times the cube side."""
    m = grid.size / 2**level
    side = factor * m
    if side >= grid.size:
        return np.ones(grid.shape, dtype=bool), grid.length**grid.n
    k = np.arange(grid.size)
    masks = []
    for l in position:
        start = l * m + m / 2 - side / 2
        masks.append(np.mod(k - start, grid.size) < side - 1e-9)
    mask = masks[0]
    for extra in masks[1:]:
        mask = np.multiply.outer(mask, extra)
    return mask, (side * grid.spacing) ** grid.n


def _sine_monomial(grid: Grid, alpha, centre) -> np.ndarray:
    L = grid.length
    out = np.ones(grid.shape)
    axes = np.meshgrid(*[np.arange(grid.size) * grid.spacing] * grid.n, indexing="ij")
    for x, c, a in zip(axes, centre, alpha):
        if a:
            out = out * (L / (2 * np.pi) * np.sin(2 * np.pi * (x - c) / L)) ** a
    return out


def _norm(values: np.ndarray, p: float, weight: np.ndarray, cell: float) -> float:
    return float((cell * np.sum(np.abs(values) ** p * weight)) ** (1.0 / p))


def _windows(grid: Grid, j_max: int, base_frequency: float) -> list[np.ndarray]:
    ks = np.meshgrid(*[np.fft.fftfreq(grid.size, d=1.0 / grid.size)] * grid.n, indexing="ij")
    nu = np.sqrt(sum(k**2 for k in ks)) / base_frequency
    out = [lowpass_profile(nu)]
    for j in range(1, j_max + 1):
        out.append((top_profile if j == j_max else bandpass_profile)(nu / 2.0**j))
    return out


def _discrete_square_norm(
    values: np.ndarray, grid: Grid, j_max: int, N: int, p: float, weight: np.ndarray, base_frequency: float
) -> float:
    spec = np.fft.fftn(values)
    acc = np.zeros(grid.shape)
    for j, win in enumerate(_windows(grid, j_max, base_frequency)):
        layer = np.abs(np.fft.ifftn(win * spec).real)
        m = grid.size // 2 ** (j + N)
        corners = layer[(slice(None, None, m),) * grid.n]
        frozen = corners
        for ax in range(grid.n):
            frozen = np.repeat(frozen, m, axis=ax)
        acc += frozen**2
    return _norm(np.sqrt(acc), p, weight, grid.cell_volume)


def coefficient_norm(
    grid: Grid, pieces: list[PieceRecord], p: float, weight: np.ndarray, eta: float | None = None
) -> float:
    """Sum over atoms plus sum over blocks of ``||sum c chi_B / w(B)^(1/p)||_{L^p_w}``."""
    total = 0.0
    cell = grid.cell_volume
    for kind in ("atom", "block"):
        acc = np.zeros(grid.shape)
        for pr in pieces:
            if pr.kind != kind:
                continue
            mask, _ = _box(grid, pr.level, pr.position, pr.scale_factor)
            wm = float(weight[mask].sum() * cell)
            term = pr.coefficient / wm ** (1.0 / p)
            acc[mask] += term if eta is None else term**eta
        if eta is not None:
            acc = acc ** (1.0 / eta)
        total += _norm(acc, p, weight, cell)
    return total


def check(
    grid: Grid,
    pieces: list[PieceRecord],
    f: np.ndarray,
    p: float,
    q: float,
    s: int,
    weight: np.ndarray,
    N: int,
    j_max: int,
    base_frequency: float,
    tolerances: Tolerances = Tolerances(),
) -> Certificate:
    cell = grid.cell_volume
    L = grid.length
    ones = np.ones(grid.shape)
    # atoms come from cubes of side at most L 2^(-N-1), blocks from larger ones
    split_side = L * 2.0 ** (-N - 1)
    alphas = [a for a in itertools.product(range(s + 1), repeat=grid.n) if sum(a) <= s] if s >= 0 else []
    checks = []
    counters = {"atom": 0, "block": 0}
    for pr in pieces:
        v = np.asarray(pr.values, dtype=float)
        mask, measure = _box(grid, pr.level, pr.position, pr.scale_factor)
        l1 = float(np.sum(np.abs(v)) * cell)
        tail = float(np.sum(np.abs(v[~mask])) * cell / l1) if l1 > 0 else 0.0
        wm = float(weight[mask].sum() * cell)
        budget = measure ** (1.0 / q) * wm ** (-1.0 / p)
        slack = _norm(v, q, ones, cell) / budget - 1.0
        side = L / 2**pr.level
        moments: list[float] = []
        if pr.kind == "atom" and l1 > 0:
            centre = [(l + 0.5) * side for l in pr.position]
            for alpha in alphas:
                m = float(np.sum(v * _sine_monomial(grid, alpha, centre)) * cell)
                moments.append(abs(m) / (l1 * side ** sum(alpha)))
        split_ok = side <= split_side if pr.kind == "atom" else side > split_side
        k = counters[pr.kind]
        counters[pr.kind] += 1
        checks.append(PieceCheck(pr.kind, k, tail, slack, tuple(moments), split_ok, tolerances))

    rec = np.zeros(grid.shape)
    for pr in sorted(pieces, key=lambda r: -abs(r.coefficient)):
        rec = rec + pr.coefficient * np.asarray(pr.values, dtype=float)
    err = f - rec
    fq, f2 = _norm(f, q, ones, cell), _norm(f, 2, ones, cell)
    eq, e2 = _norm(err, q, ones, cell), _norm(err, 2, ones, cell)
    fh = _discrete_square_norm(f, grid, j_max, N, p, weight, base_frequency)
    eh = _discrete_square_norm(err, grid, j_max, N, p, weight, base_frequency)
    return Certificate(
        tuple(checks),
        eq / fq if fq > 0 else eq,
        e2 / f2 if f2 > 0 else e2,
        eh / fh if fh > 0 else eh,
        coefficient_norm(grid, pieces, p, weight),
        fh,
        tolerances,
    )
