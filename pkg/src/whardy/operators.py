"""Convolution operators on the torus and weighted boundedness harnesses.

Two kinds of operator are provided: damped singular kernels, which satisfy
the inhomogeneous size and smoothness conditions and are checked by direct
scans, and a local fractional integral with a compactly supported cutoff.
The harnesses measure norm ratios on a test family at two or more grid
sizes. They report stability and never claim a bound.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import _kernels
from ._parallel import pmap
from .analysis import fractional_maximal, grand_maximal, local_hardy_norm
from .bands import RatioBand
from .dyadic import CubeIndex, DyadicLattice, dilated_cube
from .families import TestFunction
from .filters import build_filter_bank, smooth_step
from .grid import Grid, GridMismatchError, SampledFunction, apply_multiplier, convolve
from .weights import (
    Weight,
    _singular_cell_average,
    power_weight,
    critical_index,
    parse_weight,
    reverse_holder_index,
    weighted_lp_norm,
)

PRESETS = ("damped-riesz", "damped-pv")


class KernelConditionError(ValueError):
    def __init__(self, message: str, pair: tuple):
        super().__init__(message)
        self.pair = pair


def _torus_offsets(grid: Grid) -> list[np.ndarray]:
    return grid.centred_coords()


def _radius(grid: Grid) -> np.ndarray:
    return np.sqrt(sum(z**2 for z in _torus_offsets(grid)))


def _mollify(values: np.ndarray) -> np.ndarray:
    """One pass of the ``[1/4, 1/2, 1/4]`` average along every axis."""
    out = values
    for ax in range(values.ndim):
        out = 0.5 * out + 0.25 * (np.roll(out, 1, axis=ax) + np.roll(out, -1, axis=ax))
    return out


@dataclass(frozen=True, eq=False)
class CZKernel:
    grid: Grid
    profile: SampledFunction
    delta: float
    eps: float
    preset: str
    size_constant: float
    smooth_constant: float
    symbol: np.ndarray = field(repr=False)
    damping_length: float = 0.0
    smoothing: str = "corrected"

    @property
    def eta(self) -> float:
        return min(self.eps, self.delta)

    @property
    def symbol_bound(self) -> float:
        return float(np.abs(self.symbol).max())

    @property
    def mean(self) -> float:
        """``K^(0)``, the integral of the profile."""
        return float(self.symbol.flat[0].real)

    def describe(self) -> dict:
        return {
            "preset": self.preset,
            "delta": self.delta,
            "eps": self.eps,
            "size_constant": self.size_constant,
            "smooth_constant": self.smooth_constant,
            "symbol_bound": self.symbol_bound,
            "damping_length": self.damping_length,
            "smoothing": self.smoothing,
        }


def _raw_profile(grid: Grid, preset: str, delta: float, ell: float) -> np.ndarray:
    z = _torus_offsets(grid)
    r = _radius(grid)
    n = grid.n
    with np.errstate(divide="ignore", invalid="ignore"):
        damp = np.minimum(1.0, (r / ell) ** (-delta))
        if preset == "damped-riesz":
            k = _riesz_constant(n) * z[0] / r ** (n + 1) * damp
        elif preset == "damped-pv":
            if n != 2:
                raise ValueError("damped-pv is the two-dimensional kernel (z1^2 - z2^2)/|z|^4; use n = 2")
            k = (z[0] ** 2 - z[1] ** 2) / r**4 * damp / math.pi
        else:
            raise ValueError(f"unknown kernel preset {preset!r}; choose from {PRESETS}")
    k[r == 0] = 0.0
    if preset == "damped-riesz":
        # the sample at -L/2 along the odd axis has no mirror image on an even grid
        sl = [slice(None)] * n
        sl[0] = grid.size // 2
        k[tuple(sl)] = 0.0
    return k


def _riesz_constant(n: int) -> float:
    return math.gamma((n + 1) / 2) / math.pi ** ((n + 1) / 2)


def _first_moment_correction(grid: Grid, k: np.ndarray) -> np.ndarray:
    """Put the central cell's first moment of the odd kernel on the two axis neighbours.

    The punctured sum drops ``int_cell K(y) f(x - y) dy ~ -d_1 f(x) int_cell y_1 K``;
    a centred difference restores it, so the symbol error drops from first
    to third order in ``k h``.
    """
    n, h = grid.n, grid.spacing
    m = _riesz_constant(n) / n * h**n * _singular_cell_average(1 - n, h, n)
    out = np.array(k)
    step = m / (2 * h * grid.cell_volume)
    plus = [0] * n
    plus[0] = 1
    out[tuple(plus)] += step
    plus[0] = -1
    out[tuple(plus)] -= step
    return out


def _size_scan(grid: Grid, k: np.ndarray, delta: float) -> tuple[float, int]:
    r = _radius(grid)
    n = grid.n
    ok = r > 0
    with np.errstate(divide="ignore"):
        bound = np.minimum(r ** (-n), r ** (-n - delta))
    q = np.where(ok, np.abs(k) / np.where(ok, bound, 1.0), 0.0)
    at = int(np.argmax(q))
    return float(q.flat[at]), at


def build_cz_kernel(
    preset: str,
    delta: float,
    eps: float,
    grid: Grid,
    damping_length: float | None = None,
    smoothing: str = "corrected",
    stride: int = 8,
    size_budget: float = 4.0,
    smooth_budget: float = 1e3,
) -> CZKernel:
    """Damped Riesz-type profile with measured size and smoothness constants.

    The damping factor ``min(1, (|z|/ell)^-delta)`` acts beyond
    ``ell = damping_length`` (default ``L/8``), because on a torus of side
    ``L`` the raw distance never exceeds ``L/2``. ``smoothing`` regularises
    the grid scale: ``"corrected"`` restores the central cell's first moment
    (odd kernels only), ``"mollify"`` applies one ``[1/4, 1/2, 1/4]`` pass.
    """
    if preset not in PRESETS:
        raise ValueError(f"unknown kernel preset {preset!r}; choose from {PRESETS}")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    ell = grid.length / 8 if damping_length is None else damping_length
    k = _raw_profile(grid, preset, delta, ell)
    if smoothing == "mollify":
        k = _mollify(k)
    elif smoothing == "corrected":
        if preset == "damped-riesz":
            k = _first_moment_correction(grid, k)
    else:
        raise ValueError(f"smoothing must be 'corrected' or 'mollify', got {smoothing!r}")
    c_size, at = _size_scan(grid, k, delta)
    if c_size > size_budget:
        idx = np.unravel_index(at, grid.shape)
        raise KernelConditionError(f"size condition needs C={c_size:.3g} > budget {size_budget} at sample {idx}", (idx,))
    c_smooth, i, j = _kernels.pair_smoothness(k, grid.spacing, stride, eps)
    if not np.isfinite(c_smooth) or c_smooth > smooth_budget:
        pair = (np.unravel_index(i, grid.shape), np.unravel_index(j, grid.shape))
        raise KernelConditionError(
            f"smoothness condition needs C={c_smooth:.3g} > budget {smooth_budget} at pair {pair}", pair
        )
    symbol = np.fft.fftn(k) * grid.cell_volume
    if not np.all(np.isfinite(symbol)):
        raise KernelConditionError("kernel symbol is not bounded", ())
    symbol.setflags(write=False)
    return CZKernel(grid, SampledFunction(grid, k), delta, eps, preset, c_size, float(c_smooth), symbol, ell, smoothing)


def apply_cz(kern: CZKernel, f: SampledFunction) -> SampledFunction:
    if f.grid != kern.grid:
        raise GridMismatchError(f"grid mismatch: {f.grid} vs {kern.grid}")
    out = apply_multiplier(f, kern.symbol)
    return out if np.iscomplexobj(f.values) else SampledFunction(f.grid, np.real(out.values))


def cz_moment_check(kern: CZKernel, atoms) -> float:
    """``max |int T a|`` over the given atoms (or plain sampled functions)."""
    best = 0.0
    for a in atoms:
        vals = a if isinstance(a, SampledFunction) else a.values
        best = max(best, abs(apply_cz(kern, vals).integral()))
    return best


# local fractional integral


def default_cutoff(grid: Grid, half_width: float | None = None) -> SampledFunction:
    """1 on the centred cube of half-width ``L/16``, 0 outside twice that, smooth between."""
    a = grid.length / 16 if half_width is None else half_width
    t = np.max(np.abs(np.stack(_torus_offsets(grid))), axis=0)
    u = np.clip((t - a) / a, 0.0, 1.0)
    return SampledFunction(grid, 1.0 - smooth_step(u))


def fractional_kernel(grid: Grid, alpha: float, cutoff: SampledFunction | None = None) -> SampledFunction:
    n = grid.n
    if not 0 < alpha < n:
        raise ValueError(f"alpha must lie in (0, {n}), got {alpha}")
    phi = default_cutoff(grid) if cutoff is None else cutoff
    if phi.grid != grid:
        raise GridMismatchError(f"cutoff on {phi.grid}, kernel on {grid}")
    # cell averages of |y|^(alpha-n), recentred from the torus midpoint to 0
    k = np.roll(power_weight(grid, alpha - n).values, -(grid.size // 2), axis=tuple(range(n)))
    return SampledFunction(grid, phi.values * k)


def local_fractional(f: SampledFunction, alpha: float, cutoff: SampledFunction | None = None) -> SampledFunction:
    """Convolution with ``phi0(y) |y|^(alpha - n)``, the kernel taken as cell averages."""
    out = convolve(f, fractional_kernel(f.grid, alpha, cutoff))
    return out if np.iscomplexobj(f.values) else SampledFunction(f.grid, np.real(out.values))


def fractional_kernel_mass(n: int, alpha: float, length: float = 1.0) -> float:
    """``int phi0(y) |y|^(alpha-n) dy`` for the default cutoff, by adaptive quadrature."""
    from scipy import integrate

    a = length / 16

    def phi(t):
        u = min(max((t - a) / a, 0.0), 1.0)
        return 1.0 - float(smooth_step(np.array([u]))[0])

    if n == 1:
        val = integrate.quad(lambda y: phi(y) * y ** (alpha - 1), 0, a, limit=200)[0]
        val += integrate.quad(lambda y: phi(y) * y ** (alpha - 1), a, 2 * a, limit=200)[0]
        return 2 * val
    if n == 2:
        # cube norm in polar form: |y|_inf = r max(|cos|, |sin|); symmetric in eight sectors
        def inner(theta):
            c = math.cos(theta)
            f = lambda r: phi(r * c) * r ** (alpha - 1)  # noqa: E731
            return integrate.quad(f, 0, a / c, limit=200)[0] + integrate.quad(f, a / c, 2 * a / c, limit=200)[0]

        return 8 * integrate.quad(inner, 0, math.pi / 4, limit=200)[0]
    raise ValueError("only n = 1 and n = 2 are supported")


# operator handles and spaces


@dataclass(frozen=True, eq=False)
class Operator:
    name: str
    grid: Grid
    apply: Callable[[SampledFunction], SampledFunction]
    meta: dict = field(default_factory=dict)

    def __call__(self, f: SampledFunction) -> SampledFunction:
        return self.apply(f)


def _split_spec(text: str) -> tuple[str, dict]:
    """``name:k=v,k=v``; a token without ``=`` continues the previous value."""
    name, _, rest = text.partition(":")
    opts: dict = {}
    last = None
    for tok in filter(None, rest.split(",")):
        if "=" in tok:
            k, _, v = tok.partition("=")
            opts[k.strip()] = v.strip()
            last = k.strip()
        elif last is not None:
            opts[last] += "," + tok
        else:
            raise ValueError(f"cannot parse {text!r}: expected key=value after ':'")
    return name.strip(), opts


def make_operator(spec: str, grid: Grid) -> Operator:
    """``identity``, ``damped-riesz:delta=1,eps=1``, ``damped-pv:...`` or ``local-fractional:alpha=0.5``."""
    name, opts = _split_spec(spec)
    if name == "identity":
        return Operator(spec, grid, lambda f: f, {"kind": "identity"})
    if name in PRESETS:
        kern = build_cz_kernel(name, float(opts.get("delta", 1.0)), float(opts.get("eps", 1.0)), grid)
        return Operator(spec, grid, lambda f: apply_cz(kern, f), {"kind": "cz", **kern.describe(), "kernel": kern})
    if name == "local-fractional":
        alpha = float(opts.get("alpha", 0.5))
        kern = fractional_kernel(grid, alpha)
        return Operator(
            spec, grid, lambda f: SampledFunction(f.grid, np.real(convolve(f, kern).values)), {"kind": "fractional", "alpha": alpha}
        )
    raise ValueError(f"unknown operator {name!r}")


@dataclass(frozen=True)
class Space:
    """A weighted Lebesgue (``Lpw``) or local Hardy (``hpw``) norm; the weight is raised to ``weight_power``."""

    tag: str
    p: float
    weight: str = "constant"
    weight_power: float = 1.0

    def __post_init__(self):
        if self.tag not in ("Lpw", "hpw"):
            raise ValueError(f"space tag must be 'Lpw' or 'hpw', got {self.tag!r}")
        if not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p}")

    @classmethod
    def parse(cls, text: str) -> Space:
        """``hpw:p=1,w=const`` or ``lpw:p=2,w=power:0.3,wpow=2``."""
        tag, opts = _split_spec(text)
        tag = {"lpw": "Lpw", "hpw": "hpw"}.get(tag.lower(), tag)
        return cls(tag, float(opts.get("p", 1.0)), opts.get("w", "constant"), float(opts.get("wpow", 1.0)))

    def build_weight(self, grid: Grid) -> Weight:
        w = parse_weight(self.weight, grid)
        return w if self.weight_power == 1 else w.power(self.weight_power)

    def to_dict(self) -> dict:
        return {"tag": self.tag, "p": self.p, "weight": self.weight, "weight_power": self.weight_power}


@dataclass(frozen=True, eq=False)
class NormContext:
    grid: Grid
    N: int
    bank: object = None
    lat: DyadicLattice | None = None

    @classmethod
    def build(cls, grid: Grid, N: int = 4) -> NormContext:
        bank = build_filter_bank(grid)
        return cls(grid, min(N, grid.depth - bank.j_max), bank, DyadicLattice(grid))


def space_norm(f: SampledFunction, space: Space, ctx: NormContext, w: Weight | None = None) -> float:
    w = space.build_weight(f.grid) if w is None else w
    if space.tag == "Lpw":
        return weighted_lp_norm(f, space.p, w)
    return local_hardy_norm(f, space.p, w, ctx.bank, ctx.lat, ctx.N)


# reports


@dataclass(frozen=True)
class OperatorReport:
    operator: str
    source: dict
    target: dict
    family: str
    sizes: tuple[int, ...]
    input_ids: tuple[str, ...]
    source_norms: tuple[tuple[float, ...], ...]
    target_norms: tuple[tuple[float, ...], ...]
    admissibility: dict = field(default_factory=dict)

    @property
    def ratios(self) -> tuple[tuple[float, ...], ...]:
        return tuple(
            tuple(t / s if s > 0 else (0.0 if t == 0 else float("inf")) for s, t in zip(srow, trow))
            for srow, trow in zip(self.source_norms, self.target_norms)
        )

    def bands(self) -> list[RatioBand]:
        r = self.ratios
        return [RatioBand(r[k], r[k + 1], (self.sizes[k], self.sizes[k + 1])) for k in range(len(r) - 1)]

    @property
    def max_ratio(self) -> float:
        return float(max(max(row) for row in self.ratios))

    @property
    def median_ratio(self) -> float:
        return float(np.median(np.concatenate([np.array(row) for row in self.ratios])))

    @property
    def drift(self) -> float:
        return max((b.drift for b in self.bands()), default=0.0)

    @property
    def input_drift(self) -> float:
        return max((b.input_drift for b in self.bands()), default=0.0)

    @property
    def finite(self) -> bool:
        return all(np.isfinite(v) for row in self.ratios for v in row)

    def summary(self) -> dict:
        return {
            "operator": self.operator,
            "source": self.source,
            "target": self.target,
            "family": self.family,
            "grid_sizes": list(self.sizes),
            "max": self.max_ratio,
            "median": self.median_ratio,
            "drift": self.drift,
            "input_drift": self.input_drift,
            "finite": self.finite,
            "admissibility": self.admissibility,
        }

    def csv(self, level: int = 0) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["input_id", "source_norm", "target_norm", "ratio"])
        for name, s, t, r in zip(self.input_ids, self.source_norms[level], self.target_norms[level], self.ratios[level]):
            wr.writerow([name, repr(s), repr(t), repr(r)])
        return buf.getvalue()

    def write(self, directory, stem: str = "opbench") -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for k, size in enumerate(self.sizes):
            p = directory / f"{stem}_{size}.csv"
            p.write_text(self.csv(k))
            paths.append(p)
        p = directory / f"{stem}.json"
        p.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        paths.append(p)
        return paths


def _admissibility(op: Operator, source: Space, target: Space, grid: Grid) -> dict:
    lat = DyadicLattice(grid)
    n = grid.n
    kind = op.meta.get("kind")
    w = source.build_weight(grid)
    if kind == "cz":
        eta = min(op.meta["delta"], op.meta["eps"])
        need = (n + eta) / n * source.p
        qw = critical_index(w, lat)
        return {"class": f"A_{need:g}", "critical_index": qw, "satisfied": bool(qw < need)}
    if kind == "fractional":
        ratio = target.p / source.p
        r = reverse_holder_index(w, lat)
        return {"class": f"RH_{ratio:g}", "reverse_holder_index": r, "satisfied": bool(r >= ratio)}
    return {}


def boundedness_experiment(
    op_spec: str,
    family: list[TestFunction],
    source: Space,
    target: Space,
    grid: Grid,
    levels: int = 2,
    N: int = 4,
    family_description: str = "",
) -> OperatorReport:
    """Ratios ``||T f||_target / ||f||_source`` on ``levels`` successively refined grids."""
    if levels < 2:
        raise ValueError("need at least two grid levels to measure drift")
    grids = [grid]
    for _ in range(levels - 1):
        grids.append(grids[-1].refine())
    src_rows, tgt_rows = [], []
    for g in grids:
        op = make_operator(op_spec, g)
        ctx = NormContext.build(g, N)
        ws, wt = source.build_weight(g), target.build_weight(g)

        def one(t, op=op, ctx=ctx, ws=ws, wt=wt, g=g):
            f = t.sample(g)
            return space_norm(f, source, ctx, ws), space_norm(op(f), target, ctx, wt)

        rows = pmap(one, family)
        src_rows.append(tuple(r[0] for r in rows))
        tgt_rows.append(tuple(r[1] for r in rows))
    return OperatorReport(
        op_spec,
        source.to_dict(),
        target.to_dict(),
        family_description or f"{len(family)} functions",
        tuple(g.size for g in grids),
        tuple(str(k) for k in range(len(family))),
        tuple(src_rows),
        tuple(tgt_rows),
        _admissibility(make_operator(op_spec, grid), source, target, grid),
    )


# pointwise domination off the support


def pointwise_domination_check(
    op: Operator,
    piece,
    alpha: float,
    moments: int,
    levels: int | None = None,
) -> float:
    """``max M_Phi(T a)(x) / M_{alpha/tau}(chi_Q)(x)^tau`` over ``x`` outside ``2 sqrt(n) Q``.

    ``tau = (n + moments + 1) / n``. ``piece`` is an atom or block; its cube is
    the generating cube.
    """
    grid = piece.values.grid
    n = grid.n
    lat = DyadicLattice(grid)
    if not np.any(piece.values.values):
        return 0.0
    tau = (n + moments + 1) / n
    bank = build_filter_bank(grid)
    Ta = op(piece.values)
    mphi = grand_maximal(Ta, bank=bank, levels=levels).values
    chi = SampledFunction(grid, piece.cube.indicator(grid).astype(float))
    mq = fractional_maximal(chi, alpha / tau, lat).values ** tau
    inside, _ = dilated_cube(grid, piece.cube, 2 * math.sqrt(n))
    out = ~inside
    if not out.any():
        return 0.0
    return float(np.max(mphi[out] / mq[out]))


# cube sums with fractional gain


def _random_cubes(rng, n: int, count: int, lo: int, hi: int):
    return [
        (CubeIndex(int(j), tuple(int(v) for v in rng.integers(0, 2 ** int(j), size=n))), float(rng.exponential()))
        for j in rng.integers(lo, hi + 1, size=count)
    ]


def fractional_cube_sum_ratio(family, alpha: float, p: float, q: float, w: Weight) -> float:
    """``||sum lam |Q|^(alpha/n) chi_Q||_{L^q(w^q)} / ||sum lam chi_Q||_{L^p(w^p)}``."""
    g = w.grid
    num = np.zeros(g.shape)
    den = np.zeros(g.shape)
    for Q, lam in family:
        chi = Q.indicator(g)
        num += lam * Q.measure(g.length) ** (alpha / g.n) * chi
        den += lam * chi
    return weighted_lp_norm(SampledFunction(g, num), q, w.power(q)) / weighted_lp_norm(SampledFunction(g, den), p, w.power(p))


def fractional_cube_sum_experiment(
    grid: Grid,
    alpha: float,
    p: float,
    weight_spec: str = "constant",
    count: int = 20,
    family_size: int = 12,
    seed: int = 0,
) -> RatioBand:
    n = grid.n
    q = 1.0 / (1.0 / p - alpha / n)
    rng = np.random.default_rng(seed)
    fams = [_random_cubes(rng, n, family_size, 0, max(1, grid.depth - 3)) for _ in range(count)]
    g1 = grid.refine()
    rows = [
        tuple(fractional_cube_sum_ratio(f, alpha, p, q, parse_weight(weight_spec, g)) for f in fams) for g in (grid, g1)
    ]
    return RatioBand(rows[0], rows[1], (grid.size, g1.size), {"alpha": alpha, "p": p, "q": q, "weight": weight_spec})
