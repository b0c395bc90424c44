"""Atomic decomposition on the dyadic lattice, with machine-checkable certificates.

The pipeline inverts the corner-sampled reproducing operator, measures the
per-cube sup square functions of the preimage ``h`` and slices them into
threshold level sets ``{S > 2^i}``. Every band-pass cube is assigned to the
unique threshold at which it stops being more than half covered; within one
threshold, cubes are grouped under their maximal ancestors and each group
becomes one atom. Every low-pass cube becomes one block.
"""

from __future__ import annotations

import dataclasses
import json
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._certify import Certificate, PieceRecord, Tolerances, check
from ._parallel import pmap
from .analysis import SquareFunctionProfile, hl_maximal, local_hardy_norm, oscillation_square_function
from .bands import RatioBand
from .calderon import ReproducingOperator, invert_TN
from .dyadic import CubeIndex, DyadicLattice, assign_to_maximal, dilated_cube, maximal_antichain
from .families import TestFunction
from .filters import build_filter_bank
from .grid import Grid, GridMismatchError, SampledFunction, lp_norm
from .weights import (
    Weight,
    critical_index,
    hoelder_exponent_floor,
    parse_weight,
    reverse_holder_index,
)

__all__ = [
    "Atom",
    "Block",
    "Certificate",
    "Decomposition",
    "LevelSet",
    "PreconditionError",
    "Tolerances",
    "achieved_atomic_norm",
    "build_level_sets",
    "claim_ratios",
    "decompose",
    "load_decomposition",
    "reconstruct",
    "save_decomposition",
    "select_cubes",
    "verify",
]

DEFAULT_NOISE_FLOOR = 1e-12


class PreconditionError(ValueError):
    pass


def atom_dilation(N: int) -> float:
    return 2.0 ** (N + 3)


def block_dilation(N: int) -> float:
    return 2.0 ** (N + 2)


@dataclass(frozen=True, eq=False)
class Atom:
    cube: CubeIndex
    scale_factor: float
    values: SampledFunction
    coefficient: float
    level_index: int
    p: float
    q: float
    s: int
    energy_norm: float = float("nan")
    stated_coefficient: float = float("nan")
    members: int = 0

    kind = "atom"

    def support(self) -> tuple[np.ndarray, float]:
        return dilated_cube(self.values.grid, self.cube, self.scale_factor)


@dataclass(frozen=True, eq=False)
class Block:
    cube: CubeIndex
    scale_factor: float
    values: SampledFunction
    coefficient: float
    level_index: int
    p: float
    q: float
    stated_coefficient: float = float("nan")

    kind = "block"

    def support(self) -> tuple[np.ndarray, float]:
        return dilated_cube(self.values.grid, self.cube, self.scale_factor)


@dataclass(frozen=True, eq=False)
class Decomposition:
    grid: Grid
    params: dict
    atoms: tuple[Atom, ...] = ()
    blocks: tuple[Block, ...] = ()
    source_norms: dict = field(default_factory=dict)
    coefficient_norm: float = 0.0
    diagnostics: dict = field(default_factory=dict)
    certificate: Certificate | None = None

    @property
    def pieces(self) -> list:
        return list(self.atoms) + list(self.blocks)

    def replace(self, **changes) -> Decomposition:
        return dataclasses.replace(self, **changes)

    def weight(self) -> Weight:
        label = self.params.get("weight", "constant")
        try:
            return parse_weight(label, self.grid)
        except ValueError:
            raise ValueError(f"weight {label!r} cannot be rebuilt; pass it explicitly") from None


# level sets and cube selection


@dataclass(frozen=True, eq=False)
class LevelSet:
    i: int
    omega: np.ndarray
    dilated: np.ndarray
    cell_volume: float

    @property
    def measure(self) -> float:
        return float(self.omega.sum() * self.cell_volume)

    @property
    def dilated_measure(self) -> float:
        return float(self.dilated.sum() * self.cell_volume)

    @property
    def dilation_ratio(self) -> float:
        m = self.measure
        return self.dilated_measure / m if m > 0 else float("nan")


def _profile_values(S) -> np.ndarray:
    if isinstance(S, SquareFunctionProfile):
        return S.values.values
    if isinstance(S, SampledFunction):
        return S.values
    return np.asarray(S, dtype=float)


def build_level_sets(S, i: int, lat: DyadicLattice | None = None) -> LevelSet:
    """``{S > 2^i}`` and its dilation ``{M chi > 10^-n}``."""
    if lat is None:
        lat = S.lattice if isinstance(S, SquareFunctionProfile) and S.lattice is not None else None
    v = _profile_values(S)
    grid = lat.grid if lat is not None else S.grid
    if lat is None:
        lat = DyadicLattice(grid)
    omega = v > 2.0**i
    chi = SampledFunction(grid, omega.astype(float))
    dil = hl_maximal(chi, lat).values > 10.0 ** (-grid.n)
    return LevelSet(i, omega, dil, grid.cell_volume)


def _layer_levels(layer: str, N: int, j_max: int) -> list[int]:
    if layer == "j0":
        return [N]
    if layer == "jpos":
        return list(range(N + 1, N + j_max + 1))
    raise ValueError(f"layer must be 'j0' or 'jpos', got {layer!r}")


def _as_bool(E) -> np.ndarray:
    if isinstance(E, LevelSet):
        return E.omega
    if isinstance(E, SampledFunction):
        return E.values.astype(bool)
    return np.asarray(E, dtype=bool)


def select_cubes(
    lat: DyadicLattice, N: int, omega_i, omega_next, layer: str = "jpos", j_max: int | None = None
) -> set[CubeIndex]:
    """Cubes more than half inside ``omega_i`` and at most half inside ``omega_next``."""
    if j_max is None:
        j_max = lat.max_level - N
    a, b = _as_bool(omega_i), _as_bool(omega_next)
    out = set()
    for level in _layer_levels(layer, N, j_max):
        sel = (lat.overlap_fractions(a, level) > 0.5) & (lat.overlap_fractions(b, level) <= 0.5)
        out.update(CubeIndex(level, tuple(int(t) for t in ix)) for ix in np.argwhere(sel))
    return out


def _threshold_index(S: np.ndarray, lat: DyadicLattice, level: int, lo: int, hi: int):
    """Per cube the unique ``i`` in ``[lo, hi)`` selecting it, and a membership mask."""
    count = np.zeros((2**level,) * lat.grid.n, dtype=int)
    for i in range(lo, hi + 1):
        frac = lat.overlap_fractions(S > 2.0**i, level)
        if not np.any(frac > 0.5):
            break
        count += frac > 0.5
    return lo + count - 1, count > 0


def threshold_range(values: list[np.ndarray], i_range: tuple[int, int] | None = None) -> tuple[int, int]:
    """Thresholds ``2^lo < min positive value`` and ``2^hi > max value``."""
    pos = np.concatenate([v[v > 0].ravel() for v in values])
    if pos.size == 0:
        return (0, 1) if i_range is None else tuple(i_range)
    need_lo = math.ceil(math.log2(float(pos.min()))) - 1
    need_hi = math.floor(math.log2(float(pos.max()))) + 1
    if i_range is None:
        return need_lo, need_hi
    lo, hi = int(i_range[0]), int(i_range[1])
    if lo > need_lo or hi < need_hi:
        warnings.warn(
            f"threshold range [{lo}, {hi}] does not cover the square function; widened to "
            f"[{min(lo, need_lo)}, {max(hi, need_hi)}]",
            stacklevel=3,
        )
    return min(lo, need_lo), max(hi, need_hi)


# preconditions


def moment_floor(n: int, q_omega: float, p: float) -> int:
    return max(math.floor(n * (q_omega / p - 1.0) + 1e-12), -1)


def check_preconditions(
    p: float, q: float, s: int, w: Weight, lat: DyadicLattice, q_omega: float | None = None, r_index: float | None = None
) -> dict:
    """Check the moment order and integrability exponent; return the estimates used."""
    if not p > 0:
        raise PreconditionError(f"p > 0 required, got p={p}")
    if q_omega is None:
        q_omega = critical_index(w, lat)
    need_s = moment_floor(lat.grid.n, q_omega, p)
    if s < need_s:
        raise PreconditionError(
            f"moment order fails s ≥ max{{⌊n(q_ω/p−1)⌋, −1}}: s={s}, q_ω≈{q_omega:.3g} gives {need_s}"
        )
    if r_index is None:
        r_index = reverse_holder_index(w, lat)
    q_r = hoelder_exponent_floor(p, r_index)
    if not q > max(q_omega, q_r):
        raise PreconditionError(
            f"exponent fails q > max{{q_ω, q_r}}: q={q}, q_ω≈{q_omega:.3g}, q_r≈{q_r:.3g}"
        )
    return {"q_omega": q_omega, "r_index": r_index, "q_r": q_r, "s_floor": need_s}


# assembly


def _cube_corner(Q: CubeIndex, grid: Grid) -> tuple[int, ...]:
    m = grid.size >> Q.j
    return tuple(l * m for l in Q.l)


def _atom_raw(members, coef: dict, op: ReproducingOperator, q: float):
    grid = op.bank.grid
    N = op.N
    by_scale = defaultdict(list)
    for Q in members:
        by_scale[Q.j - N].append(Q)
    spec = np.zeros(grid.shape, dtype=complex)
    energy = np.zeros(grid.shape)
    for j, qs in sorted(by_scale.items()):
        comb = np.zeros(grid.shape)
        cube = op.lat.cube_measure(j + N)
        for Q in qs:
            c = coef[Q.j][Q.l]
            comb[_cube_corner(Q, grid)] = c * cube / grid.cell_volume
            energy[Q.slices(grid)] += c * c
        spec += op.bank.windows[j] * np.fft.fftn(comb)
    raw = np.fft.ifftn(spec).real
    en = float((grid.cell_volume * np.sum(np.sqrt(energy) ** q)) ** (1.0 / q))
    return raw, en


def _budget(grid: Grid, mask: np.ndarray, measure: float, p: float, q: float, w: Weight) -> float:
    return measure ** (1.0 / q) * w.mass_of(mask) ** (-1.0 / p)


def decompose(
    f: SampledFunction,
    p: float,
    q: float,
    s: int,
    w: Weight,
    op: ReproducingOperator,
    i_range: tuple[int, int] | None = None,
    *,
    tol: float = 1e-10,
    noise_floor: float = DEFAULT_NOISE_FLOOR,
    q_omega: float | None = None,
    r_index: float | None = None,
    tolerances: Tolerances = Tolerances(),
    certify: bool = True,
) -> Decomposition:
    """Atoms and blocks whose weighted sum reproduces ``f``.

    Coefficients are the smallest ones that put every piece exactly on its
    size budget over the dilated cube.
    """
    bank, lat, N = op.bank, op.lat, op.N
    grid = f.grid
    if grid != bank.grid or w.grid != grid:
        raise GridMismatchError("function, weight and operator must share one grid")
    est = check_preconditions(p, q, s, w, lat, q_omega, r_index)
    params = {
        "p": p,
        "q": q,
        "s": s,
        "N": N,
        "n": grid.n,
        "N_g": grid.size,
        "L": grid.length,
        "j_max": bank.j_max,
        "base_frequency": bank.base_frequency,
        "weight": w.label,
    }
    inv = invert_TN(op, f, tol=tol)
    h = inv.h
    layers = bank.filter_all(h)
    prof = oscillation_square_function(h, bank, lat, N, "sup")
    s0 = np.array(prof.s0.values.values)
    s1 = np.array(prof.s1.values.values)
    top = max(float(s0.max()), float(s1.max()))
    cut = noise_floor * top
    s0[s0 <= cut] = 0.0
    s1[s1 <= cut] = 0.0
    lo, hi = threshold_range([s0, s1], i_range)
    diag = {
        **est,
        "i_range": [lo, hi],
        "noise_floor": noise_floor,
        "inversion_iterations": inv.iterations,
        "inversion_residual": inv.residual,
    }

    # coefficients at cube corners, per lattice level
    levels1 = _layer_levels("jpos", N, bank.j_max)
    coef = {N: layers[0][lat.corner_indices(N)]}
    for level in levels1:
        coef[level] = layers[level - N][lat.corner_indices(level)]
    total_energy = sum(float(np.sum(c**2)) * lat.cube_measure(lv) for lv, c in coef.items())

    atoms: list[Atom] = []
    blocks: list[Block] = []
    kept_energy = 0.0
    if top > 0:
        by_i: dict[int, list[CubeIndex]] = defaultdict(list)
        for level in levels1:
            idx, member = _threshold_index(s1, lat, level, lo, hi)
            for ix in np.argwhere(member):
                t = tuple(int(v) for v in ix)
                by_i[int(idx[t])].append(CubeIndex(level, t))
                kept_energy += float(coef[level][t] ** 2) * lat.cube_measure(level)
        c1 = atom_dilation(N)
        jobs = []
        for i in sorted(by_i):
            cubes = by_i[i]
            groups = assign_to_maximal(cubes, maximal_antichain(cubes))
            jobs.extend((i, top_cube, groups[top_cube]) for top_cube in sorted(groups))

        def make_atom(job):
            i, top_cube, members = job
            raw, en = _atom_raw(members, coef, op, q)
            norm = lp_norm(SampledFunction(grid, raw), q)
            if norm == 0:
                return None
            mask, meas = dilated_cube(grid, top_cube, c1)
            lam = norm / _budget(grid, mask, meas, p, q, w)
            stated = w.mass(top_cube) ** (1.0 / p) / top_cube.measure(grid.length) ** (1.0 / q) * en
            return Atom(top_cube, c1, SampledFunction(grid, raw / lam), lam, i, p, q, s, en, stated, len(members))

        atoms = [a for a in pmap(make_atom, jobs) if a is not None]

        idx0, member0 = _threshold_index(s0, lat, N, lo, hi)
        c0 = block_dilation(N)
        psi0 = bank.psi0.values
        psi0_q = lp_norm(bank.psi0, q)
        P_meas = lat.cube_measure(N)
        for ix in np.argwhere(member0):
            t = tuple(int(v) for v in ix)
            c = float(coef[N][t])
            kept_energy += c * c * P_meas
            if c == 0:
                continue
            P = CubeIndex(N, t)
            raw = P_meas * c * np.roll(psi0, _cube_corner(P, grid), axis=tuple(range(grid.n)))
            mask, meas = dilated_cube(grid, P, c0)
            mu = P_meas * abs(c) * psi0_q / _budget(grid, mask, meas, p, q, w)
            stated = 2.0 ** (-N * grid.n) * w.mass(P) ** (1.0 / p) * P_meas ** (-1.0 / q) * psi0_q * abs(c)
            blocks.append(Block(P, c0, SampledFunction(grid, raw / mu), mu, int(idx0[t]), p, q, stated))

    diag["unassigned_energy"] = (total_energy - kept_energy) / total_energy if total_energy > 0 else 0.0
    diag["dilation_constant"] = _dilation_constant([s0, s1], lat, lo, hi)
    dec = Decomposition(
        grid,
        params,
        tuple(atoms),
        tuple(blocks),
        {"hpw": local_hardy_norm(f, p, w, bank, lat, N), "lq": lp_norm(f, q)},
        0.0,
        diag,
    )
    dec = dec.replace(coefficient_norm=achieved_atomic_norm(dec, p, w))
    if certify:
        dec = dec.replace(certificate=verify(dec, f, p, q, s, w, tolerances))
    return dec


def _dilation_constant(profiles, lat: DyadicLattice, lo: int, hi: int) -> float:
    """Largest ``|dilated level set| / |level set|`` over thresholds and layers."""
    best = 0.0
    for S in profiles:
        for i in range(lo, hi + 1):
            ls = build_level_sets(S, i, lat)
            if ls.measure > 0:
                best = max(best, ls.dilation_ratio)
    return best


# evaluation


def _pieces_sorted(dec: Decomposition) -> list:
    pieces = dec.pieces
    order = sorted(range(len(pieces)), key=lambda k: -abs(pieces[k].coefficient))
    return [pieces[k] for k in order]


def reconstruct(dec: Decomposition, limit: int | None = None) -> SampledFunction:
    """Weighted sum of the pieces, largest coefficient first; ``limit`` keeps a prefix."""
    out = np.zeros(dec.grid.shape)
    for k, piece in enumerate(_pieces_sorted(dec)):
        if limit is not None and k >= limit:
            break
        if piece.values.grid != dec.grid:
            raise GridMismatchError(f"piece on {piece.values.grid} in a decomposition on {dec.grid}")
        out = out + piece.coefficient * piece.values.values
    return SampledFunction(dec.grid, out)


def partial_sum_tails(
    dec: Decomposition, f: SampledFunction, op: ReproducingOperator, p: float, w: Weight, checkpoints=None
) -> list[tuple[int, float]]:
    """``(k, ||f - partial_k||_{h^p_w})`` at the given prefix lengths."""
    total = len(dec.pieces)
    if checkpoints is None:
        checkpoints = sorted({0, total} | {2**e for e in range(int(math.log2(max(total, 1))) + 1)})
    out = []
    for k in checkpoints:
        tail = f - reconstruct(dec, k)
        out.append((k, local_hardy_norm(tail, p, w, op.bank, op.lat, op.N)))
    return out


def achieved_atomic_norm(dec: Decomposition, p: float | None = None, w: Weight | None = None, eta: float | None = None) -> float:
    """Coefficient norm of the decomposition; ``eta`` selects the vector-valued variant."""
    p = dec.params["p"] if p is None else p
    w = dec.weight() if w is None else w
    total = 0.0
    for pieces in (dec.atoms, dec.blocks):
        acc = np.zeros(dec.grid.shape)
        for piece in pieces:
            mask, _ = piece.support()
            term = piece.coefficient / w.mass_of(mask) ** (1.0 / p)
            acc[mask] += term if eta is None else term**eta
        if eta is not None:
            acc = acc ** (1.0 / eta)
        total += float((dec.grid.cell_volume * np.sum(acc**p * w.values)) ** (1.0 / p))
    return total


def claim_ratios(dec: Decomposition) -> np.ndarray:
    """Per atom: generating energy over ``2^i |Q|^(1/q)`` on its maximal cube."""
    L = dec.grid.length
    return np.array(
        [a.energy_norm / (2.0**a.level_index * a.cube.measure(L) ** (1.0 / a.q)) for a in dec.atoms]
    )


def _records(dec: Decomposition) -> list[PieceRecord]:
    return [
        PieceRecord(pc.kind, pc.cube.j, pc.cube.l, pc.scale_factor, pc.coefficient, pc.values.values)
        for pc in dec.pieces
    ]


def verify(
    dec: Decomposition,
    f: SampledFunction,
    p: float | None = None,
    q: float | None = None,
    s: int | None = None,
    w: Weight | None = None,
    tolerances: Tolerances = Tolerances(),
) -> Certificate:
    """Re-measure every piece and the reconstruction from scratch."""
    par = dec.params
    p = par["p"] if p is None else p
    q = par["q"] if q is None else q
    s = par["s"] if s is None else s
    w = dec.weight() if w is None else w
    if f.grid != dec.grid:
        raise GridMismatchError(f"input on {f.grid} but decomposition on {dec.grid}")
    return check(
        dec.grid,
        _records(dec),
        np.asarray(f.values, dtype=float),
        p,
        q,
        s,
        w.values,
        int(par["N"]),
        int(par["j_max"]),
        float(par.get("base_frequency", 4)),
        tolerances,
    )


# serialisation


def _piece_json(pc, ref: dict, check_row: dict | None) -> dict:
    d = {
        "cube": pc.cube.to_dict(),
        "scale_factor": pc.scale_factor,
        "level_index": pc.level_index,
        "values_ref": ref,
        "stated_coefficient": pc.stated_coefficient,
    }
    d["lambda" if pc.kind == "atom" else "mu"] = pc.coefficient
    if pc.kind == "atom":
        d["energy_norm"] = pc.energy_norm
        d["members"] = pc.members
    if check_row is not None:
        d["size_slack"] = check_row["size_slack"]
        d["tail_mass"] = check_row["tail_mass"]
        if pc.kind == "atom":
            d["moments"] = check_row["moments"]
    return d


def decomposition_dict(dec: Decomposition, blob_name: str) -> dict:
    cert = dec.certificate.to_dict() if dec.certificate is not None else None
    rows = {"atom": [], "block": []}
    if cert is not None:
        for row in cert["pieces"]:
            rows[row["kind"]].append(row)
    atoms = [
        _piece_json(a, {"blob": blob_name, "index": k}, rows["atom"][k] if cert else None)
        for k, a in enumerate(dec.atoms)
    ]
    off = len(dec.atoms)
    blocks = [
        _piece_json(b, {"blob": blob_name, "index": off + k}, rows["block"][k] if cert else None)
        for k, b in enumerate(dec.blocks)
    ]
    return {
        "params": dec.params,
        "atoms": atoms,
        "blocks": blocks,
        "source_norms": dec.source_norms,
        "coefficient_norm": dec.coefficient_norm,
        "diagnostics": dec.diagnostics,
        "certificate": cert,
    }


def save_decomposition(dec: Decomposition, path) -> Path:
    """Write ``path`` (JSON) and a sidecar ``.blob`` of concatenated grid records."""
    path = Path(path)
    blob = path.with_suffix(".blob")
    with open(blob, "wb") as fh:
        for pc in dec.pieces:
            fh.write(pc.values.to_bytes())
    path.write_text(json.dumps(decomposition_dict(dec, blob.name), indent=2, sort_keys=True) + "\n")
    return blob


def _load_values(ref: dict, base: Path, grid: Grid, cache: dict) -> SampledFunction:
    if "inline" in ref:
        return SampledFunction(grid, np.asarray(ref["inline"], dtype=float).reshape(grid.shape))
    name = ref["blob"]
    if name not in cache:
        cache[name] = (base / name).read_bytes()
    data = cache[name]
    size = SampledFunction.zeros(grid).record_size()
    out = SampledFunction.from_bytes(data, int(ref["index"]) * size)
    if out.grid != grid:
        raise GridMismatchError(f"blob record on {out.grid}, decomposition on {grid}")
    return out


def load_decomposition(path) -> Decomposition:
    path = Path(path)
    d = json.loads(path.read_text())
    par = dict(d["params"])
    par.setdefault("weight", "constant")
    par.setdefault("j_max", None)
    grid = Grid(int(par["n"]), int(par["N_g"]), float(par.get("L", 1.0)))
    if par["j_max"] is None:
        par["j_max"] = build_filter_bank(grid).j_max
    cache: dict = {}
    nan = float("nan")
    atoms = tuple(
        Atom(
            CubeIndex.from_dict(a["cube"]),
            float(a.get("scale_factor", atom_dilation(int(par["N"])))),
            _load_values(a["values_ref"], path.parent, grid, cache),
            float(a["lambda"]),
            int(a.get("level_index", 0)),
            float(par["p"]),
            float(par["q"]),
            int(par["s"]),
            float(a.get("energy_norm", nan)),
            float(a.get("stated_coefficient", nan)),
            int(a.get("members", 0)),
        )
        for a in d.get("atoms", [])
    )
    blocks = tuple(
        Block(
            CubeIndex.from_dict(b["cube"]),
            float(b.get("scale_factor", block_dilation(int(par["N"])))),
            _load_values(b["values_ref"], path.parent, grid, cache),
            float(b["mu"]),
            int(b.get("level_index", 0)),
            float(par["p"]),
            float(par["q"]),
            float(b.get("stated_coefficient", nan)),
        )
        for b in d.get("blocks", [])
    )
    dec = Decomposition(grid, par, atoms, blocks, dict(d.get("source_norms", {})), 0.0, dict(d.get("diagnostics", {})))
    try:
        norm = achieved_atomic_norm(dec)
    except ValueError:
        norm = float(d.get("coefficient_norm", nan))
    return dec.replace(coefficient_norm=norm)


# refinement experiments


def _operator(grid: Grid, N: int, j_max: int | None = None) -> ReproducingOperator:
    return ReproducingOperator(build_filter_bank(grid, j_max), DyadicLattice(grid), N)


def coefficient_bound_experiment(
    family: list[TestFunction],
    grid: Grid,
    p: float,
    q: float,
    s: int,
    weight_spec: str = "constant",
    N: int = 4,
    eta: float | None = None,
) -> RatioBand:
    """``achieved_atomic_norm / ||f||_{h^p_w}`` on ``grid`` and its refinement."""
    rows = []
    for g in (grid, grid.refine()):
        op = _operator(g, N)
        w = parse_weight(weight_spec, g)
        qw = critical_index(w, op.lat)
        rw = reverse_holder_index(w, op.lat)
        row = []
        for t in family:
            f = t.sample(g)
            dec = decompose(f, p, q, s, w, op, q_omega=qw, r_index=rw, certify=False)
            row.append(achieved_atomic_norm(dec, p, w, eta) / dec.source_norms["hpw"])
        rows.append(tuple(row))
    return RatioBand(rows[0], rows[1], (grid.size, 2 * grid.size), {"p": p, "q": q, "s": s, "weight": weight_spec, "eta": eta})


@dataclass(frozen=True)
class SyntheticPiece:
    """Recipe for one atom or block, independent of the grid it is sampled on."""

    kind: str
    cube: CubeIndex
    members: tuple[tuple[CubeIndex, float], ...]
    coefficient: float


def random_synthetic(rng: np.random.Generator, n: int, N: int, max_scale: int, kind: str, count: int) -> list[SyntheticPiece]:
    """Random atoms (band-pass corner sums under one cube) or blocks (low-pass translates)."""
    out = []
    for _ in range(count):
        if kind == "atom":
            level = int(rng.integers(N + 1, N + max_scale + 1))
        elif kind == "block":
            level = N
        else:
            raise ValueError(f"kind must be 'atom' or 'block', got {kind!r}")
        cube = CubeIndex(level, tuple(int(v) for v in rng.integers(0, 2**level, size=n)))
        members = [(cube, float(rng.standard_normal()))]
        for _ in range(int(rng.integers(0, 4))):
            deeper = int(rng.integers(level, N + max_scale + 1)) if kind == "atom" else level + int(rng.integers(0, 3))
            off = tuple(int(v) for v in rng.integers(0, 2 ** (deeper - level), size=n))
            sub = CubeIndex(deeper, tuple(l * 2 ** (deeper - level) + o for l, o in zip(cube.l, off)))
            members.append((sub, float(rng.standard_normal())))
        out.append(SyntheticPiece(kind, cube, tuple(members), float(np.exp(rng.normal(0.0, 1.0)))))
    return out


def build_synthetic(pieces: list[SyntheticPiece], op: ReproducingOperator, p: float, q: float, w: Weight) -> Decomposition:
    """Normalise every recipe to its size budget and wrap the result as a decomposition."""
    grid = op.bank.grid
    N = op.N
    atoms, blocks = [], []
    for sp in pieces:
        spec = np.zeros(grid.shape, dtype=complex)
        for Q, c in sp.members:
            comb = np.zeros(grid.shape)
            if sp.kind == "atom":
                j, weight = Q.j - N, Q.measure(grid.length)
            else:
                j, weight = 0, sp.cube.measure(grid.length)
            comb[_cube_corner(Q, grid)] = c * weight / grid.cell_volume
            spec += op.bank.windows[j] * np.fft.fftn(comb)
        raw = np.fft.ifftn(spec).real
        factor = atom_dilation(N) if sp.kind == "atom" else block_dilation(N)
        mask, meas = dilated_cube(grid, sp.cube, factor)
        a = raw / lp_norm(SampledFunction(grid, raw), q) * _budget(grid, mask, meas, p, q, w)
        vals = SampledFunction(grid, a)
        if sp.kind == "atom":
            atoms.append(Atom(sp.cube, factor, vals, sp.coefficient, 0, p, q, 0, members=len(sp.members)))
        else:
            blocks.append(Block(sp.cube, factor, vals, sp.coefficient, 0, p, q))
    par = {"p": p, "q": q, "s": 0, "N": N, "n": grid.n, "N_g": grid.size, "L": grid.length, "j_max": op.bank.j_max, "weight": w.label}
    dec = Decomposition(grid, par, tuple(atoms), tuple(blocks))
    return dec.replace(coefficient_norm=achieved_atomic_norm(dec, p, w))


def reconstruction_bound_ratio(pieces: list[SyntheticPiece], op: ReproducingOperator, p: float, q: float, w: Weight) -> float:
    dec = build_synthetic(pieces, op, p, q, w)
    total = reconstruct(dec)
    return local_hardy_norm(total, p, w, op.bank, op.lat, op.N) / dec.coefficient_norm


def reconstruction_bound_experiment(
    grid: Grid,
    kind: str,
    count: int = 50,
    p: float = 1.0,
    q: float = 2.0,
    weight_spec: str = "constant",
    N: int = 4,
    pieces_per: int = 3,
    seed: int = 0,
) -> RatioBand:
    """Synthetic decompositions of one kind, sampled on ``grid`` and its refinement."""
    jmax = build_filter_bank(grid).j_max
    rng = np.random.default_rng(seed)
    # stay below the top band so every scale means the same filter on both grids
    recipes = [random_synthetic(rng, grid.n, N, max(jmax - 1, 1), kind, pieces_per) for _ in range(count)]
    rows = []
    for g in (grid, grid.refine()):
        op = _operator(g, N)
        w = parse_weight(weight_spec, g)
        rows.append(tuple(reconstruction_bound_ratio(r, op, p, q, w) for r in recipes))
    return RatioBand(rows[0], rows[1], (grid.size, 2 * grid.size), {"kind": kind, "p": p, "q": q, "weight": weight_spec})
