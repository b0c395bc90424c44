"""Acceptance criteria, each at its stated tolerance, one report line each."""

import itertools
import math
from pathlib import Path

import numpy as np

from conftest import ACCEPTANCE
from whardy.analysis import equivalence_experiment, fractional_maximal, grand_maximal, hl_maximal, vector_fractional_experiment
from whardy.atomic import (
    _operator,
    build_synthetic,
    coefficient_bound_experiment,
    decompose,
    random_synthetic,
    reconstruction_bound_experiment,
)
from whardy.calderon import calibrate_N, invert_TN, apply_TN
from whardy.cli import main
from whardy.dyadic import DyadicLattice
from whardy.families import calibration_family, mixed_family, molecule_family, white_noise
from whardy.filters import build_filter_bank, check_calderon_identity, lowpass_integral, moment_errors
from whardy.grid import Grid, SampledFunction, convolve, lp_norm
from whardy.operators import (
    Space,
    boundedness_experiment,
    cz_moment_check,
    fractional_cube_sum_experiment,
    make_operator,
    pointwise_domination_check,
)
from whardy.weights import (
    ap_constant,
    block_sum_experiment,
    constant_weight,
    critical_index,
    fefferman_stein_experiment,
    parse_weight,
    power_weight,
)

FAMILY = mixed_family(1, 20, 0)
CONFIGS = [(1.0, 2.0, "constant"), (0.8, 2.0, "constant"), (1.0, 2.0, "power:0.5"), (2.0, 3.0, "constant")]


def report(k, title, ok, detail):
    ACCEPTANCE[k] = (bool(ok), title, detail)
    assert ok, f"criterion {k} ({title}) failed: {detail}"


def test_calderon_identity_and_reconstruction():
    g = Grid(1, 1024)
    bank = build_filter_bank(g)
    residual = check_calderon_identity(bank)
    errs = [rel(bank.reconstruct(f), f) for f in white_noise(g, 20, seed=1)]
    ok = residual < 1e-12 and max(errs) < 1e-10
    report(1, "Calderon identity", ok, f"residual {residual:.2e} (<1e-12), reconstruction {max(errs):.2e} (<1e-10)")


def test_vanishing_moments_and_unit_lowpass():
    worst, mass_err = 0.0, 0.0
    for g in (Grid(1, 1024), Grid(2, 128)):
        bank = build_filter_bank(g)
        worst = max(worst, max(moment_errors(bank, 4)))
        mass_err = max(mass_err, abs(lowpass_integral(bank) - 1))
    ok = worst < 1e-10 and mass_err < 1e-12
    report(2, "vanishing moments", ok, f"max moment {worst:.2e} (<1e-10), |int psi0 - 1| {mass_err:.2e} (<1e-12)")


def rel(a, b):
    return lp_norm(a - b, 2) / lp_norm(b, 2)


def test_reproducing_operator_inversion():
    g = Grid(1, 1024)
    bank = build_filter_bank(g)
    lat = DyadicLattice(g)
    op = calibrate_N(bank, lat, calibration_family(g), 0.5)
    iters, recs = [], []
    for f in white_noise(g, 5, seed=9) + [t.sample(g) for t in FAMILY[:5]]:
        inv = invert_TN(op, f, tol=1e-8, max_iter=30)
        iters.append(inv.iterations)
        recs.append(rel(apply_TN(op, inv.h), f))
    ok = op.N <= 4 and op.contraction_estimate <= 0.5 and max(iters) <= 30 and max(recs) <= 2e-8
    report(
        3, "T_N calibration and inversion", ok,
        f"N={op.N} (<=4), c={op.contraction_estimate:.2e} (<=0.5), iterations <= {max(iters)} (<=30), "
        f"reconstruction {max(recs):.2e} (<=2e-8)",
    )


def test_decomposition_certificates():
    g = Grid(1, 512)
    op = _operator(g, 4)
    worst = {"tail": 0.0, "slack": -math.inf, "moment": 0.0, "rec": 0.0}
    pieces, invalid = 0, 0
    for p, q, spec in CONFIGS:
        w = parse_weight(spec, g)
        qw = critical_index(w, op.lat)
        for t in FAMILY:
            cert = decompose(t.sample(g), p, q, 1, w, op, q_omega=qw).certificate
            invalid += not cert.valid
            pieces += len(cert.pieces)
            for pc in cert.pieces:
                worst["tail"] = max(worst["tail"], pc.tail_mass)
                worst["slack"] = max(worst["slack"], pc.size_slack)
                worst["moment"] = max(worst["moment"], pc.moment_error)
            worst["rec"] = max(worst["rec"], cert.reconstruction_error_2)
    ok = (
        invalid == 0
        and worst["tail"] <= 1e-3
        and worst["slack"] <= 1e-9
        and worst["moment"] <= 1e-6
        and worst["rec"] <= 1e-6
    )
    report(
        4, "decomposition certificates", ok,
        f"{pieces} pieces over 80 runs, tail {worst['tail']:.1e}, slack {worst['slack']:.1e}, "
        f"moment {worst['moment']:.1e}, L2 error {worst['rec']:.1e}",
    )


def test_coefficient_bound_is_stable():
    drifts = {}
    for p, q, spec in CONFIGS:
        band = coefficient_bound_experiment(FAMILY, Grid(1, 512), p, q, 1, spec, N=4)
        assert band.finite
        drifts[f"p={p:g},{spec}"] = band.drift
    ok = max(drifts.values()) < 0.25
    report(5, "coefficient bound stability", ok, f"max drift {max(drifts.values()):.4f} (<0.25) over {len(drifts)} configs")


def test_reconstruction_bound_is_stable():
    drifts = []
    for kind in ("atom", "block"):
        for p, spec in [(1.0, "constant"), (1.0, "power:0.5"), (0.8, "constant")]:
            band = reconstruction_bound_experiment(Grid(1, 512), kind, 50, p, 2.0, spec)
            assert band.finite
            drifts.append(band.drift)
    ok = max(drifts) < 0.25
    report(6, "reconstruction bound stability", ok, f"max drift {max(drifts):.4f} (<0.25), atoms and blocks")


def test_norm_equivalences():
    spreads, drifts = [], []
    for kind in ("g/g_d", "sup/inf", "grand/g_d"):
        for p, spec in [(1.0, "constant"), (2.0, "constant"), (1.0, "power:0.5")]:
            band = equivalence_experiment(kind, FAMILY, Grid(1, 512), p, spec, N=4)
            spreads.append(band.spread)
            drifts.append(band.drift)
    ok = max(spreads) <= 100 and max(drifts) < 0.2
    report(7, "norm equivalences", ok, f"max spread {max(spreads):.2f} (<=100), max drift {max(drifts):.4f} (<0.2)")


def test_weight_classifiers():
    g = Grid(1, 1024)
    lat = DyadicLattice(g)
    const = constant_weight(g)
    ap_err = max(abs(ap_constant(const, p, lat) - 1) for p in (1.0, 1.5, 2.0, 3.0, 4.0))
    ci = {a: critical_index(power_weight(g, a), lat) for a in (0.5, 1.0)}
    ci_err = max(abs(v - (1 + a)) for a, v in ci.items())
    fs = [fefferman_stein_experiment(Grid(1, 512), p, w).drift for p, w in [(2, "constant"), (2, "power:0.5"), (1.5, "power:-0.3")]]
    bs = [
        block_sum_experiment(Grid(1, 512), p, q, w, var).drift
        for var in ("normalised", "averages")
        for p, q, w in [(1, 2, "constant"), (1, 2, "power:0.5"), (2, 3, "power:-0.3")]
    ]
    ok = ap_err <= 1e-12 and ci_err <= 0.1 and max(fs) < 0.2 and max(bs) < 0.2
    report(
        8, "weight classifiers", ok,
        f"|A_p(1)-1| {ap_err:.1e}, q_w(0.5)={ci[0.5]:.3f}, q_w(1)={ci[1.0]:.3f}, "
        f"Fefferman-Stein drift {max(fs):.4f}, block-sum drift {max(bs):.4f}",
    )


def test_operator_experiments():
    fam = molecule_family(1, 20, 0)
    g = Grid(1, 256)
    runs = [
        ("damped-riesz:delta=1,eps=1", "hpw:p=1,w=const", "lpw:p=1,w=const"),
        ("damped-riesz:delta=1,eps=1", "hpw:p=1,w=power:0.5", "lpw:p=1,w=power:0.5"),
        ("damped-riesz:delta=1,eps=1", "hpw:p=1", "hpw:p=1"),
        ("local-fractional:alpha=0.5", "hpw:p=1", "lpw:p=2"),
        ("local-fractional:alpha=0.5", "hpw:p=0.5,w=power:0.3,wpow=0.5", "hpw:p=0.6666666666666666,w=power:0.3,wpow=0.6666666666666666"),
    ]
    drifts, finite = [], True
    for spec, src, tgt in runs:
        rep = boundedness_experiment(spec, fam, Space.parse(src), Space.parse(tgt), g)
        finite &= rep.finite
        drifts.append(rep.drift)
    for a, p, w in [(0.5, 1.0, "constant"), (0.5, 1.2, "power:0.3"), (0.3, 0.8, "constant")]:
        band = fractional_cube_sum_experiment(Grid(1, 512), a, p, w)
        finite &= band.finite
        drifts.append(band.drift)
    fams = [mixed_family(1, 4, s) for s in range(10)]
    for a, p, w in [(0.5, 1.2, "constant"), (0.3, 1.5, "power:0.2")]:
        band = vector_fractional_experiment(fams, Grid(1, 512), a, p, 2, w)
        finite &= band.finite
        drifts.append(band.drift)

    rng = np.random.default_rng(3)
    atoms = random_synthetic(rng, 1, 4, 3, "atom", 5)
    blocks = random_synthetic(rng, 1, 4, 3, "block", 3)
    dom, moment = [], 0.0
    for size in (256, 512):
        gg = Grid(1, size)
        op4 = _operator(gg, 4)
        w = constant_weight(gg)
        da, db = build_synthetic(atoms, op4, 1, 2, w), build_synthetic(blocks, op4, 1, 2, w)
        T = make_operator("damped-riesz:delta=1,eps=1", gg)
        I = make_operator("local-fractional:alpha=0.5", gg)
        moment = max(moment, cz_moment_check(T.meta["kernel"], da.atoms))
        dom.append(
            np.array(
                [pointwise_domination_check(T, a, 0.0, 1, levels=4) for a in da.atoms]
                + [pointwise_domination_check(I, b, 0.5, 1, levels=4) for b in db.blocks]
            )
        )
    dom_drift = float(np.max(np.abs(dom[1] - dom[0]) / dom[0]))
    finite &= bool(np.all(np.isfinite(dom[0])) and np.all(np.isfinite(dom[1])))
    ok = finite and max(drifts) < 0.25 and moment < 1e-10 and dom_drift < 0.25
    report(
        9, "operator experiments", ok,
        f"{len(drifts)} bands, max drift {max(drifts):.4f} (<0.25), cz moment {moment:.1e} (<1e-10), "
        f"domination drift {dom_drift:.4f}",
    )


def _brute_cubes(shape, level):
    side = shape[0] >> level
    for l in itertools.product(range(2**level), repeat=len(shape)):
        yield tuple(slice(i * side, (i + 1) * side) for i in l)


def test_brute_force_oracles():
    rng = np.random.default_rng(10)
    errs = {}
    for g in (Grid(1, 64), Grid(2, 16)):
        N = g.size
        f = SampledFunction(g, rng.standard_normal(g.shape))
        h = SampledFunction(g, rng.standard_normal(g.shape))
        direct = np.zeros(g.shape)
        for x in itertools.product(range(N), repeat=g.n):
            for y in itertools.product(range(N), repeat=g.n):
                direct[x] += f.values[y] * h.values[tuple((a - b) % N for a, b in zip(x, y))]
        direct *= g.cell_volume
        errs["convolve"] = max(errs.get("convolve", 0), float(np.max(np.abs(convolve(f, h).values - direct))))
        for p in (0.5, 1.0, 2.0, 3.5):
            brute = (sum(abs(v) ** p for v in f.values.ravel()) * g.cell_volume) ** (1 / p)
            errs["lp_norm"] = max(errs.get("lp_norm", 0), abs(lp_norm(f, p) - brute) / brute)

        lat = DyadicLattice(g)
        w = parse_weight("power:0.4", g)
        a = np.abs(f.values)
        cube_err, max_err = 0.0, 0.0
        hl = np.zeros(g.shape)
        frac = np.zeros(g.shape)
        ap_brute = 1.0
        for level in range(lat.max_level + 1):
            for sl in _brute_cubes(g.shape, level):
                for op, fn in (("sum", np.sum), ("max", np.max), ("min", np.min)):
                    idx = tuple(s.start // (N >> level) for s in sl)
                    cube_err = max(cube_err, abs(lat.reduce(f.values, level, op)[idx] - fn(f.values[sl])))
                avg = a[sl].mean()
                hl[sl] = np.maximum(hl[sl], avg)
                frac[sl] = np.maximum(frac[sl], lat.cube_measure(level) ** (0.5 / g.n) * avg)
                ap_brute = max(ap_brute, w.values[sl].mean() * np.mean(w.values[sl] ** -1.0))
        errs["cube scans"] = max(errs.get("cube scans", 0), cube_err, abs(ap_constant(w, 2.0, lat) - ap_brute) / ap_brute)
        max_err = max(
            float(np.max(np.abs(hl_maximal(f, lat).values - hl))),
            float(np.max(np.abs(fractional_maximal(f, 0.5, lat).values - frac))),
        )
        if g.n == 1:
            bank = build_filter_bank(g)
            phi = bank.psi0.values
            k = np.arange(N)
            kc = np.where(k > N // 2, k - N, k)
            grand = np.zeros(N)
            for m in range(bank.j_max + 1):
                kern = np.array([phi[c * 2**m % N] if -(N // 2) < c * 2**m <= N // 2 else 0.0 for c in kc]) * 2.0**m
                conv = np.array([sum(kern[(x - y) % N] * f.values[y] for y in range(N)) for x in range(N)]) / N
                grand = np.maximum(grand, np.abs(conv))
            max_err = max(max_err, float(np.max(np.abs(grand_maximal(f, bank=bank).values - grand))))
        errs["maximal functions"] = max(errs.get("maximal functions", 0), max_err)
    ok = max(errs.values()) <= 1e-10
    report(10, "brute-force oracles", ok, ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + " (<=1e-10)")


def _run_all(d: Path):
    base = ["--Ng", "256", "--seed", "5"]
    calls = [
        ["fixture", *base, "--kind", "mixed:5", "--out", str(d / "f.hlgf")],
        ["decompose", "--input", str(d / "f.hlgf"), "--weight", "power:0.5", "--N", "4", "--out", str(d / "dec.json")],
        ["verify", "--dec", str(d / "dec.json"), "--input", str(d / "f.hlgf"), "--out", str(d / "cert.json")],
        ["filters", *base, "--out", str(d / "manifest.json")],
        ["weights", *base, "--weight", "power:0.5", "--out", str(d / "weights.json")],
        ["calibrate", *base, "--out", str(d / "calibration.json")],
        ["energy", "--input", str(d / "f.hlgf"), "--out", str(d / "energy.csv")],
        [
            "opbench", *base, "--op", "damped-riesz:delta=1,eps=1", "--source", "hpw:p=1",
            "--target", "lpw:p=1", "--family", "molecules:6", "--out", str(d / "bench"),
        ],
    ]
    codes = [main(c) for c in calls]
    files = {str(p.relative_to(d)): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}
    return codes, files


def test_cli_determinism(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    codes_a, files_a = _run_all(tmp_path / "a")
    codes_b, files_b = _run_all(tmp_path / "b")
    same = files_a.keys() == files_b.keys() and all(files_a[k] == files_b[k] for k in files_a)
    ok = codes_a == codes_b == [0] * len(codes_a) and same
    report(11, "CLI determinism", ok, f"{len(codes_a)} commands, {len(files_a)} files byte-identical: {same}")
