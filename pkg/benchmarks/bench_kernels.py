"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel runs on the same inputs under both backends; the table reports
the best wall time per call, the speed-up, and the largest disagreement.
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from whardy._kernels import c_backend, py_backend


def cases(rng: np.random.Generator):
    v1 = rng.random(4096)
    v2 = rng.random((256, 256))
    kern = rng.standard_normal(1024)
    kern2 = rng.standard_normal((64, 64))
    return [
        ("cube_reduce 1D sum", "cube_reduce", (v1, 6, "sum")),
        ("cube_reduce 2D max", "cube_reduce", (v2, 5, "max")),
        ("expand_cubes 2D", "expand_cubes", (rng.random((32, 32)), 256)),
        ("dyadic_maximal 1D", "dyadic_maximal", (v1, 10)),
        ("dyadic_maximal 2D", "dyadic_maximal", (v2, 6)),
        ("pair_smoothness 1D", "pair_smoothness", (kern, 1 / 1024, 8, 1.0)),
        ("pair_smoothness 2D", "pair_smoothness", (kern2, 1 / 64, 2, 1.0)),
    ]


def _diff(a, b) -> float:
    if isinstance(a, tuple):
        return abs(a[0] - b[0]) / max(abs(a[0]), 1e-300)
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def run(repeat: int = 5, seed: int = 0) -> list[dict]:
    if c_backend is None:
        raise SystemExit("compiled backend not built; reinstall with Cython available")
    rows = []
    for label, name, args in cases(np.random.default_rng(seed)):
        py_fn, c_fn = getattr(py_backend, name), getattr(c_backend, name)
        number = 3
        t_py = min(timeit.repeat(lambda: py_fn(*args), number=number, repeat=repeat)) / number
        t_c = min(timeit.repeat(lambda: c_fn(*args), number=number, repeat=repeat)) / number
        rows.append(
            {
                "kernel": label,
                "numpy_s": t_py,
                "cython_s": t_c,
                "speedup": t_py / t_c,
                "max_abs_diff": _diff(py_fn(*args), c_fn(*args)),
            }
        )
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    rows = run(args.repeat, args.seed)
    print(f"{'kernel':<22}{'numpy [ms]':>12}{'cython [ms]':>13}{'speed-up':>10}{'max diff':>11}")
    for r in rows:
        print(
            f"{r['kernel']:<22}{1e3 * r['numpy_s']:>12.3f}{1e3 * r['cython_s']:>13.3f}"
            f"{r['speedup']:>10.2f}{r['max_abs_diff']:>11.1e}"
        )
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
