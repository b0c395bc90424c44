import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from whardy._kernels import BACKEND_NAME, c_backend, py_backend

needs_c = pytest.mark.skipif(c_backend is None, reason="compiled backend not built")


def test_backend_name_matches_selection():
    assert BACKEND_NAME == ("cython" if c_backend is not None else "numpy")


def test_pure_python_switch():
    env = {**os.environ, "WHARDY_PURE_PYTHON": "1"}
    code = "import whardy; print(whardy.BACKEND_NAME)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


@needs_c
@given(st.integers(0, 2**31 - 1), st.sampled_from([1, 2]), st.sampled_from(["sum", "max", "min"]))
def test_cube_reduce_parity(seed, ndim, op):
    rng = np.random.default_rng(seed)
    side = 64 if ndim == 1 else 32
    v = rng.standard_normal((side,) * ndim)
    for level in range(0, 6):
        a, b = py_backend.cube_reduce(v, level, op), c_backend.cube_reduce(v, level, op)
        np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-12)


@needs_c
def test_cube_reduce_errors():
    for be in (py_backend, c_backend):
        with pytest.raises(ValueError):
            be.cube_reduce(np.zeros(8), 4, "sum")
        with pytest.raises(KeyError):
            be.cube_reduce(np.zeros(8), 1, "median")


@needs_c
@given(st.integers(0, 2**31 - 1), st.sampled_from([1, 2]), st.integers(0, 5))
def test_expand_parity(seed, ndim, level):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((2**level,) * ndim)
    assert np.array_equal(py_backend.expand_cubes(c, 32), c_backend.expand_cubes(c, 32))


@needs_c
@given(st.integers(0, 2**31 - 1), st.sampled_from([1, 2]), st.booleans())
def test_dyadic_maximal_parity(seed, ndim, weighted):
    rng = np.random.default_rng(seed)
    side = 128 if ndim == 1 else 32
    v = rng.random((side,) * ndim)
    top = int(np.log2(side))
    fac = rng.random(top + 1) + 0.5 if weighted else None
    a = py_backend.dyadic_maximal(v, top, fac, 1)
    b = c_backend.dyadic_maximal(v, top, fac, 1)
    np.testing.assert_allclose(b, a, rtol=1e-12)


@needs_c
@pytest.mark.parametrize("ndim,side,stride", [(1, 256, 4), (2, 32, 2)])
def test_pair_smoothness_parity(ndim, side, stride, rng):
    k = rng.standard_normal((side,) * ndim)
    a = py_backend.pair_smoothness(k, 1 / side, stride, 0.5)
    b = c_backend.pair_smoothness(k, 1 / side, stride, 0.5)
    assert b[0] == pytest.approx(a[0], rel=1e-12)
    assert b[1:] == a[1:]
