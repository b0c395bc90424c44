"""Numpy implementations of the per-cube kernels.

These are the reference semantics for the compiled twins in
``_ckernels.pyx``; both must agree to rounding.
"""

from __future__ import annotations

import numpy as np

_REDUCERS = {"sum": np.sum, "max": np.max, "min": np.min}


def cube_reduce(values: np.ndarray, level: int, op: str) -> np.ndarray:
    """Reduce ``values`` over every dyadic cube of the given level.

    Returns an array of shape ``(2**level,) * ndim`` holding the sum, max or
    min of the samples inside each cube.
    """
    values = np.asarray(values, dtype=float)
    n_side = values.shape[0]
    m = 1 << level
    if m > n_side:
        raise ValueError(f"level {level} is finer than the grid ({n_side} samples)")
    s = n_side // m
    red = _REDUCERS[op]
    if values.ndim == 1:
        return red(values.reshape(m, s), axis=1)
    if values.ndim == 2:
        return red(values.reshape(m, s, m, s), axis=(1, 3))
    raise ValueError("only 1D and 2D grids are supported")


def expand_cubes(cube_values: np.ndarray, n_side: int) -> np.ndarray:
    """Broadcast per-cube values back onto the sample grid."""
    m = cube_values.shape[0]
    s = n_side // m
    out = cube_values
    for axis in range(cube_values.ndim):
        out = np.repeat(out, s, axis=axis)
    return out


def dyadic_maximal(
    values: np.ndarray,
    max_level: int,
    level_factors: np.ndarray | None = None,
    min_level: int = 0,
) -> np.ndarray:
    """Max over dyadic levels of ``factor[level] * cube average`` at each sample."""
    values = np.asarray(values, dtype=float)
    n_side = values.shape[0]
    out = np.zeros_like(values)
    for level in range(min_level, max_level + 1):
        m = 1 << level
        cells = (n_side // m) ** values.ndim
        avg = cube_reduce(values, level, "sum") / cells
        if level_factors is not None:
            avg = avg * level_factors[level]
        np.maximum(out, expand_cubes(avg, n_side), out=out)
    return out


def pair_smoothness(
    kernel: np.ndarray, spacing: float, stride: int, eps: float
) -> tuple[float, int, int]:
    """Largest Hoelder quotient of a convolution kernel over strided sample pairs.

    Scans pairs ``(z, z')`` of nonzero strided samples (coordinates taken in
    the centred fundamental domain) with ``|z - z'| <= |z| / 2`` and returns
    ``(max |K(z) - K(z')| |z|^(n+eps) / |z - z'|^eps, flat index z, flat index z')``.
    """
    kernel = np.asarray(kernel, dtype=float)
    n = kernel.ndim
    n_side = kernel.shape[0]
    idx = np.arange(0, n_side, stride)
    centred = np.where(idx > n_side // 2, idx - n_side, idx) * spacing
    if n == 1:
        pts = centred[:, None]
        vals = kernel[idx]
        flat = idx
    else:
        g0, g1 = np.meshgrid(centred, centred, indexing="ij")
        pts = np.stack([g0.ravel(), g1.ravel()], axis=1)
        vals = kernel[np.ix_(idx, idx)].ravel()
        i0, i1 = np.meshgrid(idx, idx, indexing="ij")
        flat = (i0 * n_side + i1).ravel()
    rz = np.sqrt((pts**2).sum(axis=1))
    keep = rz > 0
    pts, vals, rz, flat = pts[keep], vals[keep], rz[keep], flat[keep]
    best, bi, bj = 0.0, -1, -1
    # row blocks bound the temporary pair matrix
    block = max(1, 4_000_000 // max(len(rz), 1))
    for start in range(0, len(rz), block):
        sl = slice(start, start + block)
        d = np.sqrt(((pts[sl, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
        ok = (d <= 0.5 * rz[sl, None]) & (d > 0)
        if not ok.any():
            continue
        num = np.abs(vals[sl, None] - vals[None, :]) * rz[sl, None] ** (n + eps)
        q = np.where(ok, num / np.where(ok, d, 1.0) ** eps, 0.0)
        k = int(np.argmax(q))
        r, c = divmod(k, q.shape[1])
        if q[r, c] > best:
            best, bi, bj = float(q[r, c]), int(flat[start + r]), int(flat[c])
    return best, bi, bj
