"""NumPy implementations of the pixel kernels.

These define the reference semantics; the compiled `_core` extension must
produce byte-identical output for every input. Keep arithmetic order and
rounding in the two files in lockstep:

- interpolation runs in float64, rounded with floor(v + 0.5) (half-up);
- sample coordinates use the half-pixel convention, clamped to the image
  (edge replication), so resizing to the source size is the identity;
- the procedural noise is integer-only (uint32 hashing, fixed-point
  bilinear), which makes cross-implementation equality trivial.

Trig for rotation is computed once by the caller and passed in as doubles,
so libm differences can never leak into pixel values.
"""

from __future__ import annotations

import numpy as np

_H1 = np.uint32(0x9E3779B1)
_H2 = np.uint32(0x85EBCA77)
_M1 = np.uint32(0x7FEB352D)
_M2 = np.uint32(0x846CA68B)


def hash2d_grid(x0: int, y0: int, w: int, h: int, seed: int) -> np.ndarray:
    """uint32 hash of every (x, y) in the rect [x0, x0+w) x [y0, y0+h)."""
    xs = (np.arange(x0, x0 + w, dtype=np.uint32) * _H1)[None, :]
    ys = (np.arange(y0, y0 + h, dtype=np.uint32) * _H2)[:, None]
    v = xs ^ ys ^ np.uint32(seed & 0xFFFFFFFF)
    v ^= v >> np.uint32(16)
    v *= _M1
    v ^= v >> np.uint32(15)
    v *= _M2
    v ^= v >> np.uint32(16)
    return v


def value_noise(w: int, h: int, seed: int, base: int, amplitude: int) -> np.ndarray:
    """Smooth single-channel noise in [base-amplitude, base+amplitude], uint8.

    Coarse 16px lattice of hashed levels, upsampled with fixed-point bilinear
    interpolation (cell is a power of two, so weights are exact).
    """
    cell = 16
    gw = w // cell + 2
    gh = h // cell + 2
    span = np.int64(2 * amplitude + 1)
    grid = (hash2d_grid(0, 0, gw, gh, seed).astype(np.int64) % span) + (base - amplitude)

    xs = np.arange(w, dtype=np.int64)
    ys = np.arange(h, dtype=np.int64)
    gx, fx = xs // cell, xs % cell
    gy, fy = ys // cell, ys % cell
    fx = fx[None, :]
    fy = fy[:, None]
    g00 = grid[gy[:, None], gx[None, :]]
    g10 = grid[gy[:, None], gx[None, :] + 1]
    g01 = grid[gy[:, None] + 1, gx[None, :]]
    g11 = grid[gy[:, None] + 1, gx[None, :] + 1]
    v = (
        g00 * (cell - fx) * (cell - fy)
        + g10 * fx * (cell - fy)
        + g01 * (cell - fx) * fy
        + g11 * fx * fy
        + 128
    ) >> 8
    return v.astype(np.uint8)


def _source_axis(out_n: int, src_n: int) -> tuple[np.ndarray, np.ndarray]:
    """Clamped source coordinates for one axis: integer base + fraction."""
    scale = src_n / out_n
    s = (np.arange(out_n, dtype=np.float64) + 0.5) * scale - 0.5
    s = np.clip(s, 0.0, float(src_n - 1))
    if src_n == 1:
        i0 = np.zeros(out_n, dtype=np.int64)
        f = np.zeros(out_n, dtype=np.float64)
    else:
        i0 = np.minimum(np.floor(s).astype(np.int64), src_n - 2)
        f = s - i0
    return i0, f


def resize_bilinear(src: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    src_h, src_w = src.shape[0], src.shape[1]
    x0, fx = _source_axis(out_w, src_w)
    y0, fy = _source_axis(out_h, src_h)
    x1 = np.minimum(x0 + 1, src_w - 1)
    y1 = np.minimum(y0 + 1, src_h - 1)

    s = src.astype(np.float64)
    p00 = s[y0[:, None], x0[None, :]]
    p01 = s[y0[:, None], x1[None, :]]
    p10 = s[y1[:, None], x0[None, :]]
    p11 = s[y1[:, None], x1[None, :]]
    fxc = fx[None, :, None]
    fyc = fy[:, None, None]
    top = p00 * (1.0 - fxc) + p01 * fxc
    bot = p10 * (1.0 - fxc) + p11 * fxc
    val = top * (1.0 - fyc) + bot * fyc
    return np.floor(val + 0.5).astype(np.uint8)


def rotate_bilinear(src: np.ndarray, cos_t: float, sin_t: float) -> np.ndarray:
    """Rotate about the image center, same output size, edge-replicated fill.

    cos_t/sin_t are the forward rotation angle; the kernel applies the
    inverse map to destination coordinates.
    """
    h, w = src.shape[0], src.shape[1]
    cx = (w - 1) / 2.0
    cy = (h - 1) / 2.0
    dx = np.arange(w, dtype=np.float64)[None, :] - cx
    dy = np.arange(h, dtype=np.float64)[:, None] - cy
    sx = np.clip(cx + cos_t * dx + sin_t * dy, 0.0, float(w - 1))
    sy = np.clip(cy - sin_t * dx + cos_t * dy, 0.0, float(h - 1))

    if w == 1:
        x0 = np.zeros_like(sx, dtype=np.int64)
        fx = np.zeros_like(sx)
    else:
        x0 = np.minimum(np.floor(sx).astype(np.int64), w - 2)
        fx = sx - x0
    if h == 1:
        y0 = np.zeros_like(sy, dtype=np.int64)
        fy = np.zeros_like(sy)
    else:
        y0 = np.minimum(np.floor(sy).astype(np.int64), h - 2)
        fy = sy - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)

    s = src.astype(np.float64)
    p00 = s[y0, x0]
    p01 = s[y0, x1]
    p10 = s[y1, x0]
    p11 = s[y1, x1]
    fxc = fx[..., None]
    fyc = fy[..., None]
    top = p00 * (1.0 - fxc) + p01 * fxc
    bot = p10 * (1.0 - fxc) + p11 * fxc
    val = top * (1.0 - fyc) + bot * fyc
    return np.floor(val + 0.5).astype(np.uint8)
