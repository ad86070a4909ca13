# cython: language_level=3
"""Compiled mirrors of the fallback kernels.

_fallback.py is the reference: every function here must return byte-identical
arrays. Float expressions are written with the same association order, the
build disables FP contraction, and trig values arrive precomputed, so there
is no room for drift.
"""

from libc.math cimport floor

import numpy as np


cdef inline unsigned int _hash2d(unsigned int x, unsigned int y, unsigned int seed) nogil:
    cdef unsigned int h = (x * <unsigned int>0x9E3779B1) ^ (y * <unsigned int>0x85EBCA77) ^ seed
    h ^= h >> 16
    h *= <unsigned int>0x7FEB352D
    h ^= h >> 15
    h *= <unsigned int>0x846CA68B
    h ^= h >> 16
    return h


def value_noise(int w, int h, object seed, int base, int amplitude):
    cdef unsigned int s32 = <unsigned int>(seed & 0xFFFFFFFF)
    cdef int cell = 16
    cdef int gw = w // cell + 2
    cdef int gh = h // cell + 2
    cdef unsigned int span = <unsigned int>(2 * amplitude + 1)
    cdef int lo = base - amplitude

    grid_arr = np.empty((gh, gw), dtype=np.int64)
    cdef long long[:, ::1] grid = grid_arr
    out_arr = np.empty((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr

    cdef int x, y, gx, gy, cx0, cy0, fx, fy
    cdef long long v
    with nogil:
        for gy in range(gh):
            for gx in range(gw):
                grid[gy, gx] = <long long>(_hash2d(<unsigned int>gx, <unsigned int>gy, s32) % span) + lo
        for y in range(h):
            cy0 = y // cell
            fy = y - cy0 * cell
            for x in range(w):
                cx0 = x // cell
                fx = x - cx0 * cell
                v = (grid[cy0, cx0] * (cell - fx) * (cell - fy)
                     + grid[cy0, cx0 + 1] * fx * (cell - fy)
                     + grid[cy0 + 1, cx0] * (cell - fx) * fy
                     + grid[cy0 + 1, cx0 + 1] * fx * fy
                     + 128) >> 8
                out[y, x] = <unsigned char>v
    return out_arr


def resize_bilinear(const unsigned char[:, :, ::1] src, int out_w, int out_h):
    cdef int src_h = src.shape[0]
    cdef int src_w = src.shape[1]
    cdef double scale_x = (<double>src_w) / (<double>out_w)
    cdef double scale_y = (<double>src_h) / (<double>out_h)

    out_arr = np.empty((out_h, out_w, 3), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] out = out_arr
    x0_a = np.empty(out_w, dtype=np.int64)
    fx_a = np.empty(out_w, dtype=np.float64)
    y0_a = np.empty(out_h, dtype=np.int64)
    fy_a = np.empty(out_h, dtype=np.float64)
    cdef long long[::1] x0 = x0_a
    cdef double[::1] fx = fx_a
    cdef long long[::1] y0 = y0_a
    cdef double[::1] fy = fy_a

    cdef int i, x, y, c
    cdef long long xi, yi, x1, y1
    cdef double s, f, p00, p01, p10, p11, top, bot, val
    with nogil:
        for i in range(out_w):
            s = (i + 0.5) * scale_x - 0.5
            if s < 0.0:
                s = 0.0
            elif s > src_w - 1:
                s = src_w - 1
            if src_w == 1:
                x0[i] = 0
                fx[i] = 0.0
            else:
                xi = <long long>floor(s)
                if xi > src_w - 2:
                    xi = src_w - 2
                x0[i] = xi
                fx[i] = s - xi
        for i in range(out_h):
            s = (i + 0.5) * scale_y - 0.5
            if s < 0.0:
                s = 0.0
            elif s > src_h - 1:
                s = src_h - 1
            if src_h == 1:
                y0[i] = 0
                fy[i] = 0.0
            else:
                yi = <long long>floor(s)
                if yi > src_h - 2:
                    yi = src_h - 2
                y0[i] = yi
                fy[i] = s - yi
        for y in range(out_h):
            yi = y0[y]
            y1 = yi + 1
            if y1 > src_h - 1:
                y1 = src_h - 1
            for x in range(out_w):
                xi = x0[x]
                x1 = xi + 1
                if x1 > src_w - 1:
                    x1 = src_w - 1
                for c in range(3):
                    p00 = src[yi, xi, c]
                    p01 = src[yi, x1, c]
                    p10 = src[y1, xi, c]
                    p11 = src[y1, x1, c]
                    f = fx[x]
                    top = p00 * (1.0 - f) + p01 * f
                    bot = p10 * (1.0 - f) + p11 * f
                    val = top * (1.0 - fy[y]) + bot * fy[y]
                    out[y, x, c] = <unsigned char>floor(val + 0.5)
    return out_arr


def rotate_bilinear(const unsigned char[:, :, ::1] src, double cos_t, double sin_t):
    cdef int h = src.shape[0]
    cdef int w = src.shape[1]
    cdef double cx = (w - 1) / 2.0
    cdef double cy = (h - 1) / 2.0

    out_arr = np.empty((h, w, 3), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] out = out_arr

    cdef int x, y, c
    cdef long long xi, yi, x1, y1
    cdef double dxv, dyv, sx, sy, fxv, fyv
    cdef double p00, p01, p10, p11, top, bot, val
    with nogil:
        for y in range(h):
            dyv = y - cy
            for x in range(w):
                dxv = x - cx
                sx = cx + cos_t * dxv + sin_t * dyv
                if sx < 0.0:
                    sx = 0.0
                elif sx > w - 1:
                    sx = w - 1
                sy = cy - sin_t * dxv + cos_t * dyv
                if sy < 0.0:
                    sy = 0.0
                elif sy > h - 1:
                    sy = h - 1
                if w == 1:
                    xi = 0
                    fxv = 0.0
                else:
                    xi = <long long>floor(sx)
                    if xi > w - 2:
                        xi = w - 2
                    fxv = sx - xi
                if h == 1:
                    yi = 0
                    fyv = 0.0
                else:
                    yi = <long long>floor(sy)
                    if yi > h - 2:
                        yi = h - 2
                    fyv = sy - yi
                x1 = xi + 1
                if x1 > w - 1:
                    x1 = w - 1
                y1 = yi + 1
                if y1 > h - 1:
                    y1 = h - 1
                for c in range(3):
                    p00 = src[yi, xi, c]
                    p01 = src[yi, x1, c]
                    p10 = src[y1, xi, c]
                    p11 = src[y1, x1, c]
                    top = p00 * (1.0 - fxv) + p01 * fxv
                    bot = p10 * (1.0 - fxv) + p11 * fxv
                    val = top * (1.0 - fyv) + bot * fyv
                    out[y, x, c] = <unsigned char>floor(val + 0.5)
    return out_arr
