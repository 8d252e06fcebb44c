# cython: language_level=3
"""Compiled kernels. Mirrors ``_fallback`` exactly, including float summation order."""
import numpy as np
cimport numpy as cnp
from cython cimport floating

cnp.import_array()


def demosaic_inpixel(data, offs):
    cdef const cnp.uint16_t[:, ::1] d = np.ascontiguousarray(data, dtype=np.uint16)
    cdef cnp.int64_t[:, ::1] o = np.ascontiguousarray(offs, dtype=np.int64)
    cdef Py_ssize_t X = d.shape[0] // 2, Y = d.shape[1] // 2, i, j, ti, tj
    out = np.empty((3, X, Y), dtype=np.uint16)
    cdef cnp.uint16_t[:, :, ::1] r = out
    cdef Py_ssize_t ry = o[0, 0], rx = o[0, 1], g1y = o[1, 0], g1x = o[1, 1]
    cdef Py_ssize_t g2y = o[2, 0], g2x = o[2, 1], by = o[3, 0], bx = o[3, 1]
    cdef cnp.uint32_t g
    with nogil:
        for i in range(X):
            ti = 2 * i
            for j in range(Y):
                tj = 2 * j
                r[0, i, j] = d[ti + ry, tj + rx]
                g = <cnp.uint32_t>d[ti + g1y, tj + g1x] + <cnp.uint32_t>d[ti + g2y, tj + g2x]
                r[1, i, j] = <cnp.uint16_t>(g >> 1)
                r[2, i, j] = d[ti + by, tj + bx]
    return out


cdef inline Py_ssize_t _reflect(Py_ssize_t i, Py_ssize_t n) nogil:
    if i < 0:
        i = -i
    if i >= n:
        i = 2 * n - 2 - i
    return i


def demosaic_bilinear(data, nbr_dy, nbr_dx, nbr_n):
    cdef const cnp.uint16_t[:, ::1] d = np.ascontiguousarray(data, dtype=np.uint16)
    cdef cnp.int64_t[:, :, :, ::1] dy = np.ascontiguousarray(nbr_dy, dtype=np.int64)
    cdef cnp.int64_t[:, :, :, ::1] dx = np.ascontiguousarray(nbr_dx, dtype=np.int64)
    cdef cnp.int64_t[:, :, ::1] nn = np.ascontiguousarray(nbr_n, dtype=np.int64)
    cdef Py_ssize_t h = d.shape[0], w = d.shape[1], i, j, k, t, n, py, px
    cdef cnp.uint32_t acc
    out = np.empty((3, h, w), dtype=np.uint16)
    cdef cnp.uint16_t[:, :, ::1] r = out
    with nogil:
        for i in range(h):
            py = i & 1
            for j in range(w):
                px = j & 1
                for k in range(3):
                    n = nn[py, px, k]
                    if n == 0:
                        r[k, i, j] = d[i, j]
                        continue
                    acc = 0
                    for t in range(n):
                        acc = acc + d[_reflect(i + dy[py, px, k, t], h), _reflect(j + dx[py, px, k, t], w)]
                    r[k, i, j] = <cnp.uint16_t>((acc + n // 2) // n)
    return out


def conv2d(x, w, bias, Py_ssize_t stride, Py_ssize_t pad):
    cdef const double[:, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, :, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(bias, dtype=np.float64)
    cdef Py_ssize_t C = xv.shape[0], H = xv.shape[1], W = xv.shape[2]
    cdef Py_ssize_t O = wv.shape[0], KH = wv.shape[2], KW = wv.shape[3]
    cdef Py_ssize_t HO = (H + 2 * pad - KH) // stride + 1
    cdef Py_ssize_t WO = (W + 2 * pad - KW) // stride + 1
    cdef Py_ssize_t o, c, ky, kx, oy, ox, iy, ix
    cdef double acc
    out = np.empty((O, HO, WO), dtype=np.float64)
    cdef double[:, :, ::1] r = out
    with nogil:
        for o in range(O):
            for oy in range(HO):
                for ox in range(WO):
                    acc = 0.0
                    for c in range(C):
                        for ky in range(KH):
                            iy = oy * stride + ky - pad
                            if iy < 0 or iy >= H:
                                continue
                            for kx in range(KW):
                                ix = ox * stride + kx - pad
                                if ix < 0 or ix >= W:
                                    continue
                                acc = acc + wv[o, c, ky, kx] * xv[c, iy, ix]
                    r[o, oy, ox] = acc + bv[o]
    return out


def _im2col3(const floating[:, :, :, ::1] x, floating[:, :, :, :, ::1] cols):
    cdef Py_ssize_t N = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3]
    cdef Py_ssize_t n, y, xx, c, ky, kx, iy, ix, tap
    with nogil:
        for n in range(N):
            for y in range(H):
                for xx in range(W):
                    for ky in range(3):
                        iy = y + ky - 1
                        for kx in range(3):
                            ix = xx + kx - 1
                            tap = ky * 3 + kx
                            if iy < 0 or iy >= H or ix < 0 or ix >= W:
                                for c in range(C):
                                    cols[n, y, xx, tap, c] = 0
                            else:
                                for c in range(C):
                                    cols[n, y, xx, tap, c] = x[n, iy, ix, c]


def _tapsum3(const floating[:, :, :, :, ::1] sp, floating[:, :, :, ::1] out):
    cdef Py_ssize_t N = sp.shape[0], H = sp.shape[1], W = sp.shape[2], C = sp.shape[4]
    cdef Py_ssize_t n, y, xx, c, ky, kx, iy, ix, tap
    with nogil:
        for n in range(N):
            for y in range(H):
                for xx in range(W):
                    for ky in range(3):
                        iy = y + ky - 1
                        if iy < 0 or iy >= H:
                            continue
                        for kx in range(3):
                            ix = xx + kx - 1
                            if ix < 0 or ix >= W:
                                continue
                            tap = ky * 3 + kx
                            for c in range(C):
                                out[n, y, xx, c] += sp[n, iy, ix, tap, c]


def im2col3(x):
    x = np.ascontiguousarray(x)
    n, h, w, c = x.shape
    cols = np.empty((n, h, w, 9, c), dtype=x.dtype)
    _im2col3(x, cols)
    return cols


def tapsum3(spread):
    spread = np.ascontiguousarray(spread)
    n, h, w, _, c = spread.shape
    out = np.zeros((n, h, w, c), dtype=spread.dtype)
    _tapsum3(spread, out)
    return out
