"""Pure-numpy kernels. Same signatures and results as the compiled ``_kernels``.

Floating-point kernels accumulate in the same order as the compiled ones
(channel-major, then kernel row-major, bias last), so both backends agree
bit for bit.
"""
import numpy as np


def demosaic_inpixel(data, offs):
    """Per 2x2 tile: R copy, (G1 + G2) >> 1, B copy.

    ``offs`` is an int array (4, 2) of (row, col) tile offsets for R, G1, G2, B.
    """
    data = np.asarray(data, dtype=np.uint16)
    (ry, rx), (g1y, g1x), (g2y, g2x), (by, bx) = np.asarray(offs)
    out = np.empty((3, data.shape[0] // 2, data.shape[1] // 2), dtype=np.uint16)
    out[0] = data[ry::2, rx::2]
    g = data[g1y::2, g1x::2].astype(np.uint32) + data[g2y::2, g2x::2]
    out[1] = g >> 1
    out[2] = data[by::2, bx::2]
    return out


def _reflect(idx, n):
    idx = np.where(idx < 0, -idx, idx)
    return np.where(idx >= n, 2 * n - 2 - idx, idx)


def demosaic_bilinear(data, nbr_dy, nbr_dx, nbr_n):
    """Bilinear demosaic driven by per-parity neighbor tables.

    ``nbr_n[py, px, k]`` is 0 where color ``k`` is sampled at that parity,
    otherwise the number of same-color neighbors whose offsets are in
    ``nbr_dy/nbr_dx[py, px, k, :n]``. Out-of-frame neighbors reflect about
    the border pixel, which keeps CFA parity.
    """
    data = np.asarray(data, dtype=np.uint16)
    h, w = data.shape
    out = np.empty((3, h, w), dtype=np.uint16)
    for py in range(2):
        for px in range(2):
            ys = np.arange(py, h, 2)[:, None]
            xs = np.arange(px, w, 2)[None, :]
            for k in range(3):
                n = int(nbr_n[py, px, k])
                if n == 0:
                    out[k, py::2, px::2] = data[py::2, px::2]
                    continue
                acc = np.zeros((ys.shape[0], xs.shape[1]), dtype=np.uint32)
                for t in range(n):
                    yy = _reflect(ys + int(nbr_dy[py, px, k, t]), h)
                    xx = _reflect(xs + int(nbr_dx[py, px, k, t]), w)
                    acc += data[yy, xx]
                out[k, py::2, px::2] = (acc + n // 2) // n
    return out


def conv2d(x, w, bias, stride, pad):
    """Cross-correlation of (C, H, W) with (O, C, kh, kw), zero padding."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    c_in, h, wd = x.shape
    c_out, _, kh, kw = w.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    xp = np.zeros((c_in, h + 2 * pad, wd + 2 * pad))
    xp[:, pad : pad + h, pad : pad + wd] = x
    acc = np.zeros((c_out, ho, wo))
    for c in range(c_in):
        for ky in range(kh):
            for kx in range(kw):
                patch = xp[c, ky : ky + stride * (ho - 1) + 1 : stride, kx : kx + stride * (wo - 1) + 1 : stride]
                acc += w[:, c, ky, kx, None, None] * patch[None]
    return acc + bias[:, None, None]


def im2col3(x):
    """(N, H, W, C) -> (N, H, W, 9, C): 3x3 neighborhoods, zero padded, tap = ky*3 + kx."""
    n, h, w, c = x.shape
    xp = np.zeros((n, h + 2, w + 2, c), dtype=x.dtype)
    xp[:, 1:-1, 1:-1] = x
    cols = np.empty((n, h, w, 9, c), dtype=x.dtype)
    for ky in range(3):
        for kx in range(3):
            cols[:, :, :, ky * 3 + kx] = xp[:, ky : ky + h, kx : kx + w]
    return cols


def tapsum3(spread):
    """(N, H, W, 9, C) -> (N, H, W, C): ``out[p] = sum_tap spread[p + off(tap), tap]``.

    Taps are added in order 0..8; out-of-frame taps are skipped.
    """
    n, h, w, _, c = spread.shape
    out = np.zeros((n, h, w, c), dtype=spread.dtype)
    for ky in range(3):
        dy = ky - 1
        ylo, yhi = max(0, -dy), min(h, h - dy)
        for kx in range(3):
            dx = kx - 1
            xlo, xhi = max(0, -dx), min(w, w - dx)
            out[:, ylo:yhi, xlo:xhi] += spread[:, ylo + dy : yhi + dy, xlo + dx : xhi + dx, ky * 3 + kx]
    return out
