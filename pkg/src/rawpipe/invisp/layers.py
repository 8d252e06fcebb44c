"""Flow building blocks with explicit backward passes.

Tensors are ``(N, C, H, W)`` arrays. Parameters live in a flat ``dict``
keyed by dotted names; every ``*_backward`` function accumulates parameter
gradients into a ``grads`` dict with the same keys and returns the gradient
with respect to its input.

Affine coupling on ``m = (m1, m2)`` split at channel ``d``::

    n1 = m1 + r(m2)
    n2 = m2 * exp(s^(n1)) + t(n1)

with ``s^(u) = alpha * tanh(s(u) / alpha)``. Conditioning ``s`` and ``t`` on
the updated half ``n1`` makes the inverse exact::

    m2 = (n2 - t(n1)) * exp(-s^(n1))
    m1 = n1 - r(m2)
"""
from __future__ import annotations

import numpy as np

from .._backend import kernels
from ..errors import DimensionError, SingularityError

DET_FLOOR = 1e-12
INVERSE_TOL = 1e-10


def squeeze(x, q: int):
    """Space-to-channel: (N, C, H, W) -> (N, C*q*q, H/q, W/q).

    Output channel ``c*q*q + dy*q + dx`` holds input channel ``c`` at
    sub-position ``(dy, dx)`` of each q-by-q cell.
    """
    n, c, h, w = x.shape
    if h % q or w % q:
        raise DimensionError(f"squeeze factor {q} does not divide {h}x{w}")
    if q == 1:
        return x
    x = x.reshape(n, c, h // q, q, w // q, q).transpose(0, 1, 3, 5, 2, 4)
    return x.reshape(n, c * q * q, h // q, w // q)


def unsqueeze(x, q: int):
    n, cq, h, w = x.shape
    if cq % (q * q):
        raise DimensionError(f"{cq} channels not divisible by {q * q}")
    if q == 1:
        return x
    c = cq // (q * q)
    x = x.reshape(n, c, q, q, h, w).transpose(0, 1, 4, 2, 5, 3)
    return x.reshape(n, c, h * q, w * q)


# ---- 3x3 convolution (NHWC inside subnets) ---------------------------------
#
# Weights w[o, c, ky, kx]; tap index ky*3 + kx; tap offset (ky-1, kx-1).
# Two gather-only primitives cover every pass:
#   im2col3(x)[p, tap, c] = x[p + off(tap), c]
#   tapsum3(P)[p, c]      = sum_tap P[p + off(tap), tap, c]
# A product is formed on whichever side has fewer channels.


def _w_gather(w):
    """(9*cin, cout): row tap*cin + c."""
    return w.transpose(2, 3, 1, 0).reshape(-1, w.shape[0])


def _w_spread(w):
    """(cin, 9*cout): column tap*cout + o."""
    return w.transpose(1, 2, 3, 0).reshape(w.shape[1], -1)


def _w_flip(w):
    """Kernel of the adjoint correlation: swap in/out, rotate taps 180 degrees."""
    return w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)


def conv3x3_forward(x, w, b):
    """Zero-padded 3x3 cross-correlation on (N, H, W, C). Returns (y, cache)."""
    n, h, wd, cin = x.shape
    cout = w.shape[0]
    if cin <= cout:
        cols = kernels.im2col3(x)
        y = cols.reshape(-1, 9 * cin) @ _w_gather(w)
        y = y.reshape(n, h, wd, cout)
    else:
        cols = None
        spread = (x.reshape(-1, cin) @ _w_spread(w)).reshape(n, h, wd, 9, cout)
        y = kernels.tapsum3(spread)
    y += b
    return y, (x, cols)


def conv3x3_backward(dy, cache, w):
    """Returns (dx, dw, db) for :func:`conv3x3_forward`."""
    x, cols = cache
    n, h, wd, cin = x.shape
    cout = w.shape[0]
    dyf = dy.reshape(-1, cout)
    db = dyf.sum(axis=0)
    wf = _w_flip(w)
    if cols is not None:
        dw = (cols.reshape(-1, 9 * cin).T @ dyf).reshape(3, 3, cin, cout).transpose(3, 2, 0, 1)
        spread = (dyf @ _w_spread(wf)).reshape(n, h, wd, 9, cin)
        dx = kernels.tapsum3(spread)
    else:
        dcols = kernels.im2col3(dy)
        dx = (dcols.reshape(-1, 9 * cout) @ _w_gather(wf)).reshape(n, h, wd, cin)
        # dcols taps are offset by -off(tap); rotate back
        dwf = (dcols.reshape(-1, 9 * cout).T @ x.reshape(-1, cin)).reshape(3, 3, cout, cin)
        dw = dwf[::-1, ::-1].transpose(2, 3, 0, 1)
    return dx, np.ascontiguousarray(dw), db


# ---- subnet: conv3x3 -> ReLU -> conv3x3 -------------------------------------


def subnet_forward(params, prefix, x):
    """(N, C, H, W) in and out; NHWC internally."""
    w1, b1 = params[prefix + "w1"], params[prefix + "b1"]
    w2, b2 = params[prefix + "w2"], params[prefix + "b2"]
    xh = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
    a, c1 = conv3x3_forward(xh, w1, b1)
    mask = a > 0
    y, c2 = conv3x3_forward(a * mask, w2, b2)
    return y.transpose(0, 3, 1, 2), (c1, mask, c2)


def subnet_backward(params, prefix, cache, dy, grads):
    c1, mask, c2 = cache
    w1, w2 = params[prefix + "w1"], params[prefix + "w2"]
    dyh = np.ascontiguousarray(dy.transpose(0, 2, 3, 1))
    dh, dw2, db2 = conv3x3_backward(dyh, c2, w2)
    dx, dw1, db1 = conv3x3_backward(dh * mask, c1, w1)
    _accum(grads, prefix + "w1", dw1)
    _accum(grads, prefix + "b1", db1)
    _accum(grads, prefix + "w2", dw2)
    _accum(grads, prefix + "b2", db2)
    return dx.transpose(0, 3, 1, 2)


def _accum(grads, key, value):
    if key in grads:
        grads[key] += value
    else:
        grads[key] = np.array(value, dtype=np.float64)


# ---- affine coupling --------------------------------------------------------


def _clamped_scale(params, prefix, u, alpha):
    s_raw, s_cache = subnet_forward(params, prefix + "s.", u)
    th = np.tanh(s_raw / alpha)
    return alpha * th, th, s_cache


def coupling_forward(params, prefix, m, d, alpha):
    m1, m2 = m[:, :d], m[:, d:]
    r_out, r_cache = subnet_forward(params, prefix + "r.", m2)
    n1 = m1 + r_out
    s_hat, th, s_cache = _clamped_scale(params, prefix, n1, alpha)
    t_out, t_cache = subnet_forward(params, prefix + "t.", n1)
    e = np.exp(s_hat)
    n2 = m2 * e + t_out
    cache = (r_cache, s_cache, t_cache, m2, e, th)
    return np.concatenate([n1, n2], axis=1), cache


def coupling_forward_backward(params, prefix, cache, dn, d, grads):
    r_cache, s_cache, t_cache, m2, e, th = cache
    dn1, dn2 = dn[:, :d], dn[:, d:]
    dm2 = dn2 * e
    ds_raw = dn2 * m2 * e * (1.0 - th * th)
    dn1 = (
        dn1
        + subnet_backward(params, prefix + "s.", s_cache, ds_raw, grads)
        + subnet_backward(params, prefix + "t.", t_cache, dn2, grads)
    )
    dm2 = dm2 + subnet_backward(params, prefix + "r.", r_cache, dn1, grads)
    return np.concatenate([dn1, dm2], axis=1)


def coupling_inverse(params, prefix, n, d, alpha):
    n1, n2 = n[:, :d], n[:, d:]
    s_hat, th, s_cache = _clamped_scale(params, prefix, n1, alpha)
    t_out, t_cache = subnet_forward(params, prefix + "t.", n1)
    e_inv = np.exp(-s_hat)
    m2 = (n2 - t_out) * e_inv
    r_out, r_cache = subnet_forward(params, prefix + "r.", m2)
    m1 = n1 - r_out
    cache = (r_cache, s_cache, t_cache, m2, e_inv, th)
    return np.concatenate([m1, m2], axis=1), cache


def coupling_inverse_backward(params, prefix, cache, dm, d, grads):
    r_cache, s_cache, t_cache, m2, e_inv, th = cache
    dm1, dm2 = dm[:, :d], dm[:, d:]
    dn1 = dm1
    dm2 = dm2 + subnet_backward(params, prefix + "r.", r_cache, -dm1, grads)
    dn2 = dm2 * e_inv
    ds_raw = -dm2 * m2 * (1.0 - th * th)
    dn1 = (
        dn1
        + subnet_backward(params, prefix + "t.", t_cache, -dn2, grads)
        + subnet_backward(params, prefix + "s.", s_cache, ds_raw, grads)
    )
    return np.concatenate([dn1, dn2], axis=1)


# ---- invertible 1x1 channel mixing -----------------------------------------


class MixMatrix:
    """Invertible channel-mixing matrix with cached inverse and |det|."""

    def __init__(self, w):
        w = np.array(w, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionError(f"mixing matrix must be square, got {w.shape}")
        sign, logdet = np.linalg.slogdet(w)
        absdet = float(np.exp(logdet)) if sign != 0 else 0.0
        if not absdet > DET_FLOOR:
            raise SingularityError(f"|det W| = {absdet:.3e} below {DET_FLOOR}")
        try:
            inv = np.linalg.inv(w)
        except np.linalg.LinAlgError:
            raise SingularityError("mixing matrix is numerically singular") from None
        if np.max(np.abs(w @ inv - np.eye(len(w)))) > INVERSE_TOL:
            raise SingularityError("mixing matrix too ill-conditioned to invert accurately")
        self.w = w
        self.inv = inv
        self.absdet = absdet


def mix_apply(mat, x):
    n, c, h, w = x.shape
    return (mat.astype(x.dtype, copy=False) @ x.reshape(n, c, h * w)).reshape(n, c, h, w)


def mix_backward(mat, x, dy):
    """For y = mat @ x per pixel: returns (dx, dmat)."""
    n, c, h, w = x.shape
    xf = x.reshape(n, c, h * w)
    dyf = dy.reshape(n, c, h * w)
    dmat = np.einsum("nip,njp->ij", dyf, xf)
    dx = (mat.T @ dyf).reshape(n, c, h, w)
    return dx, dmat


def mix_inverse_backward(mix: MixMatrix, x, dy):
    """For y = W^-1 @ x per pixel: returns (dx, dW)."""
    dx, dinv = mix_backward(mix.inv, x, dy)
    return dx, -mix.inv.T @ dinv @ mix.inv.T
