"""Conventional ISP stages and the fixed synthetic ISP used to make training pairs.

All functions take unit-real arrays whose channel axis is third from last,
``(..., 3, H, W)``, or a unit-real :class:`RgbImage`.
"""
from __future__ import annotations

import numpy as np

from ..core.images import RgbImage
from ..errors import EncodingError, ParameterError, RangeError

SYNTH_WB_GAINS = (2.0, 1.0, 1.5)
SYNTH_COLOR_MATRIX = np.array(
    [
        [1.6, -0.4, -0.2],
        [-0.3, 1.5, -0.2],
        [-0.1, -0.5, 1.6],
    ]
)
SYNTH_GAMMA = 2.2


def _unwrap(x):
    if isinstance(x, RgbImage):
        if not x.unit_real:
            raise EncodingError("expected a unit-real RGB image")
        return np.asarray(x.planes, dtype=np.float64), True
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim < 3 or arr.shape[-3] != 3:
        raise EncodingError(f"expected (..., 3, H, W) planes, got shape {arr.shape}")
    return arr, False


def _wrap(arr, was_image):
    return RgbImage(arr, None) if was_image else arr


def _gains(gains):
    g = np.asarray(gains, dtype=np.float64)
    if g.shape != (3,):
        raise ParameterError("white-balance gains must be three values")
    if not np.all(g > 0):
        raise ParameterError(f"white-balance gains must be positive, got {tuple(g)}")
    return g[:, None, None]


def white_balance(rgb, gains):
    """Per-channel gain. Not clamped; clamping happens on export."""
    arr, img = _unwrap(rgb)
    return _wrap(arr * _gains(gains), img)


def inverse_white_balance(rgb, gains):
    arr, img = _unwrap(rgb)
    return _wrap(arr / _gains(gains), img)


def _check_unit(arr):
    if arr.size and (np.any(np.isnan(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
        raise RangeError("gamma curve is defined on [0, 1]")


def gamma_encode(v, gamma: float = SYNTH_GAMMA):
    """``v ** (1 / gamma)`` on [0, 1]."""
    if isinstance(v, RgbImage):
        arr, _ = _unwrap(v)
        _check_unit(arr)
        return RgbImage(np.power(arr, 1.0 / gamma), None)
    arr = np.asarray(v, dtype=np.float64)
    _check_unit(arr)
    out = np.power(arr, 1.0 / gamma)
    return float(out) if out.ndim == 0 else out


def gamma_decode(v, gamma: float = SYNTH_GAMMA):
    """``v ** gamma`` on [0, 1]."""
    if isinstance(v, RgbImage):
        arr, _ = _unwrap(v)
        _check_unit(arr)
        return RgbImage(np.power(arr, gamma), None)
    arr = np.asarray(v, dtype=np.float64)
    _check_unit(arr)
    out = np.power(arr, gamma)
    return float(out) if out.ndim == 0 else out


def apply_color_matrix(rgb, matrix=SYNTH_COLOR_MATRIX):
    arr, img = _unwrap(rgb)
    out = np.einsum("ij,...jhw->...ihw", np.asarray(matrix, dtype=np.float64), arr)
    return _wrap(out, img)


def synth_isp_oracle(raw):
    """Fixed stand-in ISP: white balance (2, 1, 1.5), color matrix, clamp, gamma 2.2."""
    arr, img = _unwrap(raw)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise RangeError("raw input must lie in [0, 1]")
    wb = white_balance(arr, SYNTH_WB_GAINS)
    mixed = np.clip(apply_color_matrix(wb), 0.0, 1.0)
    return _wrap(gamma_encode(mixed, SYNTH_GAMMA), img)
