"""First convolution layer fused with the in-pixel demosaic.

A convolution over the demosaiced grid (one pixel per 2x2 Bayer tile) is
rewritten as a convolution over the Bayer frame itself with kernel size
2k and stride 2s. Each demosaiced tap maps onto its tile: the red and blue
weights one-to-one, the green weight split into two equal taps of half
value on the two green sites. Summing both green taps therefore averages
the greens before weighting.

Quantized mode models the digital path: the two green codes are combined
as ``(g1 + g2) >> 1`` before weighting.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._backend import kernels
from .cfa import CfaOffsets, demosaic_inpixel
from .core import BayerImage, RgbImage, gaussian_field
from .errors import DimensionError, EncodingError, ParameterError

_MISMATCH_STREAM = 2


@dataclass(frozen=True, eq=False)
class ConvSpec:
    """Convolution over the demosaiced grid: weights (out, 3, k, k), bias (out,)."""

    weights: np.ndarray
    bias: np.ndarray
    stride: int = 2

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64)
        if w.ndim != 4 or w.shape[1] != 3 or w.shape[2] != w.shape[3]:
            raise DimensionError(f"weights must be (out, 3, k, k), got {w.shape}")
        if b.shape != (w.shape[0],):
            raise DimensionError(f"bias must be ({w.shape[0]},), got {b.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ParameterError("weights and bias must be finite")
        if int(self.stride) < 1:
            raise ParameterError("stride must be >= 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "stride", int(self.stride))

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def kernel(self) -> int:
        return self.weights.shape[2]

    @property
    def padding(self) -> int:
        return self.kernel // 2

    def output_shape(self, x: int, y: int):
        k, p, s = self.kernel, self.padding, self.stride
        return self.out_channels, (x + 2 * p - k) // s + 1, (y + 2 * p - k) // s + 1


def random_spec(seed: int = 0, out_channels: int = 8, kernel: int = 3, stride: int = 2, scale: float = 0.5) -> ConvSpec:
    from .core import Prng

    prng = Prng(seed)
    w = prng.gaussian_array(out_channels * 3 * kernel * kernel, scale).reshape(out_channels, 3, kernel, kernel)
    b = prng.gaussian_array(out_channels, scale)
    return ConvSpec(w, b, stride)


@dataclass(frozen=True, eq=False)
class FusedWeights:
    """Bayer-domain kernels (out, 2k, 2k) applied with stride 2s and padding 2p."""

    kernels: np.ndarray
    bias: np.ndarray
    stride: int
    padding: int
    pattern: str

    def green_taps(self):
        """(out, k, k, 2) array of the two green taps of every tile."""
        o = CfaOffsets.for_pattern(self.pattern)
        g1 = self.kernels[:, o.g1[0] :: 2, o.g1[1] :: 2]
        g2 = self.kernels[:, o.g2[0] :: 2, o.g2[1] :: 2]
        return np.stack([g1, g2], axis=-1)


def expand_weights(spec: ConvSpec, pattern: str = "RGGB", mismatch_sigma: float = 0.0, seed: int = 0) -> FusedWeights:
    """Map each demosaiced tap onto its Bayer tile, halving the green weight.

    ``mismatch_sigma`` > 0 scales every green tap by an independent factor
    ``1 + sigma * z`` to model unequal weight devices in the two green pixels.
    """
    o = CfaOffsets.for_pattern(pattern)
    out, _, k, _ = spec.weights.shape
    ker = np.zeros((out, 2 * k, 2 * k))
    ker[:, o.r[0] :: 2, o.r[1] :: 2] = spec.weights[:, 0]
    ker[:, o.b[0] :: 2, o.b[1] :: 2] = spec.weights[:, 2]
    half = spec.weights[:, 1] * 0.5
    g1 = half.copy()
    g2 = half.copy()
    if mismatch_sigma < 0:
        raise ParameterError("mismatch sigma must be non-negative")
    if mismatch_sigma > 0:
        z = gaussian_field(seed, _MISMATCH_STREAM, (2,) + half.shape, mismatch_sigma)
        g1 = g1 * (1.0 + z[0])
        g2 = g2 * (1.0 + z[1])
    ker[:, o.g1[0] :: 2, o.g1[1] :: 2] = g1
    ker[:, o.g2[0] :: 2, o.g2[1] :: 2] = g2
    return FusedWeights(ker, spec.bias.copy(), 2 * spec.stride, 2 * spec.padding, pattern.upper())


def _frame(bayer, pattern):
    if isinstance(bayer, BayerImage):
        return bayer.data, bayer.pattern, True
    arr = np.asarray(bayer)
    if arr.ndim != 2:
        raise DimensionError(f"Bayer frame must be 2-D, got {arr.shape}")
    if arr.shape[0] % 2 or arr.shape[1] % 2 or 0 in arr.shape:
        raise DimensionError(f"Bayer frame dimensions must be even, got {arr.shape}")
    integer = arr.dtype.kind in "iu"
    return arr, (pattern or "RGGB").upper(), integer


def fused_conv(
    bayer,
    spec: ConvSpec,
    mode: str = "real",
    pattern: Optional[str] = None,
    mismatch_sigma: float = 0.0,
    seed: int = 0,
) -> np.ndarray:
    """Fused demosaic + convolution directly on the Bayer grid.

    ``bayer`` is a :class:`BayerImage` or a 2-D array (codes or unit-real
    voltages); ``pattern`` applies to plain arrays. Returns
    (out, X/s, Y/s) for a 2X-by-2Y frame. Output units follow the input:
    code units for integer input, unit-real otherwise.
    """
    if isinstance(bayer, BayerImage) and pattern is not None and pattern.upper() != bayer.pattern:
        raise ParameterError("pattern argument disagrees with the image's CFA pattern")
    data, pattern, integer = _frame(bayer, pattern)
    if mode == "real":
        fw = expand_weights(spec, pattern, mismatch_sigma, seed)
        frame = np.asarray(data, dtype=np.float64)
    elif mode == "quantized":
        if not integer:
            raise EncodingError("quantized mode needs integer codes")
        if mismatch_sigma:
            raise ParameterError("green mismatch is modeled in real mode only")
        fw = expand_weights(spec, pattern)
        frame = _greens_shifted(np.asarray(data, dtype=np.int64), pattern).astype(np.float64)
    else:
        raise ParameterError(f"unknown mode {mode!r}")
    return kernels.conv2d(frame[None], fw.kernels[:, None], fw.bias, fw.stride, fw.padding)


def _greens_shifted(codes, pattern):
    """Replace both greens of every tile with ``(g1 + g2) >> 1``."""
    o = CfaOffsets.for_pattern(pattern)
    out = codes.copy()
    g = (codes[o.g1[0] :: 2, o.g1[1] :: 2] + codes[o.g2[0] :: 2, o.g2[1] :: 2]) >> 1
    out[o.g1[0] :: 2, o.g1[1] :: 2] = g
    out[o.g2[0] :: 2, o.g2[1] :: 2] = g
    return out


def reference_conv(rgb, spec: ConvSpec) -> np.ndarray:
    """Plain strided cross-correlation on a (3, X, Y) demosaiced image, zero padded.

    Accumulates channel-major, then kernel row-major, bias last.
    """
    if isinstance(rgb, RgbImage):
        x = np.asarray(rgb.planes, dtype=np.float64)
    else:
        x = np.asarray(rgb, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != 3:
        raise DimensionError(f"expected (3, X, Y) input, got {x.shape}")
    return kernels.conv2d(x, spec.weights, spec.bias, spec.stride, spec.padding)


def reference_path(bayer: BayerImage, spec: ConvSpec) -> np.ndarray:
    """Demosaic in-pixel (floor green average) then convolve."""
    return reference_conv(demosaic_inpixel(bayer), spec)


def naive_conv(x, weights, bias, stride, pad) -> np.ndarray:
    """Quadruple-loop cross-correlation in pure Python; slow, used as a test oracle."""
    x = np.asarray(x, dtype=np.float64)
    c_in, h, w = x.shape
    c_out, _, kh, kw = np.shape(weights)
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    out = np.zeros((c_out, ho, wo))
    for o in range(c_out):
        for i in range(ho):
            for j in range(wo):
                acc = 0.0
                for c in range(c_in):
                    for a in range(kh):
                        for b in range(kw):
                            y, xx = i * stride + a - pad, j * stride + b - pad
                            if 0 <= y < h and 0 <= xx < w:
                                acc += weights[o][c][a][b] * x[c, y, xx]
                out[o, i, j] = acc + bias[o]
    return out
