"""Bayer and RGB image containers.

Sensor codes are always stored as ``uint16`` whatever the bit depth; the
bit depth is metadata checked at construction. Unit-real values use the
convention ``v = code / (2**b - 1)`` so that full scale maps to exactly 1.0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DimensionError, EncodingError, RangeError

CFA_PATTERNS = ("RGGB", "BGGR", "GRBG", "GBRG")

MIN_BIT_DEPTH = 8
MAX_BIT_DEPTH = 16


def adc_max(bit_depth: int) -> int:
    """Largest code representable at ``bit_depth``."""
    return (1 << int(bit_depth)) - 1


def _check_bit_depth(bit_depth):
    if not MIN_BIT_DEPTH <= int(bit_depth) <= MAX_BIT_DEPTH:
        raise RangeError(f"bit depth {bit_depth} outside {MIN_BIT_DEPTH}..{MAX_BIT_DEPTH}")


def normalize(code: int, bit_depth: int) -> float:
    """Map an integer sensor code to the unit interval."""
    top = adc_max(bit_depth)
    if code < 0 or code > top:
        raise RangeError(f"code {code} outside [0, {top}] for {bit_depth}-bit data")
    return code / top


def normalize_array(codes, bit_depth: int) -> np.ndarray:
    codes = np.asarray(codes)
    top = adc_max(bit_depth)
    if codes.size and (codes.min() < 0 or codes.max() > top):
        raise RangeError(f"codes outside [0, {top}] for {bit_depth}-bit data")
    return codes.astype(np.float64) / top


def _as_codes(data, bit_depth, what):
    arr = np.asarray(data)
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise EncodingError(f"{what} data must be integer codes")
    elif arr.dtype.kind not in "iub":
        raise EncodingError(f"{what} data must be integer codes, got {arr.dtype}")
    top = adc_max(bit_depth)
    if arr.size and (arr.min() < 0 or arr.max() > top):
        raise RangeError(f"{what} codes exceed [0, {top}] for {bit_depth}-bit data")
    out = arr.astype(np.uint16)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class BayerImage:
    """Single-plane CFA frame of integer sensor codes, shape ``(height, width)``."""

    data: np.ndarray
    bit_depth: int = 12
    pattern: str = "RGGB"

    def __post_init__(self):
        _check_bit_depth(self.bit_depth)
        pattern = str(self.pattern).upper()
        if pattern not in CFA_PATTERNS:
            raise EncodingError(f"unknown CFA pattern {self.pattern!r}")
        object.__setattr__(self, "pattern", pattern)
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise DimensionError(f"Bayer data must be 2-D, got shape {arr.shape}")
        h, w = arr.shape
        if h == 0 or w == 0 or h % 2 or w % 2:
            raise DimensionError(f"Bayer dimensions must be even and non-zero, got {w}x{h}")
        object.__setattr__(self, "data", _as_codes(arr, self.bit_depth, "Bayer"))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def to_unit(self) -> np.ndarray:
        return self.data.astype(np.float64) / adc_max(self.bit_depth)

    def __eq__(self, other):
        if not isinstance(other, BayerImage):
            return NotImplemented
        return (
            self.bit_depth == other.bit_depth
            and self.pattern == other.pattern
            and np.array_equal(self.data, other.data)
        )


@dataclass(frozen=True, eq=False)
class RgbImage:
    """Three planes in R, G, B order, shape ``(3, height, width)``.

    ``bit_depth`` set means integer codes; ``None`` means unit-real floats.
    """

    planes: np.ndarray
    bit_depth: Optional[int] = 8

    def __post_init__(self):
        arr = np.asarray(self.planes)
        if arr.ndim != 3 or arr.shape[0] != 3:
            raise DimensionError(f"RGB planes must have shape (3, H, W), got {arr.shape}")
        if arr.shape[1] == 0 or arr.shape[2] == 0:
            raise DimensionError("RGB image is empty")
        if self.bit_depth is None:
            if arr.dtype.kind not in "fiub":
                raise EncodingError(f"unsupported dtype {arr.dtype}")
            out = np.array(arr, dtype=arr.dtype if arr.dtype.kind == "f" else np.float64)
            if not np.all(np.isfinite(out)):
                raise RangeError("unit-real planes must be finite")
            out.setflags(write=False)
        else:
            _check_bit_depth(self.bit_depth)
            out = _as_codes(arr, self.bit_depth, "RGB")
        object.__setattr__(self, "planes", out)

    @property
    def unit_real(self) -> bool:
        return self.bit_depth is None

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    def to_unit(self) -> "RgbImage":
        if self.unit_real:
            return self
        return RgbImage(self.planes.astype(np.float64) / adc_max(self.bit_depth), None)

    def to_codes(self, bit_depth: int) -> "RgbImage":
        """Quantize unit-real planes (clamped to [0, 1], rounded half-up)."""
        if not self.unit_real:
            if bit_depth == self.bit_depth:
                return self
            raise EncodingError("re-quantizing integer images is not supported")
        top = adc_max(bit_depth)
        v = np.clip(np.asarray(self.planes, dtype=np.float64), 0.0, 1.0)
        return RgbImage(np.floor(v * top + 0.5).astype(np.uint16), bit_depth)

    def __eq__(self, other):
        if not isinstance(other, RgbImage):
            return NotImplemented
        return (
            self.bit_depth == other.bit_depth
            and self.planes.shape == other.planes.shape
            and np.array_equal(self.planes, other.planes)
        )
