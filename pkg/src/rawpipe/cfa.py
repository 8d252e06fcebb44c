"""Bayer mosaicing and demosaicing.

``demosaic_inpixel`` is the tile-collapsing scheme computed by the pixel
array: each 2x2 tile yields one RGB pixel, red and blue copied and the two
greens averaged with a logical right shift (so ties round down).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .core import CFA_PATTERNS, BayerImage, RgbImage
from .errors import DimensionError, EncodingError

_COLOR_INDEX = {"R": 0, "G": 1, "B": 2}


@dataclass(frozen=True)
class CfaOffsets:
    """(row, col) of each sample inside the 2x2 tile; G1 precedes G2 in raster order."""

    r: tuple
    g1: tuple
    g2: tuple
    b: tuple

    @classmethod
    def for_pattern(cls, pattern: str) -> "CfaOffsets":
        pattern = pattern.upper()
        if pattern not in CFA_PATTERNS:
            raise EncodingError(f"unknown CFA pattern {pattern!r}")
        sites = [(0, 0), (0, 1), (1, 0), (1, 1)]
        greens = [s for s, ch in zip(sites, pattern) if ch == "G"]
        return cls(
            r=sites[pattern.index("R")],
            g1=greens[0],
            g2=greens[1],
            b=sites[pattern.index("B")],
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.g1, self.g2, self.b], dtype=np.int64)

    def color_at(self, row: int, col: int) -> str:
        site = (row % 2, col % 2)
        if site == self.r:
            return "R"
        if site == self.b:
            return "B"
        return "G"


def color_map(pattern: str) -> np.ndarray:
    """(2, 2) array of color indices (0=R, 1=G, 2=B) by row/col parity."""
    pattern = pattern.upper()
    return np.array([_COLOR_INDEX[ch] for ch in pattern], dtype=np.int64).reshape(2, 2)


def mosaic(rgb: RgbImage, pattern: str = "RGGB") -> BayerImage:
    """Sample each location's CFA color from the matching RGB plane."""
    if rgb.unit_real:
        raise EncodingError("mosaic needs integer-code RGB; quantize first")
    h, w = rgb.height, rgb.width
    if h % 2 or w % 2:
        raise DimensionError(f"mosaic needs even dimensions, got {w}x{h}")
    cmap = color_map(pattern)
    out = np.empty((h, w), dtype=np.uint16)
    for py in range(2):
        for px in range(2):
            out[py::2, px::2] = rgb.planes[cmap[py, px], py::2, px::2]
    return BayerImage(out, rgb.bit_depth, pattern)


def mosaic_unit(planes: np.ndarray, pattern: str = "RGGB") -> np.ndarray:
    """Mosaic a real-valued (3, H, W) array into an (H, W) frame."""
    planes = np.asarray(planes)
    _, h, w = planes.shape
    if h % 2 or w % 2:
        raise DimensionError(f"mosaic needs even dimensions, got {w}x{h}")
    cmap = color_map(pattern)
    out = np.empty((h, w), dtype=planes.dtype)
    for py in range(2):
        for px in range(2):
            out[py::2, px::2] = planes[cmap[py, px], py::2, px::2]
    return out


def _neighbor_tables(pattern: str):
    cmap = color_map(pattern)
    cross = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    horiz = [(0, -1), (0, 1)]
    vert = [(-1, 0), (1, 0)]
    diag = [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    dy = np.zeros((2, 2, 3, 4), dtype=np.int64)
    dx = np.zeros((2, 2, 3, 4), dtype=np.int64)
    nn = np.zeros((2, 2, 3), dtype=np.int64)
    for py in range(2):
        for px in range(2):
            for k in range(3):
                if cmap[py, px] == k:
                    continue
                for group in (cross, horiz, vert, diag):
                    if all(cmap[(py + a) % 2, (px + b) % 2] == k for a, b in group):
                        for t, (a, b) in enumerate(group):
                            dy[py, px, k, t] = a
                            dx[py, px, k, t] = b
                        nn[py, px, k] = len(group)
                        break
    return dy, dx, nn


def demosaic_bilinear(bayer: BayerImage) -> RgbImage:
    """Classic bilinear demosaic at full resolution.

    Missing colors are the rounded (half-up) mean of the nearest same-color
    neighbors: cross for green at R/B sites, diagonal for R at B sites and
    vice versa, horizontal or vertical pairs at green sites. Borders repeat
    the nearest same-color sample (reflection about the edge pixel).
    """
    dy, dx, nn = _neighbor_tables(bayer.pattern)
    out = kernels.demosaic_bilinear(bayer.data, dy, dx, nn)
    return RgbImage(out, bayer.bit_depth)


def demosaic_inpixel(bayer: BayerImage) -> RgbImage:
    """Collapse each 2x2 tile to one pixel: (R, (G1 + G2) >> 1, B)."""
    offs = CfaOffsets.for_pattern(bayer.pattern).as_array()
    out = kernels.demosaic_inpixel(bayer.data, offs)
    return RgbImage(out, bayer.bit_depth)


def demosaic_inpixel_real(frame, pattern: str = "RGGB") -> np.ndarray:
    """Tile collapse on a real-valued frame with an exact green mean (no floor)."""
    frame = np.asarray(frame, dtype=np.float64)
    h, w = frame.shape
    if h % 2 or w % 2:
        raise DimensionError(f"frame dimensions must be even, got {w}x{h}")
    o = CfaOffsets.for_pattern(pattern)
    out = np.empty((3, h // 2, w // 2))
    out[0] = frame[o.r[0] :: 2, o.r[1] :: 2]
    out[1] = 0.5 * (frame[o.g1[0] :: 2, o.g1[1] :: 2] + frame[o.g2[0] :: 2, o.g2[1] :: 2])
    out[2] = frame[o.b[0] :: 2, o.b[1] :: 2]
    return out
