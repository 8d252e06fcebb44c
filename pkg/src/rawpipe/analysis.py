"""Intensity-distribution diagnostics and sensor-to-processor bandwidth arithmetic."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np

from .core import BayerImage, RgbImage, adc_max
from .errors import DimensionError, ParameterError


@dataclass
class HistogramReport:
    bins: int
    edges: np.ndarray  # (bins + 1,), shared by every plane
    counts: np.ndarray  # (planes, bins)
    mean: np.ndarray
    std: np.ndarray

    @property
    def planes(self) -> int:
        return self.counts.shape[0]

    def normalized(self) -> np.ndarray:
        totals = self.counts.sum(axis=1, keepdims=True)
        return self.counts / np.maximum(totals, 1)

    def to_gnuplot(self) -> str:
        """Two-column ``center count`` blocks, one per plane, blank-line separated."""
        centers = 0.5 * (self.edges[:-1] + self.edges[1:])
        blocks = []
        for p in range(self.planes):
            lines = [f"# plane {p}"] + [f"{c:.9g} {n}" for c, n in zip(centers, self.counts[p])]
            blocks.append("\n".join(lines))
        return "\n\n\n".join(blocks) + "\n"


def _planes_and_range(image):
    if isinstance(image, BayerImage):
        return image.data[None].astype(np.float64), (0.0, float(adc_max(image.bit_depth)))
    if isinstance(image, RgbImage):
        planes = np.asarray(image.planes, dtype=np.float64)
        if image.unit_real:
            return planes, (0.0, 1.0)
        return planes, (0.0, float(adc_max(image.bit_depth)))
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise DimensionError(f"expected a 2-D frame or (planes, H, W), got {arr.shape}")
    return arr, (0.0, 1.0)


def histogram(image, bins: int = 256, value_range: Optional[Tuple[float, float]] = None) -> HistogramReport:
    """Per-plane histogram with uniform bins over the code range (or [0, 1] for real data).

    Bins are left-closed except the last, which also holds the top value.
    Values outside the range are counted in the nearest end bin.
    """
    if bins < 2:
        raise ParameterError("need at least 2 bins")
    planes, rng = _planes_and_range(image)
    lo, hi = value_range if value_range is not None else rng
    if not hi > lo:
        raise ParameterError("empty value range")
    edges = lo + (hi - lo) * np.arange(bins + 1) / bins
    flat = planes.reshape(planes.shape[0], -1)
    idx = np.floor((flat - lo) / (hi - lo) * bins).astype(np.int64)
    np.clip(idx, 0, bins - 1, out=idx)
    counts = np.stack([np.bincount(row, minlength=bins) for row in idx])
    return HistogramReport(bins, edges, counts, flat.mean(axis=1), flat.std(axis=1))


@dataclass
class ShiftMetrics:
    mean_delta: np.ndarray
    std_delta: np.ndarray
    intersection_per_plane: np.ndarray

    @property
    def intersection(self) -> float:
        return float(np.mean(self.intersection_per_plane))


def shift_metrics(a: HistogramReport, b: HistogramReport) -> ShiftMetrics:
    """Mean/std deltas (b - a) and histogram intersection sum(min(p, q))."""
    if a.bins != b.bins or a.planes != b.planes or not np.array_equal(a.edges, b.edges):
        raise ParameterError("histograms have different bin structure")
    inter = np.minimum(a.normalized(), b.normalized()).sum(axis=1)
    return ShiftMetrics(b.mean - a.mean, b.std - a.std, np.clip(inter, 0.0, 1.0))


# ---- bandwidth ---------------------------------------------------------------


@dataclass(frozen=True)
class Stage:
    name: str
    elements: int
    bits_per_element: int

    @property
    def bits(self) -> int:
        return self.elements * self.bits_per_element


@dataclass
class BandwidthReport:
    stages: List[Stage]
    ratios: Dict[str, Fraction] = field(default_factory=dict)
    energy_per_bit: Optional[float] = None

    def stage(self, name: str) -> Stage:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)

    def pairwise(self) -> Dict[Tuple[str, str], Fraction]:
        """bits(a) / bits(b) for every ordered pair of distinct stages."""
        return {
            (a.name, b.name): Fraction(a.bits, b.bits)
            for a in self.stages
            for b in self.stages
            if a is not b
        }

    def energy(self, stage: Stage) -> Optional[float]:
        return None if self.energy_per_bit is None else self.energy_per_bit * stage.bits

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("stage,elements,bits_per_element,bits_per_frame" + (",energy" if self.energy_per_bit is not None else "") + "\n")
        for s in self.stages:
            row = f"{s.name},{s.elements},{s.bits_per_element},{s.bits}"
            if self.energy_per_bit is not None:
                row += f",{self.energy(s):.9g}"
            buf.write(row + "\n")
        buf.write("\nratio,value,decimal\n")
        for name, r in self.ratios.items():
            buf.write(f"{name},{r},{float(r):.6g}\n")
        return buf.getvalue()

    def to_text(self) -> str:
        head = ["stage", "elements", "bits/elem", "bits/frame"]
        rows = [[s.name, str(s.elements), str(s.bits_per_element), str(s.bits)] for s in self.stages]
        if self.energy_per_bit is not None:
            head.append("energy")
            for row, s in zip(rows, self.stages):
                row.append(f"{self.energy(s):.6g}")
        widths = [max(len(r[i]) for r in rows + [head]) for i in range(len(head))]
        lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))) for r in [head] + rows]
        lines.append("")
        nw = max(len(n) for n in self.ratios) if self.ratios else 0
        for name, r in self.ratios.items():
            lines.append(f"{name.ljust(nw)}  {str(r):>7}  ({float(r):.6g})")
        return "\n".join(lines) + "\n"


def bandwidth_report(
    width: int,
    height: int,
    bit_depth: int = 12,
    conv_out_channels: Optional[int] = None,
    conv_stride: int = 2,
    conv_kernel: int = 3,
    output_bits: int = 8,
    energy_per_bit: Optional[float] = None,
) -> BandwidthReport:
    """Bits per frame leaving the sensor for each read-out configuration.

    Stages: ``mosaiced`` raw (W*H samples at ``bit_depth``), ``demosaiced``
    in-pixel output (3 * W/2 * H/2 at ``output_bits``) and, when
    ``conv_out_channels`` is given, the fused first-layer output on the
    demosaiced grid (same-padded ``conv_kernel``, stride ``conv_stride``).
    Every ratio is an exact :class:`~fractions.Fraction` of integer counts.
    """
    if width <= 0 or height <= 0 or width % 2 or height % 2:
        raise DimensionError(f"Bayer dimensions must be even and positive, got {width}x{height}")
    if output_bits <= 0 or bit_depth <= 0:
        raise ParameterError("bit widths must be positive")
    x, y = width // 2, height // 2
    raw = Stage("mosaiced", width * height, bit_depth)
    dem = Stage("demosaiced", 3 * x * y, output_bits)
    stages = [raw, dem]
    ratios = {
        "demosaic_element_reduction": Fraction(raw.elements, dem.elements),
        "demosaic_element_saving": 1 - Fraction(dem.elements, raw.elements),
        "bits_per_element_ratio": Fraction(bit_depth, output_bits),
        "demosaic_bit_reduction": Fraction(raw.bits, dem.bits),
    }
    if conv_out_channels is not None:
        if conv_out_channels <= 0 or conv_stride <= 0 or conv_kernel <= 0:
            raise ParameterError("conv parameters must be positive")
        pad = conv_kernel // 2
        xo = (x + 2 * pad - conv_kernel) // conv_stride + 1
        yo = (y + 2 * pad - conv_kernel) // conv_stride + 1
        conv = Stage("fused_conv", conv_out_channels * xo * yo, output_bits)
        stages.append(conv)
        ratios.update(
            {
                "conv_spatial_reduction": Fraction(x * y, xo * yo),
                "conv_channel_increase": Fraction(conv_out_channels, 3),
                "conv_bit_ratio_vs_demosaiced": Fraction(dem.bits, conv.bits),
                "conv_bit_reduction_vs_mosaiced": Fraction(raw.bits, conv.bits),
            }
        )
    return BandwidthReport(stages, ratios, energy_per_bit)
