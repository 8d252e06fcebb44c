"""Cycle-level model of the dual select-line pixel read-out.

Each row carries two select lines: Row-Select drives the red and blue
pixels, Green-Select drives the greens. For every row pair the array is
read in two cycles:

* cycle 2p: Row-Select of both rows; R and B land on their own column
  lines (column switch open).
* cycle 2p+1: Green-Select of both rows with the column switch closed; both
  greens share the joined column line.

Each green is digitized and the pair is halved after the ADC with a right
shift, so the ideal output equals ``cfa.demosaic_inpixel`` of the quantized
frame bit for bit. Read noise is additive Gaussian on the voltage; green
mismatch is a multiplicative gain per green pixel. Both are drawn from
counter-based streams indexed by pixel position.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .cfa import CfaOffsets
from .core import CFA_PATTERNS, RgbImage, adc_max, gaussian_field
from .errors import DimensionError, NumericError, ParameterError

ROWSEL = "ROWSEL"
GREENSEL = "GREENSEL"
SEQUENTIAL = "SEQREAD"

_NOISE_STREAM = 0
_MISMATCH_STREAM = 1


@dataclass(frozen=True)
class PixelArrayConfig:
    rows: int
    cols: int
    bit_depth: int = 12
    full_well_voltage: float = 1.0
    read_noise_sigma: float = 0.0
    green_gain_mismatch_sigma: float = 0.0
    seed: int = 0
    pattern: str = "RGGB"

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0 or self.rows % 2 or self.cols % 2:
            raise DimensionError(f"pixel array must have even, non-zero size, got {self.rows}x{self.cols}")
        if not 8 <= self.bit_depth <= 16:
            raise ParameterError(f"bit depth {self.bit_depth} outside 8..16")
        if self.read_noise_sigma < 0 or self.green_gain_mismatch_sigma < 0:
            raise ParameterError("noise sigmas must be non-negative")
        if not self.full_well_voltage > 0:
            raise ParameterError("full-well voltage must be positive")
        if self.pattern.upper() not in CFA_PATTERNS:
            raise ParameterError(f"unknown CFA pattern {self.pattern!r}")
        object.__setattr__(self, "pattern", self.pattern.upper())


@dataclass(frozen=True)
class Cycle:
    index: int
    line: str
    rows: Tuple[int, int]
    switches_closed: Tuple[bool, ...]
    reads: Tuple[Tuple[int, int, str], ...]

    def to_text(self) -> str:
        state = "closed" if any(self.switches_closed) else "open"
        reads = ", ".join(f"({r},{c},{ch})" for r, c, ch in self.reads)
        rows = ",".join(str(r) for r in self.rows)
        return f"cycle {self.index}: {self.line} {rows} SWITCH={state} -> reads [{reads}]"


@dataclass
class ReadoutTrace:
    rows: int
    cols: int
    mode: str
    cycles: List[Cycle] = field(default_factory=list)

    def __len__(self):
        return len(self.cycles)

    def read_counts(self) -> np.ndarray:
        counts = np.zeros((self.rows, self.cols), dtype=np.int64)
        for cyc in self.cycles:
            for r, c, _ in cyc.reads:
                counts[r, c] += 1
        return counts

    def to_text(self) -> str:
        return "".join(cyc.to_text() + "\n" for cyc in self.cycles)


def build_schedule(config: PixelArrayConfig, mode: str = "proposed") -> ReadoutTrace:
    """Cycle list for the whole array.

    ``mode="proposed"`` is the two-cycle-per-row-pair scheme;
    ``mode="sequential"`` reads R, G1, G2 and B of each row pair in four
    separate cycles and exists only as a comparison baseline.
    """
    o = CfaOffsets.for_pattern(config.pattern)
    npairs = config.cols // 2
    trace = ReadoutTrace(config.rows, config.cols, mode)
    open_sw = (False,) * npairs
    closed_sw = (True,) * npairs
    for p in range(config.rows // 2):
        r0 = 2 * p
        rows = (r0, r0 + 1)

        def sites(off, ch):
            return tuple((r0 + off[0], 2 * j + off[1], ch) for j in range(npairs))

        if mode == "proposed":
            rb = tuple(sorted(sites(o.r, "R") + sites(o.b, "B")))
            gg = tuple(sorted(sites(o.g1, "G") + sites(o.g2, "G")))
            trace.cycles.append(Cycle(len(trace.cycles), ROWSEL, rows, open_sw, rb))
            trace.cycles.append(Cycle(len(trace.cycles), GREENSEL, rows, closed_sw, gg))
        elif mode == "sequential":
            for off, ch in ((o.r, "R"), (o.g1, "G"), (o.g2, "G"), (o.b, "B")):
                row = (r0 + off[0],) * 2
                trace.cycles.append(Cycle(len(trace.cycles), SEQUENTIAL, row, open_sw, sites(off, ch)))
        else:
            raise ParameterError(f"unknown schedule mode {mode!r}")
    return trace


def frame_rate_overhead(config: PixelArrayConfig, mode: str = "proposed") -> float:
    """Cycles spent per frame relative to one cycle per row."""
    return len(build_schedule(config, mode)) / config.rows


def adc(voltage, bit_depth: int):
    """Quantize: ``clamp(floor(v * (2**b - 1) + 0.5), 0, 2**b - 1)``.

    Scalars return an int, arrays an int64 array.
    """
    top = adc_max(bit_depth)
    v = np.asarray(voltage, dtype=np.float64)
    if np.any(np.isnan(v)):
        raise NumericError("NaN voltage at ADC input")
    codes = np.clip(np.floor(v * top + 0.5), 0, top).astype(np.int64)
    if codes.ndim == 0:
        return int(codes)
    return codes


def simulate_readout(voltages, config: PixelArrayConfig, trace: ReadoutTrace = None) -> RgbImage:
    """Run the proposed schedule over a voltage frame; return the (rows/2, cols/2) RGB codes."""
    v = np.asarray(voltages, dtype=np.float64)
    if v.shape != (config.rows, config.cols):
        raise DimensionError(f"voltage frame {v.shape} does not match array {config.rows}x{config.cols}")
    if np.any(np.isnan(v)):
        raise NumericError("NaN in voltage frame")
    if trace is None:
        trace = build_schedule(config)
    elif trace.mode != "proposed":
        raise ParameterError("simulate_readout executes the proposed schedule only")

    o = CfaOffsets.for_pattern(config.pattern)
    shape = (config.rows, config.cols)
    sensed = v / config.full_well_voltage
    if config.green_gain_mismatch_sigma > 0:
        gain = 1.0 + gaussian_field(config.seed, _MISMATCH_STREAM, shape, config.green_gain_mismatch_sigma)
    else:
        gain = None
    if config.read_noise_sigma > 0:
        noise = gaussian_field(config.seed, _NOISE_STREAM, shape, config.read_noise_sigma)
    else:
        noise = None

    def column_adc(row, off):
        cols = slice(off[1], None, 2)
        x = sensed[row, cols]
        if gain is not None and off in (o.g1, o.g2):
            x = x * gain[row, cols]
        if noise is not None:
            x = x + noise[row, cols]
        return adc(x, config.bit_depth)

    out = np.zeros((3, config.rows // 2, config.cols // 2), dtype=np.uint16)
    for cyc in trace.cycles:
        r0 = cyc.rows[0]
        tile_row = r0 // 2
        if cyc.line == ROWSEL:
            out[0, tile_row] = column_adc(r0 + o.r[0], o.r)
            out[2, tile_row] = column_adc(r0 + o.b[0], o.b)
        elif cyc.line == GREENSEL:
            d1 = column_adc(r0 + o.g1[0], o.g1)
            d2 = column_adc(r0 + o.g2[0], o.g2)
            out[1, tile_row] = (d1 + d2) >> 1
    return RgbImage(out, config.bit_depth)
