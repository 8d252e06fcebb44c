import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rawpipe.cfa import demosaic_inpixel
from rawpipe.core import CFA_PATTERNS, BayerImage, Prng
from rawpipe.errors import DimensionError, NumericError, ParameterError
from rawpipe.pixelsim import (
    GREENSEL,
    ROWSEL,
    PixelArrayConfig,
    adc,
    build_schedule,
    frame_rate_overhead,
    simulate_readout,
)


def voltages(seed, rows, cols):
    return Prng(seed).uniform_array(rows * cols).reshape(rows, cols)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(rows=3, cols=4),
            dict(rows=0, cols=4),
        ],
    )
    def test_dimension_errors(self, kwargs):
        with pytest.raises(DimensionError):
            PixelArrayConfig(**kwargs)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(read_noise_sigma=-1),
            dict(green_gain_mismatch_sigma=-0.1),
            dict(bit_depth=7),
            dict(full_well_voltage=0),
            dict(pattern="XXXX"),
        ],
    )
    def test_parameter_errors(self, kwargs):
        with pytest.raises(ParameterError):
            PixelArrayConfig(rows=2, cols=2, **kwargs)


class TestSchedule:
    def test_two_by_two(self):
        trace = build_schedule(PixelArrayConfig(2, 2))
        assert len(trace) == 2
        c0, c1 = trace.cycles
        assert c0.line == ROWSEL and sorted(ch for *_, ch in c0.reads) == ["B", "R"]
        assert not any(c0.switches_closed)
        assert c1.line == GREENSEL and [ch for *_, ch in c1.reads] == ["G", "G"]
        assert all(c1.switches_closed)

    def test_four_by_four_coverage(self):
        trace = build_schedule(PixelArrayConfig(4, 4))
        assert len(trace) == 4
        assert np.all(trace.read_counts() == 1)

    @pytest.mark.parametrize("pattern", CFA_PATTERNS)
    def test_channels_follow_pattern(self, pattern):
        trace = build_schedule(PixelArrayConfig(4, 6, pattern=pattern))
        for cyc in trace.cycles:
            for r, c, ch in cyc.reads:
                assert pattern[2 * (r % 2) + c % 2] == ch

    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 20), st.integers(1, 20))
    def test_one_cycle_per_row_and_lines_never_overlap(self, hr, hc):
        cfg = PixelArrayConfig(2 * hr, 2 * hc)
        trace = build_schedule(cfg)
        assert len(trace) == cfg.rows
        assert np.all(trace.read_counts() == 1)
        seen = set()
        for cyc in trace.cycles:
            key = (cyc.rows, cyc.line)
            assert key not in seen
            seen.add(key)
        assert frame_rate_overhead(cfg) == 1.0

    def test_sequential_baseline(self):
        cfg = PixelArrayConfig(8, 8)
        assert frame_rate_overhead(cfg, "sequential") == 2.0
        assert np.all(build_schedule(cfg, "sequential").read_counts() == 1)
        assert frame_rate_overhead(cfg) == 1.0

    def test_unknown_mode(self):
        with pytest.raises(ParameterError):
            build_schedule(PixelArrayConfig(2, 2), "zigzag")

    def test_trace_text(self):
        text = build_schedule(PixelArrayConfig(2, 2)).to_text().splitlines()
        assert text[0] == "cycle 0: ROWSEL 0,1 SWITCH=open -> reads [(0,0,R), (1,1,B)]"
        assert text[1] == "cycle 1: GREENSEL 0,1 SWITCH=closed -> reads [(0,1,G), (1,0,G)]"


class TestAdc:
    def test_examples(self):
        assert adc(1.0, 12) == 4095
        assert adc(-0.1, 12) == 0
        assert adc(0.5, 12) == 2048
        assert adc(1.7, 8) == 255

    def test_nan(self):
        with pytest.raises(NumericError):
            adc(float("nan"), 12)

    def test_array(self):
        out = adc(np.array([0.0, 0.25, 1.0]), 8)
        assert out.tolist() == [0, 64, 255]

    @pytest.mark.parametrize("b", [8, 12, 16])
    def test_inverts_normalization(self, b):
        codes = np.arange(1 << b)
        assert np.array_equal(adc(codes / ((1 << b) - 1), b), codes)


class TestSimulate:
    @pytest.mark.parametrize("pattern", CFA_PATTERNS)
    def test_ideal_matches_quantize_then_demosaic(self, pattern):
        v = voltages(1, 8, 12)
        cfg = PixelArrayConfig(8, 12, pattern=pattern)
        got = simulate_readout(v, cfg)
        expect = demosaic_inpixel(BayerImage(adc(v, 12), 12, pattern))
        assert got == expect

    def test_full_well_scaling(self):
        v = voltages(2, 4, 4)
        a = simulate_readout(v * 2.5, PixelArrayConfig(4, 4, full_well_voltage=2.5))
        assert a == simulate_readout(v, PixelArrayConfig(4, 4))

    def test_noise_is_seeded(self):
        v = voltages(3, 16, 16)
        cfg = PixelArrayConfig(16, 16, read_noise_sigma=0.001, seed=9)
        a, b = simulate_readout(v, cfg), simulate_readout(v, cfg)
        assert a == b
        ideal = simulate_readout(v, PixelArrayConfig(16, 16))
        assert a != ideal
        other = simulate_readout(v, PixelArrayConfig(16, 16, read_noise_sigma=0.001, seed=10))
        assert other != a

    def test_mismatch_touches_green_only(self):
        v = voltages(4, 16, 16)
        ideal = simulate_readout(v, PixelArrayConfig(16, 16))
        bad = simulate_readout(v, PixelArrayConfig(16, 16, green_gain_mismatch_sigma=0.05, seed=1))
        assert np.array_equal(bad.planes[0], ideal.planes[0])
        assert np.array_equal(bad.planes[2], ideal.planes[2])
        assert not np.array_equal(bad.planes[1], ideal.planes[1])

    def test_errors(self):
        with pytest.raises(DimensionError):
            simulate_readout(np.zeros((4, 6)), PixelArrayConfig(4, 4))
        v = np.zeros((2, 2))
        v[0, 0] = np.nan
        with pytest.raises(NumericError):
            simulate_readout(v, PixelArrayConfig(2, 2))
        cfg = PixelArrayConfig(2, 2)
        with pytest.raises(ParameterError):
            simulate_readout(np.zeros((2, 2)), cfg, build_schedule(cfg, "sequential"))
