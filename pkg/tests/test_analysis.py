from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rawpipe.analysis import bandwidth_report, histogram, shift_metrics
from rawpipe.core import BayerImage, Prng, RgbImage
from rawpipe.errors import DimensionError, ParameterError
from rawpipe.invisp import gamma_encode, natural_frames


class TestHistogram:
    def test_constant_image_single_bin(self):
        rep = histogram(BayerImage(np.full((4, 6), 1000), 12), bins=64)
        assert rep.counts.shape == (1, 64)
        assert np.count_nonzero(rep.counts) == 1 and rep.counts.sum() == 24
        assert rep.std[0] == 0.0 and rep.mean[0] == 1000.0

    def test_two_values_two_bins(self):
        data = np.zeros((2, 4), dtype=np.uint16)
        data[:, :2] = 4095
        rep = histogram(BayerImage(data, 12), bins=2)
        assert rep.counts.tolist() == [[4, 4]]

    def test_uniform_frame_within_five_sigma(self):
        n = 256 * 256
        codes = Prng(42).integers(n, 4096).reshape(256, 256)
        rep = histogram(BayerImage(codes, 12), bins=256)
        p = 1 / 256
        sigma = np.sqrt(n * p * (1 - p))
        assert np.max(np.abs(rep.counts - n * p)) < 5 * sigma

    def test_edges_and_conservation(self):
        img = RgbImage(Prng(1).integers(3 * 10 * 12, 256).reshape(3, 10, 12), 8)
        rep = histogram(img, bins=17)
        assert np.all(np.diff(rep.edges) > 0)
        assert rep.edges[0] == 0.0 and rep.edges[-1] == 255.0
        assert rep.counts.sum(axis=1).tolist() == [120, 120, 120]
        np.testing.assert_allclose(rep.normalized().sum(axis=1), 1.0)

    def test_unit_real_range_and_clipping(self):
        planes = np.array([-0.5, 0.0, 0.49, 0.5, 1.0, 2.0]).reshape(1, 1, 6)
        rep = histogram(planes, bins=2)
        assert rep.counts.tolist() == [[3, 3]]

    def test_bad_arguments(self):
        with pytest.raises(ParameterError):
            histogram(np.zeros((2, 2)), bins=1)
        with pytest.raises(ParameterError):
            histogram(np.zeros((2, 2)), value_range=(1.0, 1.0))
        with pytest.raises(DimensionError):
            histogram(np.zeros(4))

    def test_gnuplot_blocks(self):
        rep = histogram(np.zeros((2, 2, 2)), bins=4)
        text = rep.to_gnuplot()
        blocks = text.strip().split("\n\n\n")
        assert len(blocks) == 2
        assert blocks[0].splitlines()[0] == "# plane 0"
        assert blocks[0].splitlines()[1] == "0.125 4"


class TestShift:
    def test_identical(self):
        a = histogram(Prng(1).uniform_array(300).reshape(3, 10, 10), 32)
        m = shift_metrics(a, a)
        assert m.intersection == pytest.approx(1.0)
        assert np.all(m.mean_delta == 0) and np.all(m.std_delta == 0)

    def test_disjoint(self):
        a = histogram(np.full((1, 4, 4), 0.1), 10)
        b = histogram(np.full((1, 4, 4), 0.9), 10)
        m = shift_metrics(a, b)
        assert m.intersection == 0.0
        assert m.mean_delta[0] == pytest.approx(0.8)

    def test_symmetric(self):
        x = Prng(2).uniform_array(3 * 64).reshape(3, 8, 8)
        a, b = histogram(x, 16), histogram(x**2, 16)
        assert shift_metrics(a, b).intersection == shift_metrics(b, a).intersection

    def test_mismatched_bins(self):
        x = np.zeros((1, 2, 2))
        with pytest.raises(ParameterError):
            shift_metrics(histogram(x, 8), histogram(x, 16))
        with pytest.raises(ParameterError):
            shift_metrics(histogram(x, 8), histogram(np.zeros((3, 2, 2)), 8))

    def test_raw_vs_gamma_separates(self):
        raw = natural_frames(4, 32, seed=3)
        for frame in raw:
            m = shift_metrics(histogram(frame, 64), histogram(gamma_encode(frame), 64))
            assert m.intersection < 0.9
            assert np.all(m.mean_delta > 0)


class TestBandwidth:
    def test_vga_twelve_bit(self):
        rep = bandwidth_report(640, 480, 12)
        assert rep.stage("mosaiced").elements == 307200
        assert rep.stage("demosaiced").elements == 230400
        assert rep.ratios["demosaic_element_saving"] == Fraction(1, 4)
        assert rep.ratios["demosaic_element_reduction"] == Fraction(4, 3)
        assert rep.ratios["bits_per_element_ratio"] == Fraction(3, 2)
        assert rep.ratios["demosaic_bit_reduction"] == 2
        assert [s.name for s in rep.stages] == ["mosaiced", "demosaiced"]

    def test_with_conv(self):
        rep = bandwidth_report(640, 480, 12, conv_out_channels=8, conv_stride=2)
        conv = rep.stage("fused_conv")
        assert conv.elements == 8 * 160 * 120
        assert rep.ratios["conv_spatial_reduction"] == 4
        assert rep.ratios["conv_channel_increase"] == Fraction(8, 3)
        assert rep.ratios["conv_bit_reduction_vs_mosaiced"] == 3
        assert rep.pairwise()[("mosaiced", "fused_conv")] == 3
        for r in rep.ratios.values():
            assert isinstance(r, Fraction)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 2000), st.integers(1, 2000), st.integers(8, 16), st.integers(1, 16))
    def test_exact_for_every_even_size(self, hw, hh, b, out_bits):
        rep = bandwidth_report(2 * hw, 2 * hh, b, output_bits=out_bits)
        assert rep.ratios["demosaic_element_reduction"] == Fraction(4, 3)
        for s in rep.stages:
            assert s.bits == s.elements * s.bits_per_element
        assert rep.ratios["demosaic_bit_reduction"] == Fraction(rep.stages[0].bits, rep.stages[1].bits)

    def test_energy(self):
        rep = bandwidth_report(4, 4, 12, energy_per_bit=2.0)
        assert rep.energy(rep.stage("mosaiced")) == 2.0 * 192
        assert bandwidth_report(4, 4).energy(rep.stage("mosaiced")) is None

    def test_csv_and_text(self):
        rep = bandwidth_report(640, 480, 12, conv_out_channels=8, energy_per_bit=1e-12)
        csv = rep.to_csv().splitlines()
        assert csv[0] == "stage,elements,bits_per_element,bits_per_frame,energy"
        assert csv[1].startswith("mosaiced,307200,12,3686400,")
        assert "demosaic_element_saving,1/4,0.25" in csv
        text = rep.to_text()
        assert "conv_channel_increase" in text and "8/3" in text

    @pytest.mark.parametrize(
        "args, err",
        [
            ((641, 480), DimensionError),
            ((0, 480), DimensionError),
            ((640, 480, 0), ParameterError),
        ],
    )
    def test_errors(self, args, err):
        with pytest.raises(err):
            bandwidth_report(*args)
        with pytest.raises(ParameterError):
            bandwidth_report(8, 8, conv_out_channels=0)
