"""Acceptance suite: one PASS/FAIL line per criterion, printed to the terminal.

Run alone with ``pytest tests/test_acceptance.py -v``. Criterion 3 trains
two full 5000-step models and dominates the runtime (several minutes).
"""
import os
import subprocess
import sys
import textwrap
import time
from fractions import Fraction

import numpy as np
import pytest

from rawpipe.analysis import bandwidth_report, histogram, shift_metrics
from rawpipe.cfa import demosaic_inpixel, demosaic_inpixel_real
from rawpipe.core import BayerImage, Prng
from rawpipe.invisp import gamma_encode, init_model, load_checkpoint, loss_and_grad, model_inverse, natural_frames, psnr, synth_isp_oracle, synthetic_pairs
from rawpipe.p2m import fused_conv, random_spec, reference_conv, reference_path
from rawpipe.pixelsim import PixelArrayConfig, adc, build_schedule, simulate_readout


@pytest.fixture
def say(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} | {detail}")

    return emit


def random_model(seed):
    """Every parameter random: He first stages, unit-fan-in final stages, small biases."""
    return init_model(seed=seed, K=4, h=16, q=2, final_scale=1.0, bias_scale=0.1)


def test_1_invertibility(say):
    t0 = time.perf_counter()
    err64 = err32 = 0.0
    for i in range(100):
        model = random_model(i)
        x = Prng(10_000 + i).uniform_array(3 * 32 * 32).reshape(1, 3, 32, 32)
        err64 = max(err64, float(np.max(np.abs(model.inverse_array(model.forward_array(x)) - x))))
        x32 = x.astype(np.float32)
        y32 = model.forward_array(x32)
        assert y32.dtype == np.float32
        err32 = max(err32, float(np.max(np.abs(model.inverse_array(y32) - x32))))
    elapsed = time.perf_counter() - t0

    # informational: freshly initialized models (identity couplings)
    init32 = 0.0
    for i in range(100):
        model = init_model(seed=i, K=4, h=16, q=2)
        x32 = Prng(10_000 + i).uniform_array(3 * 32 * 32).reshape(1, 3, 32, 32).astype(np.float32)
        init32 = max(init32, float(np.max(np.abs(model.inverse_array(model.forward_array(x32)) - x32))))

    ok = err64 < 1e-9 and err32 < 1e-4 and elapsed < 60
    say(1, ok, f"random models: max err f64 {err64:.3e} (<1e-9), f32 {err32:.3e} (<1e-4); "
        f"{elapsed:.1f}s (<60s); fresh-init f32 {init32:.3e} (informational)")
    assert err64 < 1e-9
    assert elapsed < 60
    assert err32 < 1e-4


FD_CONFIGS = [
    # (K, h, q): every parameter class appears in each
    (2, 2, 1),
    (2, 3, 1),
    (2, 4, 1),
    (1, 2, 2),
]


def test_2_gradient_oracle(say):
    t0 = time.perf_counter()
    worst = 0.0
    n_checked = 0
    sizes = []
    step = 1e-6
    for cfg_i, (K, h, q) in enumerate(FD_CONFIGS):
        model = init_model(seed=3 + cfg_i, K=K, h=h, q=q, final_scale=1.0, bias_scale=0.1)
        assert model.n_params <= 1000
        sizes.append(model.n_params)
        raw = Prng(100 + cfg_i).uniform_array(2 * 3 * 4 * 4).reshape(2, 3, 4, 4)
        rgb = model.forward_array(raw) + 0.05 * Prng(200 + cfg_i).gaussian_array(raw.size).reshape(raw.shape)
        _, _, _, grads = loss_and_grad(model, raw, rgb)
        for key in sorted(model.params):
            v = model.params[key]
            for i in range(v.size):
                old = v.flat[i]
                v.flat[i] = old + step
                model.invalidate()
                lp = loss_and_grad(model, raw, rgb)[0]
                v.flat[i] = old - step
                model.invalidate()
                lm = loss_and_grad(model, raw, rgb)[0]
                v.flat[i] = old
                model.invalidate()
                fd = (lp - lm) / (2 * step)
                a = grads[key].flat[i]
                worst = max(worst, abs(a - fd) / max(abs(a), abs(fd), 1e-4))
                n_checked += 1
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-5 and elapsed < 300
    say(2, ok, f"{n_checked} parameters over models of {sizes} params: max rel err {worst:.3e} "
        f"(<1e-5, denominator floor 1e-4); {elapsed:.1f}s (<300s)")
    assert ok


TRAIN_SCRIPT = textwrap.dedent(
    """
    import sys, time
    from rawpipe.invisp import TrainConfig, synthetic_pairs, train
    raw, rgb = synthetic_pairs(64, size=32, seed=0)
    t0 = time.perf_counter()
    train(raw, rgb, TrainConfig(steps=5000, seed=0), log_path=sys.argv[2], checkpoint_path=sys.argv[1])
    print(time.perf_counter() - t0)
    """
)


def _train_once(tmp_path, tag):
    env = dict(os.environ, OMP_NUM_THREADS="1", OPENBLAS_NUM_THREADS="1", MKL_NUM_THREADS="1")
    ckpt, log = tmp_path / f"{tag}.iisp", tmp_path / f"{tag}.csv"
    out = subprocess.run(
        [sys.executable, "-c", TRAIN_SCRIPT, str(ckpt), str(log)],
        env=env, capture_output=True, text=True, check=True,
    )
    return ckpt, log, float(out.stdout.strip().splitlines()[-1])


@pytest.mark.slow
def test_3_isp_inversion(say, tmp_path):
    ckpt_a, log_a, secs_a = _train_once(tmp_path, "a")
    ckpt_b, log_b, _ = _train_once(tmp_path, "b")
    model = load_checkpoint(ckpt_a)
    raw, rgb = synthetic_pairs(16, size=32, seed=12345)
    inv_psnr = psnr(model_inverse(model, rgb, clamp=True), raw)
    identical = ckpt_a.read_bytes() == ckpt_b.read_bytes() and log_a.read_bytes() == log_b.read_bytes()
    ok = inv_psnr > 35 and identical and secs_a < 600
    say(3, ok, f"held-out inverse PSNR {inv_psnr:.2f} dB (>35); reruns bit-identical {identical}; "
        f"5000 steps in {secs_a:.0f}s single-threaded (<600s)")
    assert ok


def test_4_inpixel_bit_exact(say):
    t0 = time.perf_counter()
    prng = Prng(4)
    mismatches = 0
    for f in range(1000):
        data = prng.integers(64 * 64, 4096).reshape(64, 64)
        out = demosaic_inpixel(BayerImage(data, 12, "RGGB")).planes
        expect = np.stack(
            [data[0::2, 0::2], (data[0::2, 1::2] + data[1::2, 0::2]) // 2, data[1::2, 1::2]]
        )
        mismatches += int(np.count_nonzero(out != expect))
        if f < 3:  # scalar loop on a few frames, one tile at a time
            for ty in range(32):
                for tx in range(32):
                    r, g1 = int(data[2 * ty, 2 * tx]), int(data[2 * ty, 2 * tx + 1])
                    g2, b = int(data[2 * ty + 1, 2 * tx]), int(data[2 * ty + 1, 2 * tx + 1])
                    mismatches += (int(out[0, ty, tx]), int(out[1, ty, tx]), int(out[2, ty, tx])) != (r, (g1 + g2) >> 1, b)
    floor_case = int(demosaic_inpixel(BayerImage(np.array([[0, 60], [81, 0]]), 12)).planes[1, 0, 0])
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and floor_case == 70 and elapsed < 10
    say(4, ok, f"1000 frames 64x64: {mismatches} mismatches; G1=60,G2=81 -> {floor_case}; {elapsed:.2f}s (<10s)")
    assert ok


def test_5_readout_schedule(say):
    bad = []
    for n in range(2, 129, 2):
        cfg = PixelArrayConfig(n, n)
        trace = build_schedule(cfg)
        if len(trace) != n or not np.all(trace.read_counts() == 1):
            bad.append((n, "schedule"))
        v = Prng(n).uniform_array(n * n).reshape(n, n)
        if simulate_readout(v, cfg, trace) != demosaic_inpixel(BayerImage(adc(v, 12), 12)):
            bad.append((n, "ideal"))
    ok = not bad
    say(5, ok, f"64 sizes 2..128: cycles == rows, every pixel read once, ideal read-out == quantize+demosaic; failures {bad}")
    assert ok


def test_6_fusion_identity(say):
    dev_real = dev_codes_rel = 0.0
    q_floor = 0.0
    q_bound_ratio = 0.0
    for i in range(100):
        p = Prng(600 + i)
        h = 2 * int(p.integers(1, 24)[0] + 2)
        w = 2 * int(p.integers(1, 24)[0] + 2)
        bayer = BayerImage(p.integers(h * w, 4096).reshape(h, w), 12)
        spec = random_spec(700 + i, out_channels=8, kernel=3, stride=2)

        volts = bayer.to_unit()
        fused = fused_conv(volts, spec, "real")
        ref = reference_conv(demosaic_inpixel_real(volts), spec)
        dev_real = max(dev_real, float(np.max(np.abs(fused - ref))))

        fused_c = fused_conv(bayer, spec, "real")
        ref_c = reference_conv(demosaic_inpixel_real(bayer.data), spec)
        dev_codes_rel = max(dev_codes_rel, float(np.max(np.abs(fused_c - ref_c)) / np.max(np.abs(ref_c))))

        quant = fused_conv(bayer, spec, "quantized")
        q_floor = max(q_floor, float(np.max(np.abs(quant - reference_path(bayer, spec)))))
        bound = 0.5 * np.abs(spec.weights[:, 1]).sum(axis=(1, 2))[:, None, None]
        q_bound_ratio = max(q_bound_ratio, float(np.max(np.abs(quant - fused_c) / bound)))
    ok = dev_real < 1e-12 and q_floor <= 1e-9 and q_bound_ratio <= 1.0 + 1e-12
    say(6, ok, f"100 specs/frames: real-mode |fused - reference| {dev_real:.3e} (<1e-12, unit-real); "
        f"quantized vs floor path {q_floor:.3e}; quantized vs exact-mean path uses {q_bound_ratio:.3f} of the "
        f"0.5*sum|w_g| bound; code-unit relative deviation {dev_codes_rel:.2e}")
    assert ok


def test_7_bandwidth_arithmetic(say):
    rep = bandwidth_report(640, 480, 12, conv_out_channels=8, conv_stride=2, output_bits=8)
    checks = {
        "element saving 1/4": rep.ratios["demosaic_element_saving"] == Fraction(1, 4),
        "elements 307200 -> 230400": (rep.stage("mosaiced").elements, rep.stage("demosaiced").elements) == (307200, 230400),
        "per-element bits 3/2": rep.ratios["bits_per_element_ratio"] == Fraction(3, 2),
        "spatial 4": rep.ratios["conv_spatial_reduction"] == Fraction(4),
        "channels 8/3": rep.ratios["conv_channel_increase"] == Fraction(8, 3),
        "all Fractions": all(isinstance(r, Fraction) for r in rep.ratios.values()),
    }
    ok = all(checks.values())
    say(7, ok, ", ".join(f"{k}: {'ok' if v else 'WRONG'}" for k, v in checks.items()))
    assert ok


def test_8_distribution_shift(say):
    raw = natural_frames(20, 32, seed=8)
    inter_gamma = [shift_metrics(histogram(f, 64), histogram(gamma_encode(f), 64)).intersection for f in raw]
    inter_isp = [shift_metrics(histogram(f, 64), histogram(synth_isp_oracle(f), 64)).intersection for f in raw]
    ok = max(inter_gamma) < 0.9
    say(8, ok, f"20 natural-statistics frames: raw vs gamma-encoded intersection max {max(inter_gamma):.3f} "
        f"mean {np.mean(inter_gamma):.3f} (<0.9); raw vs full synthetic ISP max {max(inter_isp):.3f}")
    assert ok
