"""``rawpipe`` command-line front end.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric error.
"""
from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, cfa, p2m, pixelsim
from .core import BayerImage, RgbImage, load_image, load_tensor, save_image, save_tensor
from .errors import DataError, NumericError, ParameterError, ParseError
from .invisp import isp
from .invisp.model import init_model, load_checkpoint, model_forward, model_inverse, save_checkpoint
from .invisp.train import TrainConfig, natural_frames, train

log = logging.getLogger("rawpipe")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    g = parser.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=default if suppress else 0, help="64-bit seed for every random draw")
    g.add_argument("--precision", choices=("f32", "f64"), default=default if suppress else "f64")
    g.add_argument("--quiet", action="store_true", default=default if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rawpipe", description="ISP-less raw vision pipeline tools")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def add(name, **kw):
        p = sub.add_parser(name, **kw)
        _global_flags(p, suppress=True)
        return p

    p = add("mosaic", help="RGB PPM -> Bayer PGM")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pattern", default="rggb", type=str.upper, choices=("RGGB", "BGGR", "GRBG", "GBRG"))

    p = add("demosaic", help="Bayer PGM -> RGB PPM")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=("bilinear", "inpixel"), default="inpixel")

    p = add("pixelsim", help="simulate the dual select-line read-out of a Bayer frame")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--noise-sigma", type=float, default=0.0, help="read noise, in full-well units")
    p.add_argument("--mismatch-sigma", type=float, default=0.0, help="green gain mismatch (relative)")
    p.add_argument("--trace", help="write the cycle trace here")
    p.add_argument("--schedule", choices=("proposed", "sequential"), default="proposed",
                   help="schedule written to --trace and used for the overhead figure")

    p = add("invisp", help="invertible ISP: synth / train / apply")
    isub = p.add_subparsers(dest="action", parser_class=_Parser, required=True)

    def iadd(name, **kw):
        q = isub.add_parser(name, **kw)
        _global_flags(q, suppress=True)
        return q

    q = iadd("synth", help="write synthetic raw/rgb PPM pairs")
    q.add_argument("--out-dir", required=True)
    q.add_argument("--count", type=int, default=64)
    q.add_argument("--size", type=int, default=32)
    q.add_argument("--bitdepth", type=int, default=16)

    q = iadd("train", help="train the flow on paired patches")
    q.add_argument("--data", required=True, help="directory with raw/ and rgb/ PPM pairs")
    q.add_argument("--out", required=True)
    q.add_argument("--steps", type=int, default=5000)
    q.add_argument("--batch", type=int, default=TrainConfig.batch)
    q.add_argument("--lr", type=float, default=1e-3)
    q.add_argument("--K", type=int, default=4)
    q.add_argument("--hidden", type=int, default=32)
    q.add_argument("--q", type=int, default=2)
    q.add_argument("--lambda", dest="lam", type=float, default=1.0)
    q.add_argument("--log", help="CSV loss log path")
    q.add_argument("--checkpoint-every", type=int, default=0)

    q = iadd("apply", help="run a trained flow on PPM images")
    q.add_argument("--model", required=True)
    q.add_argument("--direction", choices=("rgb2raw", "raw2rgb"), required=True)
    q.add_argument("--in", dest="inp")
    q.add_argument("--out")
    q.add_argument("--in-dir")
    q.add_argument("--out-dir")
    q.add_argument("--mosaic", type=str.upper, choices=("RGGB", "BGGR", "GRBG", "GBRG"),
                   help="mosaic rgb2raw output into a Bayer PGM")
    q.add_argument("--bitdepth", type=int, help="output bit depth (default: input depth; 12 with --mosaic)")

    p = add("fuse", help="fused demosaic + first convolution on a Bayer frame")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True, help="FTEN output tensor")
    spec = p.add_mutually_exclusive_group(required=True)
    spec.add_argument("--spec", help="manifest: out_channels/kernel/stride/weights/bias lines")
    spec.add_argument("--random-spec", action="store_true", help="seeded random 8x3x3x3, stride 2")
    p.add_argument("--mode", choices=("real", "quantized"), default="real")
    p.add_argument("--mismatch-sigma", type=float, default=0.0)

    p = add("stats", help="intensity histograms and distribution shift")
    p.add_argument("--in", dest="inp")
    p.add_argument("--compare", nargs=2, metavar=("A", "B"))
    p.add_argument("--hist-bins", type=int, default=256)
    p.add_argument("--pooled", action="store_true", help="pool all planes into one histogram")
    p.add_argument("--gnuplot", help="write histogram data for gnuplot")

    p = add("bandwidth", help="bits per frame for each read-out configuration")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--bitdepth", type=int, default=12)
    p.add_argument("--output-bits", type=int, default=8)
    p.add_argument("--conv-out", type=int, help="output channels of the fused first layer")
    p.add_argument("--conv-stride", type=int, default=2)
    p.add_argument("--conv-kernel", type=int, default=3)
    p.add_argument("--energy-per-bit", type=float)
    p.add_argument("--csv", action="store_true")
    return parser


def _dtype(args):
    return np.float32 if args.precision == "f32" else np.float64


def _load_bayer(path) -> BayerImage:
    img = load_image(path)
    if not isinstance(img, BayerImage):
        raise ParseError(f"{path}: expected a Bayer PGM")
    return img


def _load_rgb(path) -> RgbImage:
    img = load_image(path)
    if not isinstance(img, RgbImage):
        raise ParseError(f"{path}: expected an RGB PPM")
    return img


def cmd_mosaic(args):
    save_image(args.out, cfa.mosaic(_load_rgb(args.inp), args.pattern))


def cmd_demosaic(args):
    bayer = _load_bayer(args.inp)
    fn = cfa.demosaic_bilinear if args.method == "bilinear" else cfa.demosaic_inpixel
    save_image(args.out, fn(bayer))


def cmd_pixelsim(args):
    bayer = _load_bayer(args.inp)
    config = pixelsim.PixelArrayConfig(
        rows=bayer.height,
        cols=bayer.width,
        bit_depth=bayer.bit_depth,
        read_noise_sigma=args.noise_sigma,
        green_gain_mismatch_sigma=args.mismatch_sigma,
        seed=args.seed,
        pattern=bayer.pattern,
    )
    trace = pixelsim.build_schedule(config, args.schedule)
    if args.trace:
        Path(args.trace).write_text(trace.to_text())
    out = pixelsim.simulate_readout(bayer.to_unit(), config)
    save_image(args.out, out)
    log.info("%d cycles for %d rows (overhead %.3g)", len(trace), config.rows, len(trace) / config.rows)


def _read_pairs(data_dir):
    data_dir = Path(data_dir)
    raw_dir, rgb_dir = data_dir / "raw", data_dir / "rgb"
    if not raw_dir.is_dir() or not rgb_dir.is_dir():
        raise ParseError(f"{data_dir}: expected raw/ and rgb/ subdirectories")
    names = sorted(p.name for p in raw_dir.glob("*.ppm"))
    if not names:
        raise ParseError(f"{raw_dir}: no PPM files")
    raws, rgbs = [], []
    for name in names:
        if not (rgb_dir / name).exists():
            raise ParseError(f"{rgb_dir / name}: missing pair for raw/{name}")
        raws.append(_load_rgb(raw_dir / name).to_unit().planes)
        rgbs.append(_load_rgb(rgb_dir / name).to_unit().planes)
    shapes = {a.shape for a in raws + rgbs}
    if len(shapes) != 1:
        raise ParseError(f"{data_dir}: all images must share one size, found {sorted(shapes)}")
    return np.stack(raws), np.stack(rgbs)


def cmd_invisp_synth(args):
    out = Path(args.out_dir)
    (out / "raw").mkdir(parents=True, exist_ok=True)
    (out / "rgb").mkdir(parents=True, exist_ok=True)
    raw = natural_frames(args.count, args.size, args.seed)
    rgb = isp.synth_isp_oracle(raw)
    for i in range(args.count):
        name = f"{i:05d}.ppm"
        save_image(out / "raw" / name, RgbImage(raw[i], None).to_codes(args.bitdepth))
        save_image(out / "rgb" / name, RgbImage(rgb[i], None).to_codes(args.bitdepth))


def cmd_invisp_train(args):
    raw, rgb = _read_pairs(args.data)
    config = TrainConfig(
        lr=args.lr, steps=args.steps, batch=args.batch, seed=args.seed,
        K=args.K, h=args.hidden, q=args.q, lam=args.lam, checkpoint_every=args.checkpoint_every,
    )
    train(raw, rgb, config, log_path=args.log, checkpoint_path=args.out)


def _apply_one(model, args, src: Path, dst: Path):
    img = _load_rgb(src)
    x = np.asarray(img.to_unit().planes, dtype=_dtype(args))
    fn = model_inverse if args.direction == "rgb2raw" else model_forward
    y = fn(model, x, clamp=True).astype(np.float64)
    out = RgbImage(y, None)
    if args.mosaic:
        bayer = cfa.mosaic(out.to_codes(args.bitdepth or 12), args.mosaic)
        save_image(dst.with_suffix(".pgm"), bayer)
    else:
        save_image(dst, out.to_codes(args.bitdepth or img.bit_depth))


def cmd_invisp_apply(args):
    if args.mosaic and args.direction != "rgb2raw":
        raise UsageError("--mosaic only applies to --direction rgb2raw")
    single = args.inp is not None or args.out is not None
    batch = args.in_dir is not None or args.out_dir is not None
    if single == batch or (single and not (args.inp and args.out)) or (batch and not (args.in_dir and args.out_dir)):
        raise UsageError("give either --in/--out or --in-dir/--out-dir")
    model = load_checkpoint(args.model)
    if single:
        _apply_one(model, args, Path(args.inp), Path(args.out))
        return
    src_dir, dst_dir = Path(args.in_dir), Path(args.out_dir)
    if not src_dir.is_dir():
        raise ParseError(f"{src_dir}: not a directory")
    dst_dir.mkdir(parents=True, exist_ok=True)
    files = sorted(p for p in src_dir.iterdir() if p.is_file())
    images = [p for p in files if p.suffix.lower() == ".ppm"]
    for p in files:
        if p.suffix.lower() != ".ppm":
            shutil.copyfile(p, dst_dir / p.name)
    workers = int(os.environ.get("RAWPIPE_THREADS", "0") or 0)
    workers = workers if workers > 0 else (os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_apply_one, model, args, p, dst_dir / p.name) for p in images]
        for p, fut in zip(images, futures):
            fut.result()
            log.info("converted %s", p.name)


def _read_manifest(path):
    path = Path(path)
    fields = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(f"{path}:{lineno}: expected key=value")
        fields[key.strip()] = value.strip()
    try:
        weights = load_tensor(path.parent / fields["weights"])
        bias = load_tensor(path.parent / fields["bias"])
        stride = int(fields.get("stride", 2))
        out_ch = int(fields.get("out_channels", weights.shape[0]))
        kernel = int(fields.get("kernel", weights.shape[-1]))
    except KeyError as exc:
        raise ParseError(f"{path}: missing field {exc}") from None
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if weights.shape != (out_ch, 3, kernel, kernel):
        raise ParseError(f"{path}: weights shape {weights.shape} != ({out_ch}, 3, {kernel}, {kernel})")
    return p2m.ConvSpec(weights, bias, stride)


def cmd_fuse(args):
    bayer = _load_bayer(args.inp)
    spec = _read_manifest(args.spec) if args.spec else p2m.random_spec(args.seed)
    out = p2m.fused_conv(bayer, spec, args.mode, mismatch_sigma=args.mismatch_sigma, seed=args.seed)
    save_tensor(args.out, out.astype(_dtype(args)))


def _stat_planes(path, pooled):
    img = load_image(path)
    if isinstance(img, BayerImage):
        planes = img.to_unit()[None]
    else:
        planes = np.asarray(img.to_unit().planes)
    if pooled:
        planes = planes.reshape(1, 1, -1)
    return planes


def _print_hist(report, out):
    for p in range(report.planes):
        out.write(f"plane {p}: mean {report.mean[p]:.6g} std {report.std[p]:.6g} pixels {int(report.counts[p].sum())}\n")


def cmd_stats(args):
    if bool(args.inp) == bool(args.compare):
        raise UsageError("give exactly one of --in or --compare")
    if args.hist_bins < 2:
        raise UsageError("--hist-bins must be >= 2")
    if args.inp:
        report = analysis.histogram(load_image(args.inp), args.hist_bins)
        if args.pooled:
            report = analysis.histogram(_stat_planes(args.inp, True), args.hist_bins)
        _print_hist(report, sys.stdout)
        if args.gnuplot:
            Path(args.gnuplot).write_text(report.to_gnuplot())
        return
    a_planes = _stat_planes(args.compare[0], args.pooled)
    b_planes = _stat_planes(args.compare[1], args.pooled)
    if a_planes.shape[0] != b_planes.shape[0]:
        raise ParameterError("plane counts differ; use --pooled to compare Bayer with RGB")
    a = analysis.histogram(a_planes, args.hist_bins)
    b = analysis.histogram(b_planes, args.hist_bins)
    m = analysis.shift_metrics(a, b)
    for p in range(a.planes):
        sys.stdout.write(
            f"plane {p}: mean_delta {m.mean_delta[p]:.6g} std_delta {m.std_delta[p]:.6g} "
            f"intersection {m.intersection_per_plane[p]:.6f}\n"
        )
    sys.stdout.write(f"intersection {m.intersection:.6f}\n")
    if args.gnuplot:
        Path(args.gnuplot).write_text(a.to_gnuplot() + "\n\n" + b.to_gnuplot())


def cmd_bandwidth(args):
    report = analysis.bandwidth_report(
        args.width, args.height, args.bitdepth,
        conv_out_channels=args.conv_out, conv_stride=args.conv_stride, conv_kernel=args.conv_kernel,
        output_bits=args.output_bits, energy_per_bit=args.energy_per_bit,
    )
    sys.stdout.write(report.to_csv() if args.csv else report.to_text())


COMMANDS = {
    "mosaic": cmd_mosaic,
    "demosaic": cmd_demosaic,
    "pixelsim": cmd_pixelsim,
    "fuse": cmd_fuse,
    "stats": cmd_stats,
    "bandwidth": cmd_bandwidth,
    ("invisp", "synth"): cmd_invisp_synth,
    ("invisp", "train"): cmd_invisp_train,
    ("invisp", "apply"): cmd_invisp_apply,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(name)s: %(message)s")
    key = (args.command, args.action) if args.command == "invisp" else args.command
    try:
        COMMANDS[key](args)
    except UsageError as exc:
        sys.stderr.write(f"{parser.prog}: error: {exc}\n")
        return EXIT_USAGE
    except NumericError as exc:
        sys.stderr.write(f"rawpipe: numeric error: {exc}\n")
        return EXIT_NUMERIC
    except (DataError, OSError) as exc:
        sys.stderr.write(f"rawpipe: {exc}\n")
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
