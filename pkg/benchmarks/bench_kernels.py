"""Compare the compiled kernels against the numpy fallback.

Each backend runs in its own interpreter (``RAWPIPE_PURE`` selects the
fallback) so both are timed through the public entry points.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, timeit
import numpy as np
import rawpipe
from rawpipe._backend import kernels
from rawpipe.cfa import demosaic_bilinear, demosaic_inpixel
from rawpipe.core import BayerImage, Prng
from rawpipe.invisp import init_model, loss_and_grad, synthetic_pairs
from rawpipe.p2m import fused_conv, random_spec

repeat = int(sys.argv[1])
frame = BayerImage(Prng(1).integers(512 * 512, 4096).reshape(512, 512), 12)
spec = random_spec(2)
x = Prng(3).gaussian_array(4 * 32 * 32 * 16).reshape(4, 32, 32, 16)
spread = Prng(4).gaussian_array(4 * 32 * 32 * 9 * 16).reshape(4, 32, 32, 9, 16)
model = init_model(seed=0, final_scale=1.0, bias_scale=0.1)
raw, rgb = synthetic_pairs(4, size=32, seed=0)

cases = {
    "demosaic_inpixel 512x512": lambda: demosaic_inpixel(frame),
    "demosaic_bilinear 512x512": lambda: demosaic_bilinear(frame),
    "fused_conv 512x512": lambda: fused_conv(frame, spec),
    "im2col3 4x32x32x16": lambda: kernels.im2col3(x),
    "tapsum3 4x32x32x9x16": lambda: kernels.tapsum3(spread),
    "training step batch 4": lambda: loss_and_grad(model, raw, rgb),
}
out = {"backend": rawpipe.BACKEND}
for name, fn in cases.items():
    fn()
    out[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
print(json.dumps(out))
"""


def measure(pure, repeat):
    env = dict(os.environ, RAWPIPE_PURE="1" if pure else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fast, slow = measure(False, args.repeat), measure(True, args.repeat)
    if fast["backend"] != "cython":
        print("compiled extension not available; both columns use the fallback")
    print(f"{'case':<28}{'cython ms':>12}{'python ms':>12}{'speedup':>10}")
    for name in fast:
        if name == "backend":
            continue
        a, b = fast[name] * 1e3, slow[name] * 1e3
        print(f"{name:<28}{a:>12.2f}{b:>12.2f}{b / a:>9.1f}x")


if __name__ == "__main__":
    main()
