"""The compiled kernels and the numpy fallback must agree bit for bit."""
import os
import subprocess
import sys

import numpy as np
import pytest

from rawpipe import _fallback
from rawpipe._backend import BACKEND
from rawpipe.cfa import CfaOffsets, _neighbor_tables
from rawpipe.core import CFA_PATTERNS, Prng

try:
    from rawpipe import _kernels
except ImportError:  # extension not built
    _kernels = None

needs_ext = pytest.mark.skipif(_kernels is None, reason="compiled extension not built")


def codes(seed, h, w, b=12):
    return Prng(seed).integers(h * w, 1 << b).reshape(h, w).astype(np.uint16)


def floats(seed, *shape, dtype=np.float64):
    return Prng(seed).gaussian_array(int(np.prod(shape))).reshape(shape).astype(dtype)


def test_backend_name():
    assert BACKEND in ("cython", "python")


def test_pure_env_forces_fallback():
    env = dict(os.environ, RAWPIPE_PURE="1")
    out = subprocess.run(
        [sys.executable, "-c", "import rawpipe; print(rawpipe.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@needs_ext
@pytest.mark.parametrize("pattern", CFA_PATTERNS)
@pytest.mark.parametrize("shape", [(2, 2), (6, 10), (64, 64)])
def test_demosaic_kernels(pattern, shape):
    data = codes(sum(shape), *shape)
    offs = CfaOffsets.for_pattern(pattern).as_array()
    assert np.array_equal(_kernels.demosaic_inpixel(data, offs), _fallback.demosaic_inpixel(data, offs))
    tables = _neighbor_tables(pattern)
    assert np.array_equal(_kernels.demosaic_bilinear(data, *tables), _fallback.demosaic_bilinear(data, *tables))


@needs_ext
@pytest.mark.parametrize("stride, pad, k", [(1, 1, 3), (2, 1, 3), (4, 2, 6), (2, 0, 2), (3, 5, 10)])
def test_conv2d(stride, pad, k):
    x = floats(1, 2, 13, 11)
    w = floats(2, 4, 2, k, k)
    b = floats(3, 4)
    a = _kernels.conv2d(x, w, b, stride, pad)
    f = _fallback.conv2d(x, w, b, stride, pad)
    assert a.shape == f.shape
    assert np.array_equal(a, f)


@needs_ext
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("shape", [(1, 1, 1, 1), (2, 5, 7, 3), (3, 8, 8, 6)])
def test_gather_primitives(dtype, shape):
    x = floats(4, *shape, dtype=dtype)
    a, f = _kernels.im2col3(x), _fallback.im2col3(x)
    assert a.dtype == f.dtype == dtype and np.array_equal(a, f)
    spread = floats(5, *shape[:3], 9, shape[3], dtype=dtype)
    a, f = _kernels.tapsum3(spread), _fallback.tapsum3(spread)
    assert a.dtype == f.dtype == dtype and np.array_equal(a, f)


def test_fallback_tapsum_is_adjoint_of_im2col():
    x = floats(6, 2, 5, 4, 3)
    p = floats(7, 2, 5, 4, 9, 3)
    lhs = np.sum(_fallback.im2col3(x) * p)
    rhs = np.sum(x * _fallback.tapsum3(p[:, :, :, ::-1, :]))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_fallback_conv_bias_and_padding():
    x = np.ones((1, 2, 2))
    w = np.ones((1, 1, 3, 3))
    out = _fallback.conv2d(x, w, np.array([0.5]), 1, 1)
    assert out[0].tolist() == [[4.5, 4.5], [4.5, 4.5]]
