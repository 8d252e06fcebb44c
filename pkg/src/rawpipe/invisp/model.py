"""Invertible ISP: squeeze, then K rounds of (channel mix, affine coupling), then unsqueeze."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ..core import Prng, RgbImage, read_tensor_blob, tensor_to_bytes
from ..errors import DimensionError, EncodingError, NumericError, ParameterError, ParseError
from . import layers
from .layers import MixMatrix, squeeze, unsqueeze

CHECKPOINT_MAGIC = b"IISP"
CHECKPOINT_VERSION = 1
SUBNETS = ("r", "s", "t")


@dataclass
class InvIspModel:
    q: int = 2
    K: int = 4
    h: int = 32
    alpha: float = 2.0
    lam: float = 1.0
    seed: int = 0
    step: int = 0
    d: Optional[int] = None
    params: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.q < 1 or self.K < 1 or self.h < 1:
            raise ParameterError("q, K and h must be positive")
        if self.d is None:
            self.d = self.D // 2
        if not 0 < self.d < self.D:
            raise ParameterError(f"partition d={self.d} must satisfy 0 < d < {self.D}")
        self._mixes = None

    @property
    def D(self) -> int:
        return 3 * self.q * self.q

    @property
    def n_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def mixes(self):
        """Per-block :class:`MixMatrix`, rebuilt after :meth:`invalidate`."""
        if self._mixes is None:
            self._mixes = [MixMatrix(self.params[f"block{k}.W"]) for k in range(self.K)]
        return self._mixes

    def invalidate(self):
        self._mixes = None

    def copy(self) -> "InvIspModel":
        out = InvIspModel(self.q, self.K, self.h, self.alpha, self.lam, self.seed, self.step, self.d)
        out.params = {k: v.copy() for k, v in self.params.items()}
        return out

    def header(self) -> Dict[str, str]:
        return {
            "q": str(self.q),
            "K": str(self.K),
            "h": str(self.h),
            "d": str(self.d),
            "alpha": repr(float(self.alpha)),
            "lambda": repr(float(self.lam)),
            "seed": str(self.seed),
            "step": str(self.step),
        }

    # -- array-level evaluation ------------------------------------------------

    def _check_input(self, x):
        x = np.asarray(x)
        if x.ndim == 3:
            x = x[None]
        if x.ndim != 4 or x.shape[1] != 3:
            raise DimensionError(f"expected (N, 3, H, W) input, got {x.shape}")
        if x.dtype not in (np.float32, np.float64):
            x = x.astype(np.float64)
        return x

    def _cast(self, dtype):
        if dtype == np.float64:
            return self.params
        return {k: v.astype(dtype) for k, v in self.params.items()}

    def forward_array(self, x, keep_cache=False):
        x = self._check_input(x)
        params = self._cast(x.dtype)
        z = squeeze(x, self.q)
        caches = []
        for k, mix in enumerate(self.mixes()):
            zin = z
            z = layers.mix_apply(mix.w, z)
            z, cc = layers.coupling_forward(params, f"block{k}.", z, self.d, self.alpha)
            _check_finite(z, k)
            if keep_cache:
                caches.append((zin, cc))
        y = unsqueeze(z, self.q)
        return (y, caches) if keep_cache else y

    def inverse_array(self, y, keep_cache=False):
        y = self._check_input(y)
        params = self._cast(y.dtype)
        z = squeeze(y, self.q)
        caches = []
        mixes = self.mixes()
        for k in reversed(range(self.K)):
            z, cc = layers.coupling_inverse(params, f"block{k}.", z, self.d, self.alpha)
            zin = z
            z = layers.mix_apply(mixes[k].inv, z)
            _check_finite(z, k)
            if keep_cache:
                caches.append((zin, cc))
        x = unsqueeze(z, self.q)
        return (x, caches) if keep_cache else x

    def backward_forward(self, caches, dy, grads):
        """Backprop through :meth:`forward_array`; returns dL/dx."""
        dz = squeeze(dy, self.q)
        mixes = self.mixes()
        for k in reversed(range(self.K)):
            zin, cc = caches[k]
            dz = layers.coupling_forward_backward(self.params, f"block{k}.", cc, dz, self.d, grads)
            dz, dw = layers.mix_backward(mixes[k].w, zin, dz)
            layers._accum(grads, f"block{k}.W", dw)
        return unsqueeze(dz, self.q)

    def backward_inverse(self, caches, dx, grads):
        """Backprop through :meth:`inverse_array`; returns dL/dy."""
        dz = squeeze(dx, self.q)
        mixes = self.mixes()
        # caches were recorded from block K-1 down to 0
        for k, (zin, cc) in zip(range(self.K), reversed(caches)):
            dz, dw = layers.mix_inverse_backward(mixes[k], zin, dz)
            layers._accum(grads, f"block{k}.W", dw)
            dz = layers.coupling_inverse_backward(self.params, f"block{k}.", cc, dz, self.d, grads)
        return unsqueeze(dz, self.q)


def _check_finite(z, k):
    if not np.all(np.isfinite(z)):
        raise NumericError("non-finite activation", block=k)


def init_model(
    seed: int = 0,
    K: int = 4,
    h: int = 32,
    q: int = 2,
    alpha: float = 2.0,
    lam: float = 1.0,
    d: Optional[int] = None,
    final_scale: float = 0.0,
    bias_scale: float = 0.0,
    hidden_scale: float = 1.0,
) -> InvIspModel:
    """Seeded initialization.

    Mixing matrices are orthonormal (QR of a Gaussian matrix, sign-fixed).
    First subnet stages use He-scaled Gaussians. With ``final_scale=0`` the
    last stage of every subnet is zero, so each coupling is the identity.
    Non-zero ``final_scale``/``bias_scale`` give fully random models for
    testing.
    """
    model = InvIspModel(q=q, K=K, h=h, alpha=alpha, lam=lam, seed=seed, d=d)
    prng = Prng(seed)
    D, dd = model.D, model.d
    io = {"r": (D - dd, dd), "s": (dd, D - dd), "t": (dd, D - dd)}
    params = {}
    for k in range(K):
        a = prng.gaussian_array(D * D).reshape(D, D)
        qm, rm = np.linalg.qr(a)
        qm = qm * np.where(np.diag(rm) < 0, -1.0, 1.0)[None, :]
        params[f"block{k}.W"] = qm
        for name in SUBNETS:
            cin, cout = io[name]
            pre = f"block{k}.{name}."
            std1 = hidden_scale * np.sqrt(2.0 / (cin * 9))
            params[pre + "w1"] = prng.gaussian_array(h * cin * 9, std1).reshape(h, cin, 3, 3)
            params[pre + "b1"] = prng.gaussian_array(h, bias_scale)
            std2 = final_scale * np.sqrt(1.0 / (h * 9))
            params[pre + "w2"] = prng.gaussian_array(cout * h * 9, std2).reshape(cout, h, 3, 3)
            params[pre + "b2"] = prng.gaussian_array(cout, bias_scale)
    model.params = params
    return model


def model_forward(model: InvIspModel, raw, clamp: bool = False):
    """Raw to RGB. Accepts a unit-real RgbImage or a (..., 3, H, W) array."""
    return _apply(model.forward_array, raw, clamp)


def model_inverse(model: InvIspModel, rgb, clamp: bool = False):
    """RGB to raw."""
    return _apply(model.inverse_array, rgb, clamp)


def _apply(fn, x, clamp):
    if isinstance(x, RgbImage):
        if not x.unit_real:
            raise EncodingError("flow input must be unit-real; call to_unit() first")
        out = fn(x.planes)[0]
        if clamp:
            out = np.clip(out, 0.0, 1.0)
        return RgbImage(out, None)
    arr = np.asarray(x)
    out = fn(arr)
    if arr.ndim == 3:
        out = out[0]
    return np.clip(out, 0.0, 1.0) if clamp else out


def loss_and_grad(model: InvIspModel, raw, rgb, lam: Optional[float] = None):
    """Bidirectional L2 loss and analytic gradients.

    ``loss = mean((f(raw) - rgb)**2) + lam * mean((f^-1(rgb) - raw)**2)``

    Returns ``(loss_total, loss_fwd, loss_inv, grads)``.
    """
    lam = model.lam if lam is None else lam
    raw = np.asarray(raw, dtype=np.float64)
    rgb = np.asarray(rgb, dtype=np.float64)
    if raw.ndim == 3:
        raw, rgb = raw[None], rgb[None]
    if raw.shape != rgb.shape or raw.shape[0] == 0:
        raise DimensionError(f"paired batch shapes differ or empty: {raw.shape} vs {rgb.shape}")
    grads = {k: np.zeros_like(v) for k, v in model.params.items()}

    y, fcache = model.forward_array(raw, keep_cache=True)
    diff_f = y - rgb
    loss_fwd = float(np.mean(diff_f * diff_f))
    model.backward_forward(fcache, (2.0 / diff_f.size) * diff_f, grads)

    loss_inv = 0.0
    if lam != 0:
        x, icache = model.inverse_array(rgb, keep_cache=True)
        diff_i = x - raw
        loss_inv = float(np.mean(diff_i * diff_i))
        model.backward_inverse(icache, (2.0 * lam / diff_i.size) * diff_i, grads)

    total = loss_fwd + lam * loss_inv
    if not np.isfinite(total):
        raise NumericError("non-finite loss")
    return total, loss_fwd, loss_inv, grads


# ---- checkpoint file ----------------------------------------------------------


def checkpoint_bytes(model: InvIspModel) -> bytes:
    header = "".join(f"{k}={v}\n" for k, v in model.header().items()).encode("utf-8")
    out = [CHECKPOINT_MAGIC, bytes([CHECKPOINT_VERSION]), struct.pack("<I", len(header)), header]
    for name in sorted(model.params):
        raw_name = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw_name)))
        out.append(raw_name)
        out.append(tensor_to_bytes(np.asarray(model.params[name], dtype=np.float64)))
    return b"".join(out)


def parse_checkpoint(buf: bytes) -> InvIspModel:
    if buf[:4] != CHECKPOINT_MAGIC:
        raise ParseError("bad checkpoint magic", 0)
    if len(buf) < 9:
        raise ParseError("truncated checkpoint header", len(buf))
    if buf[4] != CHECKPOINT_VERSION:
        raise ParseError(f"unsupported checkpoint version {buf[4]}", 4)
    (hlen,) = struct.unpack_from("<I", buf, 5)
    pos = 9
    if len(buf) < pos + hlen:
        raise ParseError("truncated checkpoint header", len(buf))
    meta = {}
    try:
        text = buf[pos : pos + hlen].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("checkpoint header is not UTF-8", pos + exc.start) from None
    for line in text.splitlines():
        if line:
            key, sep, value = line.partition("=")
            if not sep:
                raise ParseError(f"bad header line {line!r}", pos)
            meta[key] = value
    pos += hlen
    try:
        model = InvIspModel(
            q=int(meta["q"]),
            K=int(meta["K"]),
            h=int(meta["h"]),
            d=int(meta["d"]),
            alpha=float(meta["alpha"]),
            lam=float(meta["lambda"]),
            seed=int(meta["seed"]),
            step=int(meta["step"]),
        )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad checkpoint header: {exc}", 9) from None
    while pos < len(buf):
        if len(buf) < pos + 2:
            raise ParseError("truncated tensor record", pos)
        (nlen,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos : pos + nlen].decode("utf-8")
        pos += nlen
        arr, pos = read_tensor_blob(buf, pos)
        model.params[name] = arr.astype(np.float64)
    _check_param_shapes(model)
    return model


def _check_param_shapes(model):
    D, d, h = model.D, model.d, model.h
    io = {"r": (D - d, d), "s": (d, D - d), "t": (d, D - d)}
    for k in range(model.K):
        expected = {f"block{k}.W": (D, D)}
        for name, (cin, cout) in io.items():
            pre = f"block{k}.{name}."
            expected.update(
                {pre + "w1": (h, cin, 3, 3), pre + "b1": (h,), pre + "w2": (cout, h, 3, 3), pre + "b2": (cout,)}
            )
        for key, shape in expected.items():
            if key not in model.params:
                raise ParseError(f"checkpoint lacks tensor {key}")
            if model.params[key].shape != shape:
                raise ParseError(f"tensor {key} has shape {model.params[key].shape}, expected {shape}")


def save_checkpoint(path, model: InvIspModel) -> None:
    from ..core.formats import _write_atomic

    _write_atomic(path, checkpoint_bytes(model))


def load_checkpoint(path) -> InvIspModel:
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read())
