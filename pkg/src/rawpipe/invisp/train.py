"""Supervised Adam training of the invertible ISP on paired (raw, rgb) patches."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from ..core import Prng
from ..errors import DimensionError, NumericError, ParameterError
from .isp import synth_isp_oracle
from .model import InvIspModel, init_model, loss_and_grad, save_checkpoint

log = logging.getLogger(__name__)

LOG_HEADER = "step,loss_fwd,loss_inv,loss_total\n"


@dataclass
class TrainConfig:
    lr: float = 1e-3
    steps: int = 5000
    batch: int = 4
    seed: int = 0
    K: int = 4
    h: int = 32
    q: int = 2
    lam: float = 1.0
    alpha: float = 2.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    checkpoint_every: int = 0


class TrainingDiverged(NumericError):
    """Raised when the loss turns non-finite; ``model`` is the last good state."""

    def __init__(self, message, model, step):
        super().__init__(message)
        self.model = model
        self.step = step


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k in sorted(params):
            g = grads[k]
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def natural_frames(n: int, size: int, seed: int = 0, slope: float = 2.0) -> np.ndarray:
    """Synthetic linear raw frames with natural-image statistics, shape (n, 3, size, size).

    Luminance is a random field with a 1/f**slope power spectrum mapped to
    [0.03, 0.45]; per-channel sensitivities are green-dominant (red and
    blue scaled by 1/2 and 1/1.5) with a low-frequency chroma modulation,
    as in unbalanced camera raw.
    """
    prng = Prng(seed)
    fy = np.fft.fftfreq(size)[:, None]
    fx = np.fft.fftfreq(size)[None, :]
    radius = np.sqrt(fx * fx + fy * fy)
    radius[0, 0] = 1.0
    amp = radius ** (-slope / 2.0)
    amp[0, 0] = 0.0
    lowpass = np.exp(-((radius * size / 3.0) ** 2))

    def field(shape_amp):
        noise = prng.gaussian_array(size * size).reshape(size, size)
        f = np.real(np.fft.ifft2(np.fft.fft2(noise) * shape_amp))
        span = f.max() - f.min()
        return (f - f.min()) / span if span > 0 else np.zeros_like(f)

    out = np.empty((n, 3, size, size))
    sens = np.array([0.5, 1.0, 1.0 / 1.5])
    for i in range(n):
        lum = 0.03 + 0.42 * field(amp)
        for c in range(3):
            chroma = 0.8 + 0.4 * field(lowpass)
            out[i, c] = np.clip(lum * sens[c] * chroma, 0.0, 1.0)
    return out


def synthetic_pairs(n: int, size: int = 32, seed: int = 0):
    """(raw, rgb) training pairs through :func:`synth_isp_oracle`."""
    raw = natural_frames(n, size, seed)
    return raw, synth_isp_oracle(raw)


def psnr(a, b, peak: float = 1.0) -> float:
    mse = float(np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2))
    if mse == 0:
        return float("inf")
    return 10.0 * np.log10(peak * peak / mse)


def train(
    raw,
    rgb,
    config: Optional[TrainConfig] = None,
    log_path=None,
    checkpoint_path=None,
    model: Optional[InvIspModel] = None,
    on_step: Optional[Callable[[int, InvIspModel, float], None]] = None,
) -> InvIspModel:
    """Fit the flow to paired data; deterministic for a given seed.

    ``raw`` and ``rgb`` are (M, 3, H, W) unit-real arrays. Minibatches are
    drawn with replacement from the seeded PRNG. When ``log_path`` is set a
    CSV loss curve is written; ``checkpoint_path`` receives the final model
    and, if ``checkpoint_every`` > 0, periodic snapshots. A non-finite loss
    or a singular mixing matrix aborts with the last good model saved.
    ``on_step(step, model, loss)`` is called after every update.
    """
    config = config or TrainConfig()
    raw = np.asarray(raw, dtype=np.float64)
    rgb = np.asarray(rgb, dtype=np.float64)
    if raw.ndim != 4 or raw.shape != rgb.shape or raw.shape[1] != 3:
        raise DimensionError(f"paired datasets must be (M, 3, H, W) of equal shape, got {raw.shape} and {rgb.shape}")
    if len(raw) == 0:
        raise ParameterError("empty dataset")
    if config.batch < 1 or config.steps < 0:
        raise ParameterError("batch must be >= 1 and steps >= 0")
    if model is None:
        model = init_model(seed=config.seed, K=config.K, h=config.h, q=config.q, alpha=config.alpha, lam=config.lam)
    model.mixes()

    sampler = Prng(config.seed).spawn(1)
    opt = Adam(model.params, config.lr, config.beta1, config.beta2, config.eps)
    logf = open(log_path, "w", newline="") if log_path else None
    try:
        if logf:
            logf.write(LOG_HEADER)
        last_good = model.copy()
        for step in range(1, config.steps + 1):
            idx = sampler.integers(config.batch, len(raw))
            try:
                total, lf, li, grads = loss_and_grad(model, raw[idx], rgb[idx], config.lam)
                opt.step(model.params, grads)
                model.step = step
                model.invalidate()
                model.mixes()
            except NumericError as exc:
                if checkpoint_path:
                    save_checkpoint(checkpoint_path, last_good)
                raise TrainingDiverged(f"training aborted at step {step}: {exc}", last_good, step) from exc
            if logf:
                logf.write(f"{step},{lf!r},{li!r},{total!r}\n")
            if step % 500 == 0:
                log.info("step %d loss %.6g (fwd %.6g, inv %.6g)", step, total, lf, li)
            if on_step is not None:
                on_step(step, model, total)
            last_good = model.copy()
            if checkpoint_path and config.checkpoint_every and step % config.checkpoint_every == 0:
                save_checkpoint(checkpoint_path, model)
    finally:
        if logf:
            logf.close()
    if checkpoint_path:
        save_checkpoint(checkpoint_path, model)
    return model


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
