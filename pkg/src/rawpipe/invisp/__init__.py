"""Invertible raw <-> RGB mapping built from affine coupling blocks."""
from .isp import (
    SYNTH_COLOR_MATRIX,
    SYNTH_GAMMA,
    SYNTH_WB_GAINS,
    apply_color_matrix,
    gamma_decode,
    gamma_encode,
    inverse_white_balance,
    synth_isp_oracle,
    white_balance,
)
from .layers import MixMatrix, squeeze, unsqueeze
from .model import (
    InvIspModel,
    init_model,
    load_checkpoint,
    loss_and_grad,
    model_forward,
    model_inverse,
    save_checkpoint,
)
from .train import TrainConfig, TrainingDiverged, natural_frames, psnr, synthetic_pairs, train

__all__ = [
    "SYNTH_COLOR_MATRIX", "SYNTH_GAMMA", "SYNTH_WB_GAINS", "apply_color_matrix", "gamma_decode",
    "gamma_encode", "inverse_white_balance", "synth_isp_oracle", "white_balance", "MixMatrix",
    "squeeze", "unsqueeze", "InvIspModel", "init_model", "load_checkpoint", "loss_and_grad",
    "model_forward", "model_inverse", "save_checkpoint", "TrainConfig", "TrainingDiverged",
    "natural_frames", "psnr", "synthetic_pairs", "train",
]
