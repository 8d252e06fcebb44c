"""Image containers, file formats, normalization and the shared PRNG."""
from .images import (
    CFA_PATTERNS,
    BayerImage,
    RgbImage,
    adc_max,
    normalize,
    normalize_array,
)
from .prng import Prng, gaussian_field, splitmix64_mix, uniform_field
from .formats import (
    load_image,
    save_image,
    load_pgm,
    save_pgm,
    load_ppm,
    save_ppm,
    load_tensor,
    save_tensor,
    read_tensor_blob,
    tensor_to_bytes,
)

__all__ = [
    "CFA_PATTERNS",
    "BayerImage",
    "RgbImage",
    "adc_max",
    "normalize",
    "normalize_array",
    "Prng",
    "gaussian_field",
    "uniform_field",
    "splitmix64_mix",
    "load_image",
    "save_image",
    "load_pgm",
    "save_pgm",
    "load_ppm",
    "save_ppm",
    "load_tensor",
    "save_tensor",
    "read_tensor_blob",
    "tensor_to_bytes",
]
