"""darkblur: low-light blur data synthesis plus a joint enhancement/deblurring
network implemented from scratch with hand-written, finite-difference-verified
backward passes."""

from .blursynth import (
    BlurConfig,
    DarkenConfig,
    DegradeConfig,
    FrameSequence,
    PairResult,
    clipping_reverse,
    interpolate_frames,
    make_pair,
    synth_blur,
)
from .colorcore import (
    Domain,
    ImageF,
    lab_lightness,
    linear_to_srgb,
    load_image,
    resize_bilinear,
    saturation_mask,
    save_image,
    srgb_to_linear,
)
from .darkener import (
    AlphaMap,
    ExposureSpec,
    apply_darkening_curve,
    condition_on_exposure,
    generate_alpha_map,
)
from .degrade import (
    DefocusKernel,
    NoiseParams,
    add_noise,
    convolve2d_reflect,
    generalized_gaussian_kernel,
)
from .network import (
    Adam,
    ForwardTrace,
    EnhanceDeblurNet,
    NetworkConfig,
    TrainSettings,
    backward_and_step,
    compute_loss,
    cosine_lr,
    infer_image,
    train_toy,
)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "AlphaMap",
    "BlurConfig",
    "DarkenConfig",
    "DefocusKernel",
    "DegradeConfig",
    "Domain",
    "ExposureSpec",
    "ForwardTrace",
    "FrameSequence",
    "ImageF",
    "EnhanceDeblurNet",
    "NetworkConfig",
    "NoiseParams",
    "PairResult",
    "TrainSettings",
    "add_noise",
    "apply_darkening_curve",
    "backward_and_step",
    "clipping_reverse",
    "compute_loss",
    "condition_on_exposure",
    "convolve2d_reflect",
    "cosine_lr",
    "generalized_gaussian_kernel",
    "generate_alpha_map",
    "infer_image",
    "interpolate_frames",
    "lab_lightness",
    "linear_to_srgb",
    "load_image",
    "make_pair",
    "resize_bilinear",
    "saturation_mask",
    "save_image",
    "srgb_to_linear",
    "synth_blur",
    "train_toy",
]
