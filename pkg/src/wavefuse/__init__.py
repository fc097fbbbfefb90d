"""Unsupervised wavelet-domain image fusion.

A convolutional autoencoder learns 48-channel feature maps by
self-reconstruction; at inference the feature maps of two source images are
merged in the discrete wavelet domain (regional-energy and l1-norm rules)
and decoded into the fused image. Includes a nine-metric fusion quality
suite and a train/fuse/eval/bench command line.
"""

from .errors import (
    DataError,
    DimensionError,
    FormatError,
    ModelError,
    NumericError,
    StructureError,
    TrainingError,
    VersionError,
)
from .fusionrules import (
    RULES,
    FusionRuleConfig,
    fuse_high_variance,
    fuse_low_regional,
    fuse_l1norm,
    fuse_pyramids,
    l1_activity_weights,
    regional_energy,
)
from .imageio import GrayImage, load_grayscale, quantize_u8, resize_bilinear, save_grayscale
from .metrics import (
    METRIC_NAMES,
    MetricReport,
    cross_entropy_metric,
    entropy,
    evaluate_all,
    fmi,
    ms_ssim,
    q_abf,
    q_nice,
    report_to_json,
    reports_to_csv,
    ssim,
    ssim_with_gradient,
    variance_metric,
)
from .network import (
    ArchitectureSpec,
    LossBreakdown,
    ModelWeights,
    TrainConfig,
    decode,
    encode,
    fuse_images,
    fuse_images_no_dwt,
    init_weights,
    load_model,
    loss,
    loss_and_param_gradients,
    save_model,
    train,
)
from .wavelet import (
    BASES,
    DetailBands,
    SubbandSet,
    WaveletBasis,
    WaveletPyramid,
    dwt2d_level,
    get_basis,
    idwt2d_level,
    wavedec2,
    waverec2,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "DataError", "DimensionError", "FormatError", "ModelError", "NumericError",
    "StructureError", "TrainingError", "VersionError",
    # images
    "GrayImage", "load_grayscale", "save_grayscale", "resize_bilinear", "quantize_u8",
    # wavelets
    "BASES", "WaveletBasis", "get_basis", "SubbandSet", "DetailBands", "WaveletPyramid",
    "dwt2d_level", "idwt2d_level", "wavedec2", "waverec2",
    # fusion rules
    "RULES", "FusionRuleConfig", "regional_energy", "fuse_low_regional",
    "fuse_high_variance", "l1_activity_weights", "fuse_l1norm", "fuse_pyramids",
    # network
    "ArchitectureSpec", "ModelWeights", "TrainConfig", "LossBreakdown", "init_weights",
    "encode", "decode", "loss", "loss_and_param_gradients", "train",
    "fuse_images", "fuse_images_no_dwt", "save_model", "load_model",
    # metrics
    "METRIC_NAMES", "MetricReport", "entropy", "cross_entropy_metric", "variance_metric",
    "ssim", "ssim_with_gradient", "ms_ssim", "fmi", "q_abf", "q_nice",
    "evaluate_all", "reports_to_csv", "report_to_json",
]
