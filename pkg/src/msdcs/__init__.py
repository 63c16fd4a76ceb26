"""Multi-scale wavelet-domain compressive sensing codec.

A learned block sampling operator over one-level Haar coefficients,
trained jointly with a multi-stage convolutional reconstruction network,
with compress/decompress/eval workflows exposed through the msdcs CLI.
"""

from .model import (ModelParams, NetConfig, SamplingConfig,
                    derive_measurement_count, enhance1_forward,
                    enhance2_forward, export_matrix, forward, init_params,
                    initial_reconstruct, make_full_rate_model, reconstruct,
                    sample)
from .ops import AdamHyper, ConvSpec, Parameter, adam_step, concat_channels, \
    conv2d, conv2d_backward, depth_to_space, relu, relu_backward, \
    space_to_depth, split_channels
from .metrics import EvalReport, evaluate_set, psnr, ssim
from .training import PatchDataset, TrainConfig, extract_patches, mse_loss, \
    train_all, train_phase
from .wavelet import dwt2, dwt2_backward, idwt2, idwt2_backward

__version__ = "0.1.0"
