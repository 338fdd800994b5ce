"""Small convolutional networks with hand-written backward passes.

Two hard-wired architectures: a three-layer 7x7 network (channels
64, 32, 1) applied to filtered back-projections, and a configurable small
U-Net with pooling, nearest-neighbor upsampling, skip concatenations and an
optional residual connection.  Training is plain stochastic gradient
descent with heavy-ball momentum on a mean-absolute-error objective.
"""

from .layers import (
    concat_backward,
    concat_forward,
    conv2d_backward,
    conv2d_forward,
    maxpool2_backward,
    maxpool2_forward,
    relu_backward,
    relu_forward,
    upsample2_backward,
    upsample2_forward,
)
from .models import (
    ConvLayerParams,
    NetworkParams,
    apply_network,
    make_network,
    network_backward,
    network_forward,
    param_count,
    snet_apply,
    snet_init,
    unet_apply,
    unet_init,
)
from .training import TrainConfig, TrainingDivergedError, l1_loss_and_grad, train
from .checkpoint import load_params, save_params

__all__ = [
    "ConvLayerParams",
    "NetworkParams",
    "TrainConfig",
    "TrainingDivergedError",
    "apply_network",
    "concat_backward",
    "concat_forward",
    "conv2d_backward",
    "conv2d_forward",
    "l1_loss_and_grad",
    "load_params",
    "make_network",
    "maxpool2_backward",
    "maxpool2_forward",
    "network_backward",
    "network_forward",
    "param_count",
    "relu_backward",
    "relu_forward",
    "save_params",
    "snet_apply",
    "snet_init",
    "train",
    "unet_apply",
    "unet_init",
    "upsample2_backward",
    "upsample2_forward",
]
