from .accounting import buffer_count, ds_conv_params, flops_estimate, param_count, standard_conv_params
from .blocks import ConvBNAct, DilatedResidualBlock, DSConvModule, Projector, impulse_support, zero_branch
from .module import Activation, BatchNorm2d, Conv2d, Module, Sequential

__all__ = [
    "Activation", "BatchNorm2d", "Conv2d", "ConvBNAct", "DSConvModule", "DilatedResidualBlock",
    "Module", "Projector", "Sequential", "buffer_count", "ds_conv_params", "flops_estimate",
    "impulse_support", "param_count", "standard_conv_params", "zero_branch",
]
