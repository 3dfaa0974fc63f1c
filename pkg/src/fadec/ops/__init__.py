"""Operator library: float-reference and quantized-integer forms."""

from .activation import (
    ActLut,
    elu_exact,
    entries_quant,
    load_lut,
    lut_apply,
    lut_build,
    lut_query_float,
    lut_to_json,
    relu,
    save_lut,
    sigmoid_exact,
)
from .conv import (
    LEGAL_CONV_SHAPES,
    ConvSpec,
    accumulator_bound,
    check_accumulator_width,
    conv2d_float,
    conv2d_quant,
    conv_output_hw,
)
from .elementwise import concat, eltwise, slice_axis
from .norm import layer_norm
from .resample import Grid, grid_sample, upsample_bilinear, upsample_nearest

__all__ = [
    "ActLut",
    "ConvSpec",
    "Grid",
    "LEGAL_CONV_SHAPES",
    "accumulator_bound",
    "check_accumulator_width",
    "concat",
    "conv2d_float",
    "conv2d_quant",
    "conv_output_hw",
    "eltwise",
    "elu_exact",
    "entries_quant",
    "grid_sample",
    "layer_norm",
    "load_lut",
    "lut_apply",
    "lut_build",
    "lut_query_float",
    "lut_to_json",
    "relu",
    "save_lut",
    "sigmoid_exact",
    "slice_axis",
    "upsample_bilinear",
    "upsample_nearest",
]
