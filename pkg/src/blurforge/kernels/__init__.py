"""Forward reference kernels for shift-based video restoration and depth fusion."""

from blurforge.kernels.dat import (
    DatWeights,
    attention_maps,
    cross_attention,
    dat_block,
    fuse_depth,
    gdfn,
    sft_modulate,
    shifted_depth,
)
from blurforge.kernels.ops import conv1x1, dwconv3x3, gelu, layer_norm, softmax
from blurforge.kernels.shift import (
    GssConfig,
    ShiftDirection,
    concat_channels,
    default_gss_config,
    grouped_spatial_shift,
    select_shift_half,
    temporal_shift,
)

__all__ = [
    "DatWeights", "GssConfig", "ShiftDirection", "attention_maps", "concat_channels", "conv1x1",
    "cross_attention", "dat_block", "default_gss_config", "dwconv3x3", "fuse_depth", "gdfn", "gelu",
    "grouped_spatial_shift", "layer_norm", "select_shift_half", "sft_modulate", "shifted_depth",
    "softmax", "temporal_shift",
]
