"""
Denoiser, condition adapter and text encoder
"""

from easyctrl.models.layers import timestep_embedding, zero_conv, ZeroConv
from easyctrl.models.textenc import (
    VOCAB,
    TextContext,
    TextEncoder,
    tokenize,
    tokenize_batch,
    encode_text,
)
from easyctrl.models.unet import (
    UNetConfig,
    EncoderTrace,
    AdapterResiduals,
    SpatioTemporalUNet,
    build_unet,
    load_unet,
    unet_forward,
    param_group,
)
from easyctrl.models.adapter import (
    AdapterNet,
    adapter_forward,
    init_adapter_from_unet,
    load_adapter,
    propagate,
)

__all__ = [
    # Layers
    'timestep_embedding',
    'zero_conv',
    'ZeroConv',

    # Text
    'VOCAB',
    'TextContext',
    'TextEncoder',
    'tokenize',
    'tokenize_batch',
    'encode_text',

    # Denoiser
    'UNetConfig',
    'EncoderTrace',
    'AdapterResiduals',
    'SpatioTemporalUNet',
    'build_unet',
    'load_unet',
    'unet_forward',
    'param_group',

    # Adapter
    'AdapterNet',
    'adapter_forward',
    'init_adapter_from_unet',
    'load_adapter',
    'propagate',
]
