"""
Building blocks shared by the U-Net, the condition adapter and the text encoder
"""
import math
from typing import Optional, Union

import torch
import torch.nn as nn
import torch.nn.functional as F
from einops import rearrange

from easyctrl.exceptions import ValidationError


def norm_groups(channels: int) -> int:
    """Largest group count in (8, 4, 2, 1) dividing `channels`."""
    for groups in (8, 4, 2, 1):
        if channels % groups == 0:
            return groups
    return 1


def timestep_embedding(t: Union[int, torch.Tensor], dim: int, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """
    Sinusoidal timestep features [sin(t w_k), cos(t w_k)].

    The frequencies w_k are geometric from 1 down to 1e-4.

    Args:
        t: Integer timestep or 1-D tensor of timesteps
        dim: Even embedding width
        dtype: Result dtype

    Returns:
        torch.Tensor: (dim,) for a scalar t, (N, dim) for N timesteps
    """
    if dim % 2:
        raise ValidationError(f"timestep embedding width must be even, got {dim}")
    half = dim // 2
    if half == 1:
        freqs = torch.ones(1, dtype=torch.float64)
    else:
        freqs = torch.exp(-math.log(1e4) * torch.arange(half, dtype=torch.float64) / (half - 1))
    steps = torch.as_tensor(t, dtype=torch.float64)
    if torch.any(steps < 0):
        raise ValidationError("timesteps must be non-negative")
    angles = steps.reshape(-1, 1) * freqs.reshape(1, -1)
    emb = torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1).to(dtype)
    return emb[0] if steps.ndim == 0 else emb


class Attention(nn.Module):
    """
    Multi-head dot-product attention over token sequences.
    """

    def __init__(self, dim: int, heads: int, context_dim: Optional[int] = None):
        super().__init__()
        if dim % heads:
            raise ValidationError(f"width {dim} is not divisible by {heads} heads")
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        context_dim = context_dim or dim
        self.to_q = nn.Linear(dim, dim, bias=False)
        self.to_k = nn.Linear(context_dim, dim, bias=False)
        self.to_v = nn.Linear(context_dim, dim, bias=False)
        self.to_out = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor, context: Optional[torch.Tensor] = None) -> torch.Tensor:
        context = x if context is None else context
        q = rearrange(self.to_q(x), "b n (h d) -> b h n d", h=self.heads)
        k = rearrange(self.to_k(context), "b n (h d) -> b h n d", h=self.heads)
        v = rearrange(self.to_v(context), "b n (h d) -> b h n d", h=self.heads)
        weights = torch.softmax(torch.einsum("bhid,bhjd->bhij", q, k) * self.scale, dim=-1)
        out = torch.einsum("bhij,bhjd->bhid", weights, v)
        return self.to_out(rearrange(out, "b h n d -> b n (h d)"))


class ResBlock(nn.Module):
    """
    Per-frame residual convolution block with additive timestep conditioning.
    """

    def __init__(self, in_channels: int, out_channels: int, time_dim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(norm_groups(in_channels), in_channels)
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.time_proj = nn.Linear(time_dim, out_channels)
        self.norm2 = nn.GroupNorm(norm_groups(out_channels), out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1)
        self.skip = nn.Conv2d(in_channels, out_channels, 1) if in_channels != out_channels else nn.Identity()

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time_proj(F.silu(temb))[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return self.skip(x) + h


class SpatialAttention(nn.Module):
    """
    Per-frame self-attention over pixels followed by cross-attention to the text context.
    """

    def __init__(self, channels: int, heads: int, context_dim: int):
        super().__init__()
        self.norm_self = nn.LayerNorm(channels)
        self.self_attn = Attention(channels, heads)
        self.norm_cross = nn.LayerNorm(channels)
        self.cross_attn = Attention(channels, heads, context_dim=context_dim)

    def forward(self, x: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        height, width = x.shape[-2:]
        tokens = rearrange(x, "m c h w -> m (h w) c")
        tokens = tokens + self.self_attn(self.norm_self(tokens))
        tokens = tokens + self.cross_attn(self.norm_cross(tokens), context)
        return rearrange(tokens, "m (h w) c -> m c h w", h=height, w=width)


class TemporalLayer(nn.Module):
    """
    Temporal self-attention over the frame axis followed by a width-3 temporal convolution.

    Both branches are residual and their output projections start at zero, so a
    fresh layer is the identity. Inputs are (N, F, C, H, W).
    """

    def __init__(self, channels: int, heads: int):
        super().__init__()
        self.norm = nn.LayerNorm(channels)
        self.attn = Attention(channels, heads)
        self.conv = nn.Conv1d(channels, channels, 3, padding=1)
        nn.init.zeros_(self.attn.to_out.weight)
        nn.init.zeros_(self.attn.to_out.bias)
        nn.init.zeros_(self.conv.weight)
        nn.init.zeros_(self.conv.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        n, _, _, height, width = x.shape
        tokens = rearrange(x, "n f c h w -> (n h w) f c")
        tokens = tokens + self.attn(self.norm(tokens))
        seq = rearrange(tokens, "m f c -> m c f")
        seq = seq + self.conv(seq)
        return rearrange(seq, "(n h w) c f -> n f c h w", n=n, h=height, w=width)


class Downsample(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, stride=2, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(x)


class Upsample(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(F.interpolate(x, scale_factor=2, mode="nearest"))


def zero_conv(x: torch.Tensor, kernel: torch.Tensor, bias: Optional[torch.Tensor] = None) -> torch.Tensor:
    """
    1x1 convolution written as a channel contraction.

    An all-zero kernel (and bias) yields an exact-zero tensor for any finite x.

    Args:
        x: Input (M, C_in, H, W)
        kernel: (C_out, C_in) or (C_out, C_in, 1, 1)
        bias: Optional (C_out,)

    Returns:
        torch.Tensor: (M, C_out, H, W)
    """
    if kernel.ndim == 4:
        if kernel.shape[-2:] != (1, 1):
            raise ValidationError(f"zero convolution kernels are 1x1, got {tuple(kernel.shape)}")
        kernel = kernel[:, :, 0, 0]
    if kernel.ndim != 2 or x.ndim != 4 or kernel.shape[1] != x.shape[1]:
        raise ValidationError(
            f"kernel {tuple(kernel.shape)} does not match input channels of {tuple(x.shape)}"
        )
    out = torch.einsum("oc,mchw->mohw", kernel, x)
    if bias is not None:
        out = out + bias[None, :, None, None]
    return out


class ZeroConv(nn.Module):
    """
    Zero-initialized 1x1 convolution.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.weight = nn.Parameter(torch.zeros(channels, channels))
        self.bias = nn.Parameter(torch.zeros(channels))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return zero_conv(x, self.weight, self.bias)
