"""
Spatio-temporal U-Net denoiser with adapter-aware skip connections

Parameters are partitioned by their top-level module into three groups:
``spatial.*`` (convolutions, self- and cross-attention), ``temporal.*``
(temporal attention + temporal convolution) and ``embed.*`` (timestep MLP and
text encoder). The freeze policy of adapter training is expressed in terms of
these groups.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple, Union

import torch
import torch.nn as nn
from einops import rearrange
from pydantic import BaseModel, ConfigDict, Field, model_validator

from easyctrl.core.rng import derive_seed
from easyctrl.exceptions import ValidationError
from easyctrl.models.layers import (
    Downsample,
    ResBlock,
    SpatialAttention,
    TemporalLayer,
    Upsample,
    norm_groups,
    timestep_embedding,
)
from easyctrl.models.textenc import MAX_LENGTH, TextContext, TextEncoder

logger = logging.getLogger(__name__)

PARAM_GROUPS = ("spatial", "temporal", "embed")


class UNetConfig(BaseModel):
    """
    Shape configuration of the denoiser
    """
    model_config = ConfigDict(extra="forbid")

    num_blocks: int = Field(default=4, ge=1)
    channels: Tuple[int, ...] = (32, 64, 64, 96)
    frames: int = Field(default=8, ge=1)
    latent_channels: int = Field(default=12, ge=1)
    sample_size: int = Field(default=16, ge=1)
    text_dim: int = Field(default=32, ge=2)
    time_dim: int = Field(default=64, ge=2)
    heads: int = Field(default=2, ge=1)
    max_tokens: int = Field(default=MAX_LENGTH, ge=1)
    temporal: bool = True

    @model_validator(mode="after")
    def _check_shapes(self) -> "UNetConfig":
        if len(self.channels) != self.num_blocks:
            raise ValueError(f"channels has {len(self.channels)} entries, expected num_blocks={self.num_blocks}")
        if any(c <= 0 for c in self.channels):
            raise ValueError("all channel widths must be positive")
        for width in self.channels + (self.text_dim,):
            if width % self.heads:
                raise ValueError(f"width {width} is not divisible by heads={self.heads}")
        if self.time_dim % 2:
            raise ValueError("time_dim must be even")
        if self.sample_size % (2 ** (self.num_blocks - 1)):
            raise ValueError(
                f"sample_size {self.sample_size} is not divisible by 2^{self.num_blocks - 1}"
            )
        return self

    def block_size(self, j: int) -> int:
        """Spatial size of encoder output e_j (1-based): sample_size / 2^(j-1)."""
        return self.sample_size // (2 ** (j - 1))


def param_group(path: str) -> str:
    """
    Group of a parameter path.

    Args:
        path: Dot-separated parameter path

    Returns:
        str: One of PARAM_GROUPS
    """
    head = path.split(".", 1)[0]
    if head not in PARAM_GROUPS:
        raise ValidationError(f"parameter path '{path}' belongs to no group")
    return head


@dataclass
class EncoderTrace:
    """
    Per-block encoder outputs e_1..e_B and the middle output m.

    Tensors are stored frame-flattened as (N*F, c, h, w).
    """
    e: List[torch.Tensor]
    m: torch.Tensor
    batch: int = 1
    frames: int = 1
    batched: bool = False


@dataclass
class AdapterResiduals:
    """
    Zero-convolved adapter outputs aligned with e_1..e_B, plus the middle residual.
    """
    r: List[torch.Tensor]
    rm: torch.Tensor

    def scaled(self, scale: float) -> "AdapterResiduals":
        if scale == 1.0:
            return self
        return AdapterResiduals(r=[x * scale for x in self.r], rm=self.rm * scale)


class EncoderBlock(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, cfg: UNetConfig, downsample: bool):
        super().__init__()
        self.res = ResBlock(in_channels, out_channels, cfg.time_dim)
        self.attn = SpatialAttention(out_channels, cfg.heads, cfg.text_dim)
        self.down = Downsample(out_channels) if downsample else None

    def forward(self, x: torch.Tensor, temb: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        return self.attn(self.res(x, temb), context)


class MiddleBlock(nn.Module):
    def __init__(self, channels: int, cfg: UNetConfig):
        super().__init__()
        self.res = ResBlock(channels, channels, cfg.time_dim)
        self.attn = SpatialAttention(channels, cfg.heads, cfg.text_dim)

    def forward(self, x: torch.Tensor, temb: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        return self.attn(self.res(x, temb), context)


class DecoderBlock(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, cfg: UNetConfig, upsample: bool):
        super().__init__()
        self.res = ResBlock(in_channels, out_channels, cfg.time_dim)
        self.attn = SpatialAttention(out_channels, cfg.heads, cfg.text_dim)
        self.up = Upsample(out_channels) if upsample else None

    def forward(self, x: torch.Tensor, temb: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        return self.attn(self.res(x, temb), context)


def encoder_blocks(cfg: UNetConfig) -> nn.ModuleList:
    """Spatial encoder blocks; the adapter builds its trainable copy from the same factory."""
    ch = cfg.channels
    return nn.ModuleList(
        EncoderBlock(ch[max(i - 1, 0)], ch[i], cfg, downsample=i < cfg.num_blocks - 1)
        for i in range(cfg.num_blocks)
    )


def decoder_skip_index(i: int, num_blocks: int) -> int:
    """Encoder index j (1-based) feeding decoder block i (1-based): i + j = B + 1."""
    return num_blocks + 1 - i


class SpatialLayers(nn.Module):
    def __init__(self, cfg: UNetConfig):
        super().__init__()
        ch = cfg.channels
        B = cfg.num_blocks
        self.stem = nn.Conv2d(cfg.latent_channels, ch[0], 3, padding=1)
        self.encoder = encoder_blocks(cfg)
        self.middle = MiddleBlock(ch[-1], cfg)
        decoder = []
        for i in range(1, B + 1):
            j = decoder_skip_index(i, B)
            previous = ch[-1] if i == 1 else ch[j]
            decoder.append(DecoderBlock(previous + ch[j - 1], ch[j - 1], cfg, upsample=i < B))
        self.decoder = nn.ModuleList(decoder)
        self.out = nn.Sequential(
            nn.GroupNorm(norm_groups(ch[0]), ch[0]),
            nn.SiLU(),
            nn.Conv2d(ch[0], cfg.latent_channels, 3, padding=1),
        )


class TemporalLayers(nn.Module):
    def __init__(self, cfg: UNetConfig):
        super().__init__()
        ch = cfg.channels
        B = cfg.num_blocks
        self.encoder = nn.ModuleList(TemporalLayer(c, cfg.heads) for c in ch)
        self.middle = TemporalLayer(ch[-1], cfg.heads)
        self.decoder = nn.ModuleList(
            TemporalLayer(ch[decoder_skip_index(i, B) - 1], cfg.heads) for i in range(1, B + 1)
        )


class EmbedLayers(nn.Module):
    def __init__(self, cfg: UNetConfig):
        super().__init__()
        self.time = nn.Sequential(
            nn.Linear(cfg.time_dim, cfg.time_dim),
            nn.SiLU(),
            nn.Linear(cfg.time_dim, cfg.time_dim),
        )
        self.text = TextEncoder(dim=cfg.text_dim, heads=cfg.heads, max_length=cfg.max_tokens)


def embed_timestep(mlp: nn.Module, t: Union[int, torch.Tensor], dim: int, batch: int,
                   dtype: torch.dtype) -> torch.Tensor:
    """
    Timestep MLP applied to sinusoidal features, one row per batch item.
    """
    emb = timestep_embedding(t, dim, dtype=dtype)
    if emb.ndim == 1:
        emb = emb.unsqueeze(0).expand(batch, -1)
    elif emb.shape[0] != batch:
        raise ValidationError(f"got {emb.shape[0]} timesteps for a batch of {batch}")
    return mlp(emb)


def per_frame(x: torch.Tensor, frames: int) -> torch.Tensor:
    """Repeat per-video rows for every frame: (N, ...) -> (N*F, ...)."""
    return x.repeat_interleave(frames, dim=0)


def context_tensor(text_ctx: Union[TextContext, torch.Tensor], batch: int) -> torch.Tensor:
    """Normalize a text context to (N, L, D)."""
    ctx = text_ctx.embedded if isinstance(text_ctx, TextContext) else text_ctx
    if ctx.ndim == 2:
        ctx = ctx.unsqueeze(0).expand(batch, -1, -1)
    if ctx.shape[0] != batch:
        raise ValidationError(f"text context batch {ctx.shape[0]} does not match video batch {batch}")
    return ctx


class SpatioTemporalUNet(nn.Module):
    """
    Text-to-video denoiser eps_theta(z_t, t, text).

    Videos are (F, C, h, w) or batched (N, F, C, h, w). Encoder block i runs a
    per-frame residual block, self-attention, text cross-attention and a
    temporal layer; e_i is taken before the block's downsample. Decoder block i
    consumes concat(d_{i-1}, e_j + r_j) with i + j = B + 1 (the middle output
    m + r_m for i = 1).
    """

    def __init__(self, cfg: UNetConfig):
        super().__init__()
        self.cfg = cfg
        self.spatial = SpatialLayers(cfg)
        self.temporal = TemporalLayers(cfg)
        self.embed = EmbedLayers(cfg)

    def _check_latent(self, z_t: torch.Tensor) -> Tuple[torch.Tensor, bool]:
        batched = z_t.ndim == 5
        if not batched:
            if z_t.ndim != 4:
                raise ValidationError(f"expected F x C x h x w latents, got shape {tuple(z_t.shape)}")
            z_t = z_t.unsqueeze(0)
        _, frames, channels, height, width = z_t.shape
        cfg = self.cfg
        if channels != cfg.latent_channels or frames != cfg.frames:
            raise ValidationError(
                f"latent has {frames} frames x {channels} channels, "
                f"config expects {cfg.frames} x {cfg.latent_channels}"
            )
        factor = 2 ** (cfg.num_blocks - 1)
        if height % factor or width % factor:
            raise ValidationError(f"latent size {height}x{width} is not divisible by {factor}")
        return z_t, batched

    def time_embedding(self, t: Union[int, torch.Tensor], batch: int, dtype: torch.dtype) -> torch.Tensor:
        return embed_timestep(self.embed.time, t, self.cfg.time_dim, batch, dtype)

    def _temporal(self, layer: TemporalLayer, x: torch.Tensor, batch: int) -> torch.Tensor:
        if not self.cfg.temporal:
            return x
        video = rearrange(x, "(n f) c h w -> n f c h w", n=batch)
        return rearrange(layer(video), "n f c h w -> (n f) c h w")

    def encode(self, z_t: torch.Tensor, t: Union[int, torch.Tensor],
               text_ctx: Union[TextContext, torch.Tensor]) -> EncoderTrace:
        """
        Run the stem, encoder blocks and middle block.

        Args:
            z_t: Noisy latent video
            t: Timestep (scalar or one per video)
            text_ctx: Embedded text context

        Returns:
            EncoderTrace: e_1..e_B and m
        """
        video, batched = self._check_latent(z_t)
        n, f = video.shape[:2]
        temb = per_frame(self.time_embedding(t, n, video.dtype), f)
        ctx = per_frame(context_tensor(text_ctx, n), f)
        x = self.spatial.stem(rearrange(video, "n f c h w -> (n f) c h w"))
        e = []
        for block, temporal in zip(self.spatial.encoder, self.temporal.encoder):
            x = self._temporal(temporal, block(x, temb, ctx), n)
            e.append(x)
            if block.down is not None:
                x = block.down(x)
        m = self._temporal(self.temporal.middle, self.spatial.middle(x, temb, ctx), n)
        return EncoderTrace(e=e, m=m, batch=n, frames=f, batched=batched)

    def decode(self, trace: EncoderTrace, residuals: Optional[AdapterResiduals],
               t_emb: torch.Tensor, text_ctx: Union[TextContext, torch.Tensor]) -> torch.Tensor:
        """
        Run the decoder on an encoder trace, injecting adapter residuals when given.

        Args:
            trace: Output of encode
            residuals: Adapter residuals, or None for the plain text-to-video model
            t_emb: Timestep embedding, one row per video
            text_ctx: Embedded text context

        Returns:
            torch.Tensor: Predicted noise with the latent's shape
        """
        B = self.cfg.num_blocks
        n, f = trace.batch, trace.frames
        if residuals is not None:
            if len(residuals.r) != B:
                raise ValidationError(f"expected {B} adapter residuals, got {len(residuals.r)}")
            if residuals.rm.shape != trace.m.shape:
                raise ValidationError(
                    f"middle residual shape {tuple(residuals.rm.shape)} != {tuple(trace.m.shape)}"
                )
            for j, (r, e) in enumerate(zip(residuals.r, trace.e), start=1):
                if r.shape != e.shape:
                    raise ValidationError(f"residual {j} shape {tuple(r.shape)} != e_{j} shape {tuple(e.shape)}")
        temb = per_frame(t_emb, f)
        ctx = per_frame(context_tensor(text_ctx, n), f)

        h = trace.m if residuals is None else trace.m + residuals.rm
        for i, (block, temporal) in enumerate(zip(self.spatial.decoder, self.temporal.decoder), start=1):
            j = decoder_skip_index(i, B)
            skip = trace.e[j - 1]
            if residuals is not None:
                skip = skip + residuals.r[j - 1]
            x = self._temporal(temporal, block(torch.cat([h, skip], dim=1), temb, ctx), n)
            h = block.up(x) if block.up is not None else x
        out = rearrange(self.spatial.out(h), "(n f) c h w -> n f c h w", n=n)
        return out if trace.batched else out[0]

    def forward(self, z_t: torch.Tensor, t: Union[int, torch.Tensor],
                text_ctx: Union[TextContext, torch.Tensor],
                residuals: Optional[AdapterResiduals] = None) -> torch.Tensor:
        trace = self.encode(z_t, t, text_ctx)
        t_emb = self.time_embedding(t, trace.batch, z_t.dtype)
        return self.decode(trace, residuals, t_emb, text_ctx)

    def groups(self) -> Dict[str, List[str]]:
        """Parameter paths per group."""
        out: Dict[str, List[str]] = {g: [] for g in PARAM_GROUPS}
        for path, _ in self.named_parameters():
            out[param_group(path)].append(path)
        return out


def unet_forward(z_t: torch.Tensor, t: Union[int, torch.Tensor], text_ctx: Union[TextContext, torch.Tensor],
                 model: SpatioTemporalUNet, residuals: Optional[AdapterResiduals] = None) -> torch.Tensor:
    """Single entry point used by the trainer and the sampler."""
    return model(z_t, t, text_ctx, residuals)


def build_unet(cfg: UNetConfig, seed: int = 0) -> SpatioTemporalUNet:
    """
    Construct a denoiser with parameters drawn from the "init" stream of `seed`.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(derive_seed(seed, "init", 0))
        model = SpatioTemporalUNet(cfg)
    n_params = sum(p.numel() for p in model.parameters())
    logger.debug(f"Built U-Net with {cfg.num_blocks} blocks and {n_params} parameters")
    return model


def load_unet(params: Mapping[str, torch.Tensor], cfg: UNetConfig) -> SpatioTemporalUNet:
    """Rebuild a denoiser from a parameter map (e.g. a loaded archive)."""
    model = SpatioTemporalUNet(cfg)
    own = {k: v for k, v in params.items() if k.split(".", 1)[0] in PARAM_GROUPS}
    missing, unexpected = model.load_state_dict(own, strict=False)
    if missing or unexpected:
        raise ValidationError(
            f"parameter map does not match the U-Net config (missing={missing[:5]}, unexpected={unexpected[:5]})"
        )
    return model
