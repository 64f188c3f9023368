"""
Condition adapter: a trainable copy of the denoiser's encoder and middle block
whose per-scale outputs reach the frozen decoder through zero convolutions
"""
import logging
import math
from typing import List, Mapping, Optional, Union

import torch
import torch.nn as nn
from einops import rearrange

from easyctrl.core.rng import derive_seed
from easyctrl.exceptions import ValidationError
from easyctrl.models.layers import ZeroConv
from easyctrl.models.textenc import TextContext
from easyctrl.models.unet import (
    AdapterResiduals,
    MiddleBlock,
    SpatioTemporalUNet,
    UNetConfig,
    context_tensor,
    embed_timestep,
    encoder_blocks,
    per_frame,
)

logger = logging.getLogger(__name__)

# adapter prefix -> denoiser prefix of the parameters copied at initialization
COPIED_PREFIXES = {
    "copy.": "spatial.",
    "time.": "embed.time.",
}


class ConditionFeatureExtractor(nn.Module):
    """
    Strided convolution stack H(c) taking a condition image to the latent grid.

    Each stride-2 stage halves the resolution and doubles the channels; the
    final projection to the entry width starts at zero.
    """

    def __init__(self, out_channels: int, patch: int, sample_size: int, hint_channels: int = 16):
        super().__init__()
        if patch < 1 or patch & (patch - 1):
            raise ValidationError(f"codec patch must be a power of two, got {patch}")
        self.resolution = sample_size * patch
        layers: List[nn.Module] = [nn.Conv2d(3, hint_channels, 3, padding=1), nn.SiLU()]
        width = hint_channels
        for _ in range(int(math.log2(patch))):
            layers += [nn.Conv2d(width, width * 2, 3, stride=2, padding=1), nn.SiLU()]
            width *= 2
        self.body = nn.Sequential(*layers)
        self.proj = nn.Conv2d(width, out_channels, 3, padding=1)
        nn.init.zeros_(self.proj.weight)
        nn.init.zeros_(self.proj.bias)

    def forward(self, c: torch.Tensor) -> torch.Tensor:
        if c.ndim == 3:
            c = c.unsqueeze(0)
        if c.ndim != 4 or c.shape[1] != 3:
            raise ValidationError(f"condition must be 3 x H x W or N x 3 x H x W, got {tuple(c.shape)}")
        if tuple(c.shape[-2:]) != (self.resolution, self.resolution):
            raise ValidationError(
                f"condition resolution {tuple(c.shape[-2:])} != training resolution "
                f"{(self.resolution, self.resolution)}"
            )
        return self.proj(self.body(c))


class EncoderCopy(nn.Module):
    """Spatial encoder blocks and middle block, path-compatible with ``spatial.*``."""

    def __init__(self, cfg: UNetConfig):
        super().__init__()
        self.encoder = encoder_blocks(cfg)
        self.middle = MiddleBlock(cfg.channels[-1], cfg)


def propagate(z_t: torch.Tensor, feat: torch.Tensor, entry: nn.Module) -> torch.Tensor:
    """
    Latent-aware condition propagation z' = conv(z) + H(c).

    The condition features are shared by all frames.

    Args:
        z_t: Noisy latent, F x C x h x w or N x F x C x h x w
        feat: Condition features, 1 x c' x h x w or N x c' x h x w
        entry: Entry convolution applied per frame

    Returns:
        torch.Tensor: z' with the rank of z_t and c' channels
    """
    batched = z_t.ndim == 5
    video = z_t if batched else z_t.unsqueeze(0)
    n = video.shape[0]
    conv = rearrange(entry(rearrange(video, "n f c h w -> (n f) c h w")), "(n f) c h w -> n f c h w", n=n)
    if feat.ndim == 3:
        feat = feat.unsqueeze(0)
    if feat.shape[0] not in (1, n) or feat.shape[1:] != conv.shape[2:]:
        raise ValidationError(
            f"condition features {tuple(feat.shape)} do not match conv(z) frames {tuple(conv.shape[2:])}"
        )
    out = conv + feat[:, None]
    return out if batched else out[0]


class AdapterNet(nn.Module):
    """
    Condition adapter for one modality.

    Submodules: ``hint`` (feature extractor H), ``entry`` (conv applied to z),
    ``copy`` (encoder + middle copied from the denoiser), ``time`` (timestep MLP
    copy) and ``zeros`` (B + 1 zero convolutions, the last one for the middle
    output).
    """

    def __init__(self, cfg: UNetConfig, patch: int = 2, hint_channels: int = 16):
        super().__init__()
        self.cfg = cfg
        self.patch = patch
        ch = cfg.channels
        self.hint = ConditionFeatureExtractor(ch[0], patch, cfg.sample_size, hint_channels)
        self.entry = nn.Conv2d(cfg.latent_channels, ch[0], 3, padding=1)
        self.copy = EncoderCopy(cfg)
        self.time = nn.Sequential(
            nn.Linear(cfg.time_dim, cfg.time_dim),
            nn.SiLU(),
            nn.Linear(cfg.time_dim, cfg.time_dim),
        )
        self.zeros = nn.ModuleList([ZeroConv(c) for c in ch] + [ZeroConv(ch[-1])])

    def extract_condition_features(self, c: torch.Tensor) -> torch.Tensor:
        return self.hint(c)

    def forward(self, z_t: torch.Tensor, t: Union[int, torch.Tensor],
                text_ctx: Union[TextContext, torch.Tensor], c: torch.Tensor) -> AdapterResiduals:
        """
        Compute residuals for every encoder scale and the middle block.

        Args:
            z_t: Noisy latent, F x C x h x w or N x F x C x h x w
            t: Timestep (scalar or one per video)
            text_ctx: Text context shared with the denoiser
            c: Condition image, 3 x H x W or N x 3 x H x W, values in [0, 1]

        Returns:
            AdapterResiduals: Frame-flattened residuals aligned with the encoder trace
        """
        feat = self.extract_condition_features(c.to(z_t.dtype))
        z_prime = propagate(z_t, feat, self.entry)
        video = z_prime if z_prime.ndim == 5 else z_prime.unsqueeze(0)
        n, f = video.shape[:2]
        temb = per_frame(embed_timestep(self.time, t, self.cfg.time_dim, n, z_t.dtype), f)
        ctx = per_frame(context_tensor(text_ctx, n), f)

        x = rearrange(video, "n f c h w -> (n f) c h w")
        r = []
        for block, zero in zip(self.copy.encoder, self.zeros):
            x = block(x, temb, ctx)
            r.append(zero(x))
            if block.down is not None:
                x = block.down(x)
        m_prime = self.copy.middle(x, temb, ctx)
        return AdapterResiduals(r=r, rm=self.zeros[-1](m_prime))

    def zero_conv_norms(self) -> List[float]:
        """L2 norms of the zero-convolution kernels."""
        return [float(torch.linalg.vector_norm(z.weight)) for z in self.zeros]


def adapter_forward(z_t: torch.Tensor, t: Union[int, torch.Tensor], text_ctx: Union[TextContext, torch.Tensor],
                    c: torch.Tensor, adapter: AdapterNet) -> AdapterResiduals:
    return adapter(z_t, t, text_ctx, c)


def source_path(path: str) -> Optional[str]:
    """Denoiser path a copied adapter parameter is initialized from, or None."""
    for prefix, target in COPIED_PREFIXES.items():
        if path.startswith(prefix):
            return target + path[len(prefix):]
    return None


def init_adapter_from_unet(source: Union[SpatioTemporalUNet, Mapping[str, torch.Tensor]], cfg: UNetConfig,
                           patch: int = 2, seed: int = 0) -> AdapterNet:
    """
    Build an adapter whose encoder copy starts from the denoiser's spatial weights.

    Args:
        source: Denoiser or its parameter map
        cfg: Denoiser configuration
        patch: Codec patch size (sets the feature extractor's stride plan)
        seed: Run seed; the fresh layers draw from the "init" stream

    Returns:
        AdapterNet: Adapter with zero convolutions and a zero final feature layer
    """
    params = source.state_dict() if isinstance(source, nn.Module) else source
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(derive_seed(seed, "init", 1))
        adapter = AdapterNet(cfg, patch=patch)

    state = adapter.state_dict()
    missing = []
    for path in state:
        src = source_path(path)
        if src is None:
            continue
        if src not in params:
            missing.append(src)
            continue
        if params[src].shape != state[path].shape:
            raise ValidationError(
                f"shape of '{src}' {tuple(params[src].shape)} does not match adapter '{path}' {tuple(state[path].shape)}"
            )
        state[path] = params[src].detach().clone()
    if missing:
        raise ValidationError(f"denoiser parameters missing for the adapter copy: {', '.join(sorted(missing)[:8])}")
    adapter.load_state_dict(state)
    logger.debug(f"Initialized adapter from {sum(1 for p in state if source_path(p))} denoiser tensors")
    return adapter


def load_adapter(params: Mapping[str, torch.Tensor], cfg: UNetConfig, patch: int = 2) -> AdapterNet:
    """Rebuild an adapter from its archived parameters."""
    adapter = AdapterNet(cfg, patch=patch)
    try:
        adapter.load_state_dict(dict(params))
    except RuntimeError as exc:
        raise ValidationError(f"adapter parameters do not match the U-Net config: {exc}") from exc
    return adapter
