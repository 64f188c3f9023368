"""
Exactly invertible latent codec standing in for a video autoencoder

encode: space-to-depth on every frame, then x -> (x - offset) * scale.
Packed channel order is channel-major, then patch row, then patch column, so
latent channel k = c * p * p + py * p + px holds pixel (c, y * p + py, x * p + px).
"""
import torch
from einops import rearrange
from pydantic import BaseModel, ConfigDict, Field

from easyctrl.exceptions import ValidationError

LATENT_DTYPE = torch.float64


class CodecConfig(BaseModel):
    """
    Configuration of the space-to-depth codec
    """
    model_config = ConfigDict(extra="forbid")

    patch: int = Field(default=2, ge=1)
    scale: float = 2.0
    offset: float = 0.5

    @property
    def latent_channels(self) -> int:
        return 3 * self.patch * self.patch


def encode_video(video: torch.Tensor, cfg: CodecConfig) -> torch.Tensor:
    """
    Encode a pixel video F x 3 x H x W into a latent F x 3p^2 x H/p x W/p.

    The affine map runs in float64; for float32 pixels in {0} U [2^-29, 1]
    `decode_video(encode_video(v))` reproduces v bit for bit.

    Args:
        video: Pixel video with values in [0, 1]
        cfg: Codec configuration

    Returns:
        torch.Tensor: float64 latent video
    """
    if video.ndim != 4 or video.shape[1] != 3:
        raise ValidationError(f"expected an F x 3 x H x W video, got shape {tuple(video.shape)}")
    p = cfg.patch
    height, width = video.shape[-2:]
    if height % p or width % p:
        raise ValidationError(f"frame size {height}x{width} is not divisible by patch {p}")
    packed = rearrange(video.to(LATENT_DTYPE), "f c (h p1) (w p2) -> f (c p1 p2) h w", p1=p, p2=p)
    return (packed - cfg.offset) * cfg.scale


def decode_video(latent: torch.Tensor, cfg: CodecConfig, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """
    Exact inverse of encode_video.

    Args:
        latent: Latent video F x 3p^2 x h x w
        cfg: Codec configuration
        dtype: Pixel dtype of the result

    Returns:
        torch.Tensor: Pixel video F x 3 x hp x wp
    """
    p = cfg.patch
    if latent.ndim != 4 or latent.shape[1] % (3 * p * p):
        raise ValidationError(
            f"latent channel count must be a multiple of {3 * p * p}, got shape {tuple(latent.shape)}"
        )
    if latent.shape[1] != 3 * p * p:
        raise ValidationError(f"expected {3 * p * p} latent channels, got {latent.shape[1]}")
    pixels = latent.to(LATENT_DTYPE) / cfg.scale + cfg.offset
    return rearrange(pixels, "f (c p1 p2) h w -> f c (h p1) (w p2)", p1=p, p2=p).to(dtype)


def encode_image(image: torch.Tensor, cfg: CodecConfig) -> torch.Tensor:
    """Encode a single 3 x H x W image into a 1 x 3p^2 x h x w latent."""
    return encode_video(image.unsqueeze(0), cfg)
