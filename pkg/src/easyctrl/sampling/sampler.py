"""
Reverse-process sampling: DDIM updates, classifier-free guidance and VideoInit
"""
import logging
import math
import os
from typing import Literal, Optional, Union

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from easyctrl.conditions.base import ConditionMap, Modality
from easyctrl.conditions.scene import empty_condition
from easyctrl.core.codec import CodecConfig, decode_video, encode_image
from easyctrl.core.rng import standard_normal, stream
from easyctrl.core.schedule import NoiseSchedule
from easyctrl.exceptions import ValidationError
from easyctrl.io.files import write_json
from easyctrl.io.ppm import save_video_frames
from easyctrl.models.adapter import AdapterNet, adapter_forward
from easyctrl.models.textenc import encode_text, tokenize
from easyctrl.models.unet import SpatioTemporalUNet, unet_forward

logger = logging.getLogger(__name__)

# condition modalities whose map is an image of the first frame
IMAGE_MODALITIES = (Modality.RAW_PIXELS,)


class SampleConfig(BaseModel):
    """
    Configuration of the sampler
    """
    model_config = ConfigDict(extra="forbid")

    steps: int = Field(default=20, ge=1)
    eta: float = Field(default=0.0, ge=0.0, le=1.0)
    guidance: float = Field(default=3.0, ge=0.0)
    videoinit_cutoff: float = Field(default=0.25, ge=0.0, le=1.0)
    videoinit_filter: Literal["ideal", "gaussian", "butterworth"] = "ideal"
    butterworth_order: int = Field(default=4, ge=1)
    adapter_scale: float = Field(default=1.0, ge=0.0)
    seed: int = Field(default=0, ge=0)


def radial_frequency(height: int, width: int, dtype: torch.dtype = torch.float64) -> torch.Tensor:
    """
    Normalized radial frequency of every DFT bin, in the unshifted fft2 layout.

    Per-axis frequencies are scaled so Nyquist is 1, and the radius is divided by
    sqrt(2) so the corner bin sits at 1.
    """
    fu = torch.fft.fftfreq(height, dtype=dtype) * 2.0
    fv = torch.fft.fftfreq(width, dtype=dtype) * 2.0
    return torch.sqrt(fu[:, None] ** 2 + fv[None, :] ** 2) / math.sqrt(2.0)


def lowpass_mask(height: int, width: int, f0: float, kind: str = "ideal", order: int = 4) -> torch.Tensor:
    """
    Low-pass weights M(u, v) in [0, 1]; f0 = 0 always gives the zero mask.
    """
    r = radial_frequency(height, width)
    if f0 <= 0.0:
        return torch.zeros_like(r)
    if kind == "ideal":
        return (r <= f0).to(r.dtype)
    if kind == "gaussian":
        return torch.exp(-(r ** 2) / (2.0 * f0 ** 2))
    if kind == "butterworth":
        return 1.0 / (1.0 + (r / f0) ** (2 * order))
    raise ValidationError(f"unknown VideoInit filter '{kind}'")


def videoinit(image_latent: torch.Tensor, noise: torch.Tensor, f0: float, kind: str = "ideal",
              order: int = 4) -> torch.Tensor:
    """
    Splice the image latent's low-frequency band into per-frame noise.

    Per frame and channel: IDFT(M * DFT(image) + (1 - M) * DFT(noise)), real part.

    Args:
        image_latent: 1 x c x h x w (or c x h x w) encoded condition image
        noise: F x c x h x w
        f0: Cutoff in [0, 1] on the normalized radial frequency
        kind: Mask family ("ideal", "gaussian" or "butterworth")
        order: Butterworth order

    Returns:
        torch.Tensor: F x c x h x w initial latent with the dtype of `noise`
    """
    if not 0.0 <= f0 <= 1.0:
        raise ValidationError(f"VideoInit cutoff must lie in [0, 1], got {f0}")
    if image_latent.ndim == 3:
        image_latent = image_latent.unsqueeze(0)
    if image_latent.ndim != 4 or image_latent.shape[0] != 1 or image_latent.shape[1:] != noise.shape[1:]:
        raise ValidationError(
            f"image latent {tuple(image_latent.shape)} is incompatible with noise {tuple(noise.shape)}"
        )
    mask = lowpass_mask(noise.shape[-2], noise.shape[-1], f0, kind, order)
    image_freq = torch.fft.fft2(image_latent.to(torch.float64)).expand(noise.shape)
    noise_freq = torch.fft.fft2(noise.to(torch.float64))
    mixed = mask * image_freq + (1.0 - mask) * noise_freq
    return torch.fft.ifft2(mixed).real.to(noise.dtype)


def cfg_combine(eps_cond: torch.Tensor, eps_uncond: torch.Tensor, w: float) -> torch.Tensor:
    """
    Classifier-free guidance eps_uncond + w * (eps_cond - eps_uncond).

    w = 1 returns eps_cond and w = 0 returns eps_uncond unchanged.
    """
    if eps_cond.shape != eps_uncond.shape:
        raise ValidationError(
            f"guidance branches differ in shape: {tuple(eps_cond.shape)} vs {tuple(eps_uncond.shape)}"
        )
    if w == 1.0:
        return eps_cond
    if w == 0.0:
        return eps_uncond
    return eps_uncond + w * (eps_cond - eps_uncond)


def ddim_step(z_t: torch.Tensor, eps_hat: torch.Tensor, t: int, t_prev: int, sched: NoiseSchedule,
              eta: float = 0.0, rng: Optional[np.random.Generator] = None) -> torch.Tensor:
    """
    One DDIM update from t to t_prev.

    z0 = (z_t - sigma_t eps) / alpha_t and
    z_prev = alpha_prev z0 + sqrt(sigma_prev^2 - tau^2) eps + tau xi, with
    tau = eta (sigma_prev / sigma_t) sqrt(1 - alpha_t^2 / alpha_prev^2).

    Args:
        z_t: Current latent
        eps_hat: Guided noise prediction
        t: Current timestep
        t_prev: Target timestep, t > t_prev >= 0
        sched: Noise schedule
        eta: Stochasticity; 0 is deterministic
        rng: Source of xi (required when eta > 0)

    Returns:
        torch.Tensor: z_{t_prev}
    """
    if not 0 <= t_prev < t <= sched.T:
        raise ValidationError(f"DDIM needs 0 <= t_prev < t <= {sched.T}, got t={t}, t_prev={t_prev}")
    a_t, s_t = float(sched.alpha[t]), float(sched.sigma[t])
    a_p, s_p = float(sched.alpha[t_prev]), float(sched.sigma[t_prev])
    z0 = (z_t - s_t * eps_hat) / a_t
    tau = eta * (s_p / s_t) * math.sqrt(max(1.0 - a_t ** 2 / a_p ** 2, 0.0))
    direction = math.sqrt(max(s_p ** 2 - tau ** 2, 0.0))
    z_prev = a_p * z0 + direction * eps_hat
    if tau > 0.0:
        if rng is None:
            raise ValidationError("eta > 0 needs a random stream")
        xi = torch.from_numpy(standard_normal(rng, tuple(z_t.shape), dtype=np.float64)).to(z_t.dtype)
        z_prev = z_prev + tau * xi
    return z_prev


def ddim_timesteps(T: int, steps: int) -> np.ndarray:
    """Uniform stride T -> 0 in `steps` updates, rounded to integers."""
    if not 1 <= steps <= T:
        raise ValidationError(f"sampling steps must lie in [1, {T}], got {steps}")
    return np.rint(np.linspace(T, 0, steps + 1)).astype(np.int64)


def initial_latent(condition: Optional[ConditionMap], cfg: SampleConfig, shape, codec_cfg: CodecConfig,
                   dtype: torch.dtype) -> torch.Tensor:
    """
    z_T: noise from the "noise" stream, with VideoInit applied for image conditions when f0 > 0.
    """
    noise = torch.from_numpy(standard_normal(stream(cfg.seed, "noise", 0), shape, dtype=np.float64)).to(dtype)
    if condition is None or condition.modality not in IMAGE_MODALITIES or cfg.videoinit_cutoff <= 0.0:
        return noise
    image_latent = encode_image(condition.to_tensor(), codec_cfg).to(dtype)
    return videoinit(image_latent, noise, cfg.videoinit_cutoff, cfg.videoinit_filter, cfg.butterworth_order)


@torch.no_grad()
def generate(model: SpatioTemporalUNet, adapter: Optional[AdapterNet], condition: Optional[ConditionMap],
             caption: str, cfg: SampleConfig, codec_cfg: CodecConfig, sched: NoiseSchedule,
             progress_bar: bool = False) -> np.ndarray:
    """
    Sample one video.

    Each step evaluates the conditional branch (condition, caption) and, unless
    guidance is 1, the unconditional branch (empty condition, "") and combines
    them with cfg_combine.

    Args:
        model: Denoiser
        adapter: Condition adapter, or None for plain text-to-video
        condition: Condition map (required with an adapter; without one it only drives VideoInit)
        caption: Prompt
        cfg: Sampler configuration
        codec_cfg: Codec configuration
        sched: Noise schedule

    Returns:
        np.ndarray: F x 3 x H x W float32 pixels in [0, 1]
    """
    if adapter is not None and condition is None:
        raise ValidationError("sampling with an adapter needs a condition map")
    ucfg = model.cfg
    resolution = ucfg.sample_size * codec_cfg.patch
    if condition is not None and (condition.height, condition.width) != (resolution, resolution):
        raise ValidationError(
            f"condition is {condition.height}x{condition.width}, the model generates {resolution}x{resolution}"
        )
    timesteps = ddim_timesteps(sched.T, cfg.steps)
    dtype = next(model.parameters()).dtype
    shape = (ucfg.frames, ucfg.latent_channels, ucfg.sample_size, ucfg.sample_size)

    ctx_cond = encode_text(torch.tensor(tokenize(caption, ucfg.max_tokens)), model.embed.text)
    ctx_uncond = encode_text(torch.tensor(tokenize("", ucfg.max_tokens)), model.embed.text)
    if adapter is not None:
        c_cond = condition.to_tensor()
        c_uncond = empty_condition(resolution, resolution).to_tensor()

    def branch(z: torch.Tensor, t: int, ctx, c: Optional[torch.Tensor]) -> torch.Tensor:
        residuals = None
        if adapter is not None:
            residuals = adapter_forward(z, t, ctx, c, adapter).scaled(cfg.adapter_scale)
        return unet_forward(z, t, ctx, model, residuals)

    z = initial_latent(condition, cfg, shape, codec_cfg, dtype)
    steps = list(zip(timesteps[:-1], timesteps[1:]))
    if progress_bar:
        steps = tqdm(steps, desc="Sampling")
    for k, (t, t_prev) in enumerate(steps):
        t, t_prev = int(t), int(t_prev)
        eps_cond = branch(z, t, ctx_cond, c_cond if adapter is not None else None)
        if cfg.guidance == 1.0:
            eps = eps_cond
        else:
            eps_uncond = branch(z, t, ctx_uncond, c_uncond if adapter is not None else None)
            eps = cfg_combine(eps_cond, eps_uncond, cfg.guidance)
        z = ddim_step(z, eps, t, t_prev, sched, cfg.eta, rng=stream(cfg.seed, "noise", 1, k))
    video = decode_video(z, codec_cfg)
    return torch.clamp(video, 0.0, 1.0).numpy()


def save_sample(out_dir: str, video: np.ndarray, caption: str, cfg: SampleConfig,
                modality: Optional[Union[str, Modality]] = None) -> None:
    """
    Write a generated video as PPM frames plus meta.json.
    """
    save_video_frames(out_dir, video)
    frames, _, height, width = video.shape
    meta = {
        'caption': caption,
        'seed': cfg.seed,
        'guidance': cfg.guidance,
        'cutoff': cfg.videoinit_cutoff,
        'steps': cfg.steps,
        'eta': cfg.eta,
        'num_frames': frames,
        'width': width,
        'height': height,
        'modality': Modality(modality).value if modality is not None else None,
    }
    write_json(os.path.join(out_dir, "meta.json"), meta)
    logger.info(f"Saved {frames}-frame sample to {out_dir}")
