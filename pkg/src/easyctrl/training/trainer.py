"""
Two-stage training: text-to-video pretraining of the denoiser, then adapter training
"""
import copy
import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Literal, Optional, Sequence

import numpy as np
import pandas as pd
import torch
from pydantic import BaseModel, ConfigDict, Field, field_validator

from easyctrl.conditions.base import TRAINABLE_MODALITIES, ConditionMap
from easyctrl.conditions.extractors import get_extractor
from easyctrl.conditions.scene import empty_condition
from easyctrl.core.codec import CodecConfig, encode_video
from easyctrl.core.dataset import VideoDataset
from easyctrl.core.rng import standard_normal, stream
from easyctrl.core.schedule import NoiseSchedule, q_sample, training_loss
from easyctrl.core.streaming import BatchStream
from easyctrl.exceptions import EasyControlError, NumericalError, ValidationError
from easyctrl.models.adapter import AdapterNet, adapter_forward, init_adapter_from_unet
from easyctrl.models.textenc import encode_text, tokenize_batch
from easyctrl.models.unet import SpatioTemporalUNet, UNetConfig, build_unet, unet_forward

logger = logging.getLogger(__name__)

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


class TrainConfig(BaseModel):
    """
    Configuration of one training stage
    """
    model_config = ConfigDict(extra="forbid")

    stage: Literal["base", "adapter"] = "base"
    steps: int = Field(default=2000, ge=0)
    batch: int = Field(default=8, ge=1)
    lr: float = Field(default=2e-4, gt=0.0)
    warmup_steps: int = Field(default=100, ge=0)
    cond_dropout: float = Field(default=0.1, ge=0.0, le=1.0)
    text_dropout: float = Field(default=0.1, ge=0.0, le=1.0)
    modality: str = "raw_pixels"
    seed: int = Field(default=0, ge=0)
    freeze: Literal["spatial", "spatial_attn_only"] = "spatial"
    grad_clip: Optional[float] = Field(default=1.0, gt=0.0)
    prefetch: int = Field(default=2, ge=1)

    @field_validator("modality")
    @classmethod
    def _check_modality(cls, value: str) -> str:
        if value not in TRAINABLE_MODALITIES:
            raise ValueError(f"modality must be one of {TRAINABLE_MODALITIES}, got '{value}'")
        return value


@dataclass
class Batch:
    """
    One training batch.

    Attributes:
        ids: Sample ids
        videos: N x F x 3 x H x W pixels
        captions: One caption per sample ("" = null text)
        conditions: One condition per sample, or None in the base stage
    """
    ids: List[str]
    videos: np.ndarray
    captions: List[str]
    conditions: Optional[List[ConditionMap]] = None


@dataclass
class TrainResult:
    """
    Trained modules and the per-step training curve.
    """
    model: SpatioTemporalUNet
    adapter: Optional[AdapterNet] = None
    history: List[Dict[str, float]] = field(default_factory=list)

    def curve(self) -> pd.DataFrame:
        return pd.DataFrame(self.history, columns=["step", "loss", "lr", "grad_norm"])

    def loss_trend(self) -> Dict[str, float]:
        """Median loss over the first and last 10% of steps."""
        losses = self.curve()["loss"]
        if losses.empty:
            return {"first": math.nan, "last": math.nan}
        k = max(1, len(losses) // 10)
        return {"first": float(losses.iloc[:k].median()), "last": float(losses.iloc[-k:].median())}


def lr_schedule(step: int, cfg: TrainConfig) -> float:
    """
    Linear warmup to cfg.lr over cfg.warmup_steps, constant afterwards.
    """
    if step < 0:
        raise ValidationError(f"step must be >= 0, got {step}")
    if cfg.warmup_steps == 0:
        return cfg.lr
    return cfg.lr * min(1.0, (step + 1) / cfg.warmup_steps)


def apply_dropout(batch: Batch, step: int, cfg: TrainConfig) -> Batch:
    """
    Drop conditions and captions independently per sample.

    Sample i of `step` draws (u_cond, u_text) from the "dropout" stream keyed by
    (step, i); the condition is replaced by the empty image when
    u_cond < cfg.cond_dropout and the caption by "" when u_text < cfg.text_dropout.
    """
    captions = list(batch.captions)
    conditions = list(batch.conditions) if batch.conditions is not None else None
    for i in range(len(captions)):
        u_cond, u_text = stream(cfg.seed, "dropout", step, i).random(2)
        if conditions is not None and u_cond < cfg.cond_dropout:
            conditions[i] = empty_condition(conditions[i].height, conditions[i].width)
        if u_text < cfg.text_dropout:
            captions[i] = ""
    return replace(batch, captions=captions, conditions=conditions)


def check_resolution(data: VideoDataset, unet_cfg: UNetConfig, codec_cfg: CodecConfig) -> None:
    if len(data) == 0:
        raise ValidationError("training dataset is empty")
    video = data[0].get('video')
    if video is None:
        raise ValidationError("training records must carry decoded videos")
    frames, _, height, width = np.asarray(video).shape
    expected = unet_cfg.sample_size * codec_cfg.patch
    if frames != unet_cfg.frames or (height, width) != (expected, expected):
        raise ValidationError(
            f"dataset clips are {frames} x {height}x{width}, the model expects "
            f"{unet_cfg.frames} x {expected}x{expected}"
        )


class BatchBuilder:
    """
    Assembles the batch of a given step; pure in (step, dataset, cfg) so it can run ahead of the loop.
    """

    def __init__(self, data: VideoDataset, cfg: TrainConfig, with_conditions: bool):
        self.data = data
        self.cfg = cfg
        self.extractor = get_extractor(cfg.modality) if with_conditions else None

    def __call__(self, step: int) -> Batch:
        indices = self.data.sample_indices(self.cfg.batch, self.cfg.seed, step)
        records = [self.data[int(i)] for i in indices]
        batch = Batch(
            ids=[r['id'] for r in records],
            videos=np.stack([np.asarray(r['video'], dtype=np.float32) for r in records]),
            captions=[r.get('caption', "") for r in records],
            conditions=self.extractor.batch_extract(records) if self.extractor is not None else None,
        )
        return apply_dropout(batch, step, self.cfg)


def diffusion_inputs(batch: Batch, step: int, cfg: TrainConfig, codec_cfg: CodecConfig, sched: NoiseSchedule,
                     dtype: torch.dtype = torch.float32):
    """
    Encode the batch and draw (t, eps) from the "timestep" and "noise" streams of `step`.

    Returns:
        tuple: (z_t, t, eps)
    """
    z0 = torch.stack([encode_video(torch.from_numpy(v), codec_cfg) for v in batch.videos]).to(dtype)
    t = torch.from_numpy(stream(cfg.seed, "timestep", step).integers(1, sched.T + 1, size=len(batch.ids)))
    eps = torch.from_numpy(standard_normal(stream(cfg.seed, "noise", step), tuple(z0.shape))).to(dtype)
    return q_sample(z0, t, eps, sched), t, eps


def frozen_paths(model: SpatioTemporalUNet, policy: str) -> List[str]:
    """
    Denoiser parameters frozen during adapter training.

    "spatial" freezes every ``spatial.*`` tensor; "spatial_attn_only" freezes
    only spatial self/cross attention. ``embed.*`` is frozen under both.
    """
    paths = []
    for path, _ in model.named_parameters():
        group = path.split(".", 1)[0]
        if group == "embed":
            paths.append(path)
        elif group == "spatial" and (policy == "spatial" or ".attn." in path):
            paths.append(path)
    return paths


class _Logger:
    def __init__(self, log_path: Optional[str]):
        self.handle = open(log_path, "w", encoding="utf-8") if log_path else None

    def write(self, entry: Dict[str, float]) -> None:
        if self.handle is not None:
            self.handle.write(json.dumps(entry, sort_keys=True) + "\n")

    def close(self) -> None:
        if self.handle is not None:
            self.handle.close()


def _optimize(params: Sequence[torch.nn.Parameter], cfg: TrainConfig, batches: Iterator[Batch],
              loss_fn, log_path: Optional[str]) -> List[Dict[str, float]]:
    optimizer = torch.optim.Adam(params, lr=cfg.lr, betas=ADAM_BETAS, eps=ADAM_EPS)
    max_norm = cfg.grad_clip if cfg.grad_clip is not None else math.inf
    history: List[Dict[str, float]] = []
    log = _Logger(log_path)
    try:
        for step, batch in enumerate(batches):
            lr = lr_schedule(step, cfg)
            for group in optimizer.param_groups:
                group["lr"] = lr
            optimizer.zero_grad(set_to_none=True)
            loss = loss_fn(batch, step)
            loss.backward()
            grad_norm = float(torch.nn.utils.clip_grad_norm_(params, max_norm))
            if not torch.isfinite(loss):
                raise NumericalError("training loss is not finite", step=step, lr=lr, grad_norm=grad_norm)
            if not math.isfinite(grad_norm):
                raise NumericalError("gradient norm is not finite", step=step, lr=lr, grad_norm=grad_norm)
            optimizer.step()
            entry = {"step": step, "loss": float(loss.detach()), "lr": lr, "grad_norm": grad_norm}
            history.append(entry)
            log.write(entry)
            logger.debug(f"step {step}: loss={entry['loss']:.5f} lr={lr:.2e} grad_norm={grad_norm:.3f}")
    finally:
        log.close()
    return history


def train_base(data: VideoDataset, cfg: TrainConfig, unet_cfg: UNetConfig, codec_cfg: CodecConfig,
               sched: NoiseSchedule, model: Optional[SpatioTemporalUNet] = None,
               progress_bar: bool = True, log_path: Optional[str] = None) -> TrainResult:
    """
    Pretrain every parameter group of the denoiser on captioned clips.

    Args:
        data: Dataset with decoded videos
        cfg: Training configuration (stage "base")
        unet_cfg: Denoiser configuration
        codec_cfg: Codec configuration
        sched: Noise schedule
        model: Starting denoiser (built from cfg.seed when omitted); it is updated in place
        progress_bar: Whether to show a progress bar
        log_path: Optional JSONL training log

    Returns:
        TrainResult: The trained denoiser and its training curve
    """
    check_resolution(data, unet_cfg, codec_cfg)
    model = model if model is not None else build_unet(unet_cfg, seed=cfg.seed)
    model.train()
    params = [p for p in model.parameters()]
    for p in params:
        p.requires_grad_(True)

    def loss_fn(batch: Batch, step: int) -> torch.Tensor:
        z_t, t, eps = diffusion_inputs(batch, step, cfg, codec_cfg, sched)
        ctx = encode_text(tokenize_batch(batch.captions, unet_cfg.max_tokens), model.embed.text)
        return training_loss(unet_forward(z_t, t, ctx, model), eps)

    batches = BatchStream(BatchBuilder(data, cfg, with_conditions=False), cfg.steps, prefetch=cfg.prefetch,
                          progress_bar=progress_bar, desc="Base training")
    history = _optimize(params, cfg, iter(batches), loss_fn, log_path)
    result = TrainResult(model=model, history=history)
    logger.info(f"Base training finished after {cfg.steps} steps (loss trend {result.loss_trend()})")
    return result


def train_adapter(data: VideoDataset, base: SpatioTemporalUNet, cfg: TrainConfig, unet_cfg: UNetConfig,
                  codec_cfg: CodecConfig, sched: NoiseSchedule, adapter: Optional[AdapterNet] = None,
                  progress_bar: bool = True, log_path: Optional[str] = None) -> TrainResult:
    """
    Train a condition adapter together with the denoiser's temporal layers.

    The optimizer only receives the adapter and the unfrozen denoiser tensors;
    frozen tensors are checked for byte equality with `base` afterwards.

    Args:
        data: Dataset with decoded videos and scenes
        base: Pretrained denoiser (left untouched; a copy is trained)
        cfg: Training configuration (stage "adapter")
        unet_cfg: Denoiser configuration
        codec_cfg: Codec configuration
        sched: Noise schedule
        adapter: Starting adapter (initialized from `base` when omitted)
        progress_bar: Whether to show a progress bar
        log_path: Optional JSONL training log

    Returns:
        TrainResult: Denoiser with updated temporal layers, the adapter and the training curve
    """
    check_resolution(data, unet_cfg, codec_cfg)
    model = copy.deepcopy(base)
    adapter = adapter if adapter is not None else init_adapter_from_unet(model, unet_cfg, codec_cfg.patch, cfg.seed)
    frozen = set(frozen_paths(model, cfg.freeze))
    snapshot = {}
    for path, p in model.named_parameters():
        p.requires_grad_(path not in frozen)
        if path in frozen:
            snapshot[path] = p.detach().clone()
    model.train()
    adapter.train()
    trainable = [p for p in model.parameters() if p.requires_grad] + list(adapter.parameters())
    logger.info(
        f"Adapter training ({cfg.modality}, freeze={cfg.freeze}): {len(frozen)} frozen denoiser tensors, "
        f"{sum(p.numel() for p in trainable)} trainable parameters"
    )

    def loss_fn(batch: Batch, step: int) -> torch.Tensor:
        z_t, t, eps = diffusion_inputs(batch, step, cfg, codec_cfg, sched)
        with torch.no_grad():
            ctx = encode_text(tokenize_batch(batch.captions, unet_cfg.max_tokens), model.embed.text)
        c = torch.stack([cond.to_tensor() for cond in batch.conditions])
        residuals = adapter_forward(z_t, t, ctx, c, adapter)
        return training_loss(unet_forward(z_t, t, ctx, model, residuals), eps)

    batches = BatchStream(BatchBuilder(data, cfg, with_conditions=True), cfg.steps, prefetch=cfg.prefetch,
                          progress_bar=progress_bar, desc="Adapter training")
    history = _optimize(trainable, cfg, iter(batches), loss_fn, log_path)

    params = dict(model.named_parameters())
    for path, before in snapshot.items():
        if not torch.equal(params[path].detach(), before):
            raise EasyControlError(f"frozen parameter '{path}' changed during adapter training")
    for p in model.parameters():
        p.requires_grad_(True)
    result = TrainResult(model=model, adapter=adapter, history=history)
    logger.info(f"Adapter training finished after {cfg.steps} steps (loss trend {result.loss_trend()})")
    return result
