"""
Shared toy configurations and numerical helpers for the test suite.
"""
import numpy as np
import pytest
import torch

from easyctrl.core.codec import CodecConfig
from easyctrl.core.schedule import build_schedule
from easyctrl.generators.shapes import MovingShapesGenerator
from easyctrl.models.unet import UNetConfig, build_unet
from easyctrl.training.trainer import TrainConfig

# B=2, 4x4 latents, F=2
TOY_UNET = UNetConfig(num_blocks=2, channels=(8, 8), frames=2, latent_channels=12, sample_size=4,
                      text_dim=8, time_dim=8, heads=2)
# 16x16 pixels, the smallest frame the scene generator draws
SMALL_UNET = UNetConfig(num_blocks=2, channels=(8, 8), frames=2, latent_channels=12, sample_size=8,
                        text_dim=8, time_dim=8, heads=2)


@pytest.fixture
def toy_unet_cfg():
    return TOY_UNET


@pytest.fixture
def small_unet_cfg():
    return SMALL_UNET


@pytest.fixture
def codec_cfg():
    return CodecConfig()


@pytest.fixture
def sched():
    return build_schedule(20, 1e-4, 0.02)


@pytest.fixture
def toy_model():
    model = build_unet(TOY_UNET, seed=0)
    model.eval()
    return model


@pytest.fixture
def small_dataset():
    """Four decoded 2-frame 16x16 clips."""
    generator = MovingShapesGenerator(seed=3, height=16, width=16, frames=2)
    records = []
    for example in generator.generate(4):
        record = dict(example)
        record['video'] = generator.render(example).video
        records.append(record)
    from easyctrl.core.dataset import VideoDataset
    return VideoDataset(records)


@pytest.fixture
def train_cfg():
    return TrainConfig(steps=2, batch=2, lr=1e-3, warmup_steps=1, prefetch=1)


def randomize_zero_params(module: torch.nn.Module, seed: int = 0, scale: float = 0.1) -> None:
    """Fill every all-zero parameter with small normals so gradients reach every layer."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for p in module.parameters():
            if not torch.any(p != 0):
                p.copy_(torch.randn(p.shape, generator=gen, dtype=p.dtype) * scale)


def max_gradient_error(params, loss_fn, entries: int = 3, step: float = 1e-5, seed: int = 0) -> float:
    """
    Largest norm-relative error between autograd and central differences.

    For every named parameter tensor, `entries` random elements are perturbed by
    +-step; the error of a tensor is ||g - g_fd|| / max(||g|| + ||g_fd||, 1e-6).
    """
    named = list(params)
    tensors = [p for _, p in named]
    grads = torch.autograd.grad(loss_fn(), tensors, allow_unused=True)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for (name, p), g in zip(named, grads):
        g = torch.zeros_like(p) if g is None else g
        flat, gflat = p.data.view(-1), g.reshape(-1)
        picks = rng.choice(flat.numel(), size=min(entries, flat.numel()), replace=False)
        analytic, numeric = [], []
        for k in picks:
            original = flat[k].item()
            with torch.no_grad():
                flat[k] = original + step
                plus = float(loss_fn())
                flat[k] = original - step
                minus = float(loss_fn())
                flat[k] = original
            analytic.append(float(gflat[k]))
            numeric.append((plus - minus) / (2.0 * step))
        a, n = np.asarray(analytic), np.asarray(numeric)
        error = np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-6)
        worst = max(worst, float(error))
    return worst
