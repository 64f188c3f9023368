"""
Tests for base and adapter training.
"""
import json

import numpy as np
import pytest
import torch

from easyctrl.conditions.base import ConditionMap, Modality
from easyctrl.core.codec import CodecConfig
from easyctrl.core.dataset import VideoDataset
from easyctrl.exceptions import NumericalError, ValidationError
from easyctrl.models.unet import build_unet
from easyctrl.training.trainer import (
    Batch,
    BatchBuilder,
    TrainConfig,
    apply_dropout,
    check_resolution,
    frozen_paths,
    lr_schedule,
    train_adapter,
    train_base,
)

from conftest import SMALL_UNET, TOY_UNET


def test_lr_schedule():
    """Test linear warmup followed by a constant rate."""
    cfg = TrainConfig(lr=1e-3, warmup_steps=1000)
    assert lr_schedule(499, cfg) == 5e-4
    assert lr_schedule(999, cfg) == 1e-3
    assert lr_schedule(5000, cfg) == 1e-3
    assert lr_schedule(0, cfg) == pytest.approx(1e-6)
    constant = TrainConfig(lr=2e-4, warmup_steps=0)
    assert lr_schedule(0, constant) == lr_schedule(10, constant) == 2e-4
    with pytest.raises(ValidationError):
        lr_schedule(-1, cfg)


def test_train_config_validation():
    """Test that unknown modalities and fields are rejected."""
    with pytest.raises(ValueError):
        TrainConfig(modality="empty")
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=1.0)
    assert TrainConfig(modality="depth").modality == "depth"


def test_dropout_rates():
    """Test that condition and text dropout hit their rates independently."""
    n = 10000
    cond = ConditionMap(Modality.CANNY, np.ones((1, 1, 3), dtype=np.float32))
    batch = Batch(ids=[str(i) for i in range(n)], videos=np.zeros((n, 1)), captions=["a red square"] * n,
                  conditions=[cond] * n)
    out = apply_dropout(batch, step=3, cfg=TrainConfig(cond_dropout=0.1, text_dropout=0.1, seed=5))
    dropped_cond = np.array([c.modality is Modality.EMPTY for c in out.conditions])
    dropped_text = np.array([c == "" for c in out.captions])
    assert 0.09 <= dropped_cond.mean() <= 0.11
    assert 0.09 <= dropped_text.mean() <= 0.11
    assert 0.005 <= (dropped_cond & dropped_text).mean() <= 0.015
    assert all(not c.data.any() for c, d in zip(out.conditions, dropped_cond) if d)
    assert batch.captions[0] == "a red square"


def test_dropout_is_reproducible():
    """Test that dropout decisions depend only on (seed, step, index)."""
    cond = ConditionMap(Modality.DEPTH, np.ones((2, 2, 3), dtype=np.float32))
    batch = Batch(ids=list("abcdefgh"), videos=np.zeros((8, 1)), captions=["a"] * 8, conditions=[cond] * 8)
    cfg = TrainConfig(cond_dropout=0.5, text_dropout=0.5)
    a, b = apply_dropout(batch, 7, cfg), apply_dropout(batch, 7, cfg)
    assert a.captions == b.captions
    assert [c.modality for c in a.conditions] == [c.modality for c in b.conditions]


def test_no_dropout_at_zero_rate():
    """Test that zero rates keep every condition and caption."""
    cond = ConditionMap(Modality.DEPTH, np.ones((2, 2, 3), dtype=np.float32))
    batch = Batch(ids=list("abcd"), videos=np.zeros((4, 1)), captions=["a"] * 4, conditions=[cond] * 4)
    out = apply_dropout(batch, 0, TrainConfig(cond_dropout=0.0, text_dropout=0.0))
    assert out.captions == ["a"] * 4
    assert all(c.modality is Modality.DEPTH for c in out.conditions)


def test_batch_builder(small_dataset):
    """Test that a step's batch is reproducible and carries conditions in the adapter stage."""
    cfg = TrainConfig(batch=3, modality="segmask", cond_dropout=0.0, text_dropout=0.0)
    build = BatchBuilder(small_dataset, cfg, with_conditions=True)
    a, b = build(4), build(4)
    assert a.ids == b.ids
    assert a.videos.shape == (3, 2, 3, 16, 16)
    assert all(c.modality is Modality.SEGMASK for c in a.conditions)
    assert BatchBuilder(small_dataset, cfg, with_conditions=False)(4).conditions is None


def test_check_resolution(small_dataset):
    """Test that clips must match the model's frame count and pixel size."""
    check_resolution(small_dataset, SMALL_UNET, CodecConfig())
    with pytest.raises(ValidationError):
        check_resolution(small_dataset, TOY_UNET, CodecConfig())
    with pytest.raises(ValidationError):
        check_resolution(VideoDataset([]), SMALL_UNET, CodecConfig())


def test_frozen_paths():
    """Test the two freeze policies."""
    model = build_unet(TOY_UNET)
    spatial = frozen_paths(model, "spatial")
    attn_only = frozen_paths(model, "spatial_attn_only")
    assert not any(p.startswith("temporal.") for p in spatial + attn_only)
    assert all(p in spatial for p in model.groups()["spatial"] + model.groups()["embed"])
    assert "spatial.stem.weight" in spatial and "spatial.stem.weight" not in attn_only
    assert all(".attn." in p or p.startswith("embed.") for p in attn_only)
    assert set(attn_only) < set(spatial)


def test_train_base_runs_and_logs(small_dataset, train_cfg, codec_cfg, sched, tmp_path):
    """Test a short base run: one curve row and one log line per step, weights updated."""
    log = tmp_path / "base.jsonl"
    before = build_unet(SMALL_UNET, seed=train_cfg.seed).state_dict()
    result = train_base(small_dataset, train_cfg, SMALL_UNET, codec_cfg, sched, progress_bar=False,
                        log_path=str(log))
    curve = result.curve()
    assert list(curve["step"]) == [0, 1]
    assert np.all(np.isfinite(curve["loss"]))
    lines = [json.loads(line) for line in log.read_text().splitlines()]
    assert [entry["step"] for entry in lines] == [0, 1]
    assert set(lines[0]) == {"step", "loss", "lr", "grad_norm"}
    after = result.model.state_dict()
    assert any(not torch.equal(before[k], after[k]) for k in before)
    assert set(result.loss_trend()) == {"first", "last"}


def test_train_base_is_reproducible(small_dataset, train_cfg, codec_cfg, sched):
    """Test that the same seed reproduces the loss curve and weights."""
    a = train_base(small_dataset, train_cfg, SMALL_UNET, codec_cfg, sched, progress_bar=False)
    b = train_base(small_dataset, train_cfg, SMALL_UNET, codec_cfg, sched, progress_bar=False)
    assert a.history == b.history
    sa, sb = a.model.state_dict(), b.model.state_dict()
    assert all(torch.equal(sa[k], sb[k]) for k in sa)


def test_train_base_rejects_nan(small_dataset, train_cfg, codec_cfg, sched):
    """Test that a non-finite loss aborts with NumericalError carrying the step, lr and gradient norm."""
    broken = VideoDataset([{**r, 'video': np.full_like(r['video'], np.nan)} for r in small_dataset])
    with pytest.raises(NumericalError) as info:
        train_base(broken, train_cfg, SMALL_UNET, codec_cfg, sched, progress_bar=False)
    assert info.value.step == 0
    assert info.value.lr is not None
    assert info.value.grad_norm is not None
    assert "grad_norm=" in str(info.value)


@pytest.mark.parametrize("policy", ["spatial", "spatial_attn_only"])
def test_train_adapter_respects_freeze(small_dataset, codec_cfg, sched, policy):
    """Test that frozen tensors stay bit-identical while the adapter and temporal layers move."""
    base = build_unet(SMALL_UNET, seed=0)
    reference = {k: v.clone() for k, v in base.state_dict().items()}
    cfg = TrainConfig(stage="adapter", steps=2, batch=2, lr=1e-3, warmup_steps=1, modality="canny",
                      freeze=policy, prefetch=1)
    result = train_adapter(small_dataset, base, cfg, SMALL_UNET, codec_cfg, sched, progress_bar=False)
    trained = result.model.state_dict()
    for path in frozen_paths(base, policy):
        assert torch.equal(trained[path], reference[path]), path
    assert any(not torch.equal(trained[k], reference[k]) for k in reference if k.startswith("temporal."))
    assert all(torch.equal(base.state_dict()[k], v) for k, v in reference.items())
    assert all(norm > 0 for norm in result.adapter.zero_conv_norms())
    assert len(result.history) == 2
