"""
Tests for base and adapter checkpoints.
"""
import pytest
import torch

from easyctrl.checkpoint import (
    CONFIG_KEY,
    MODALITY_KEY,
    VOCAB_KEY,
    load_adapter_checkpoint,
    load_base,
    save_adapter,
    save_base,
)
from easyctrl.conditions.base import Modality
from easyctrl.config import RunConfig
from easyctrl.exceptions import FormatError, ValidationError
from easyctrl.io.archive import load_archive, save_archive, text_to_tensor
from easyctrl.models.adapter import init_adapter_from_unet
from easyctrl.models.textenc import encode_text, tokenize
from easyctrl.models.unet import build_unet

from conftest import SMALL_UNET, randomize_zero_params


@pytest.fixture
def run_config():
    return RunConfig.model_validate({
        'data': {'height': 16, 'width': 16, 'frames': 2},
        'unet': SMALL_UNET.model_dump(),
        'schedule': {'T': 20},
        'sample': {'steps': 2},
    })


def test_base_roundtrip(tmp_path, run_config):
    """Test that a base checkpoint restores weights and config."""
    model = build_unet(SMALL_UNET, seed=2)
    path = str(tmp_path / "base.ezta")
    save_base(path, model, run_config)
    params = load_archive(path)
    assert VOCAB_KEY in params and CONFIG_KEY in params
    base = load_base(path)
    assert base.config == run_config
    assert not base.model.training
    restored = base.model.state_dict()
    assert all(torch.equal(restored[k], v) for k, v in model.state_dict().items())


def test_base_missing_entries(tmp_path, run_config):
    """Test that archives without a config or vocabulary raise FormatError."""
    model = build_unet(SMALL_UNET)
    path = str(tmp_path / "bare.ezta")
    save_archive(dict(model.state_dict()), path)
    with pytest.raises(FormatError):
        load_base(path)
    params = dict(model.state_dict())
    params[CONFIG_KEY] = text_to_tensor(run_config.model_dump_json())
    save_archive(params, path)
    with pytest.raises(FormatError):
        load_base(path)


def test_base_rejects_invalid_config(tmp_path, run_config):
    """Test that a stored config failing validation raises FormatError."""
    path = str(tmp_path / "bad.ezta")
    save_base(path, build_unet(SMALL_UNET), run_config)
    params = load_archive(path)
    params[CONFIG_KEY] = text_to_tensor('{"unet": {"num_blocks": 0}}')
    save_archive(params, path)
    with pytest.raises(FormatError):
        load_base(path)


def test_base_rejects_other_vocabulary(tmp_path, run_config):
    """Test that a checkpoint trained on another vocabulary is refused."""
    path = str(tmp_path / "vocab.ezta")
    save_base(path, build_unet(SMALL_UNET), run_config)
    params = load_archive(path)
    params[VOCAB_KEY] = text_to_tensor("<pad>\na\nred")
    save_archive(params, path)
    with pytest.raises(ValidationError):
        load_base(path)


def test_adapter_roundtrip(tmp_path, run_config):
    """Test that an adapter checkpoint restores the adapter, its modality and the temporal layers."""
    base_model = build_unet(SMALL_UNET, seed=0)
    base_path = str(tmp_path / "base.ezta")
    save_base(base_path, base_model, run_config)
    base = load_base(base_path)

    trained = build_unet(SMALL_UNET, seed=0)
    randomize_zero_params(trained.temporal, seed=3)
    adapter = init_adapter_from_unet(trained, SMALL_UNET, seed=0)
    randomize_zero_params(adapter, seed=4)
    path = str(tmp_path / "adapter.ezta")
    save_adapter(path, adapter, trained, "depth", run_config)
    assert MODALITY_KEY in load_archive(path)

    checkpoint = load_adapter_checkpoint(path, base)
    assert checkpoint.modality is Modality.DEPTH
    restored = checkpoint.model.state_dict()
    for name, value in trained.temporal.state_dict().items():
        assert torch.equal(restored[f"temporal.{name}"], value)
    untouched = base.model.temporal.state_dict()
    assert all(torch.equal(untouched[k], v) for k, v in base_model.temporal.state_dict().items())

    z = torch.randn(2, 12, 8, 8, generator=torch.Generator().manual_seed(0))
    ctx = encode_text(torch.tensor(tokenize("a red square", SMALL_UNET.max_tokens)), base.model.embed.text)
    c = torch.rand(3, 16, 16, generator=torch.Generator().manual_seed(1))
    with torch.no_grad():
        expected = adapter(z, 4, ctx, c)
        actual = checkpoint.adapter(z, 4, ctx, c)
    assert all(torch.equal(a, b) for a, b in zip(expected.r, actual.r))


def test_adapter_rejects_other_base(tmp_path, run_config):
    """Test that an adapter trained for another U-Net configuration is refused."""
    model = build_unet(SMALL_UNET)
    save_base(str(tmp_path / "base.ezta"), model, run_config)
    save_adapter(str(tmp_path / "adapter.ezta"), init_adapter_from_unet(model, SMALL_UNET), model, "canny", run_config)

    other_unet = SMALL_UNET.model_copy(update={'heads': 4})
    other_config = run_config.model_copy(update={'unet': other_unet})
    save_base(str(tmp_path / "other.ezta"), build_unet(other_unet), other_config)
    with pytest.raises(ValidationError):
        load_adapter_checkpoint(str(tmp_path / "adapter.ezta"), load_base(str(tmp_path / "other.ezta")))
