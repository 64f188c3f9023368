"""
Tests for the zero-convolution condition adapter.
"""
import pytest
import torch
import torch.nn as nn

from easyctrl.exceptions import ValidationError
from easyctrl.models.adapter import (
    ConditionFeatureExtractor,
    init_adapter_from_unet,
    load_adapter,
    propagate,
    source_path,
)
from easyctrl.models.textenc import encode_text, tokenize
from easyctrl.models.unet import build_unet

from conftest import TOY_UNET, max_gradient_error, randomize_zero_params


def _inputs(model, seed: int = 0, dtype=torch.float32):
    gen = torch.Generator().manual_seed(seed)
    z = torch.randn(2, 12, 4, 4, generator=gen, dtype=dtype)
    c = torch.rand(3, 8, 8, generator=gen, dtype=dtype)
    ctx = encode_text(torch.tensor(tokenize("a green triangle moving up")), model.embed.text)
    return z, ctx, c


def test_residuals_start_at_zero(toy_model):
    """Test that a freshly initialized adapter emits exact-zero residuals."""
    adapter = init_adapter_from_unet(toy_model, TOY_UNET, patch=2, seed=0)
    z, ctx, c = _inputs(toy_model)
    with torch.no_grad():
        res = adapter(z, 7, ctx, c)
    assert len(res.r) == TOY_UNET.num_blocks
    assert all(torch.count_nonzero(r) == 0 for r in res.r)
    assert torch.count_nonzero(res.rm) == 0
    assert adapter.zero_conv_norms() == [0.0] * (TOY_UNET.num_blocks + 1)


def test_zero_init_identity(toy_model):
    """Test that the controlled model equals the plain model bit for bit at initialization."""
    adapter = init_adapter_from_unet(toy_model, TOY_UNET, patch=2, seed=0)
    z, ctx, c = _inputs(toy_model)
    with torch.no_grad():
        assert torch.equal(toy_model(z, 7, ctx, adapter(z, 7, ctx, c)), toy_model(z, 7, ctx))


def test_copied_weights_match_denoiser(toy_model):
    """Test that the encoder copy and timestep MLP start from the denoiser's weights."""
    adapter = init_adapter_from_unet(toy_model, TOY_UNET, patch=2, seed=0)
    source = toy_model.state_dict()
    copied = 0
    for path, value in adapter.state_dict().items():
        src = source_path(path)
        if src is not None:
            assert torch.equal(value, source[src])
            copied += 1
    assert copied > 0
    assert source_path("copy.encoder.0.res.conv1.weight") == "spatial.encoder.0.res.conv1.weight"
    assert source_path("zeros.0.weight") is None


def test_copy_does_not_alias(toy_model):
    """Test that updating the adapter copy leaves the denoiser untouched."""
    adapter = init_adapter_from_unet(toy_model, TOY_UNET, patch=2, seed=0)
    before = toy_model.spatial.encoder[0].res.conv1.weight.clone()
    with torch.no_grad():
        adapter.copy.encoder[0].res.conv1.weight.add_(1.0)
    assert torch.equal(toy_model.spatial.encoder[0].res.conv1.weight, before)


def test_only_zero_convs_receive_gradient_at_init(toy_model):
    """Test that at initialization the loss gradient reaches only the zero convolutions."""
    adapter = init_adapter_from_unet(toy_model, TOY_UNET, patch=2, seed=0)
    z, ctx, c = _inputs(toy_model)
    toy_model(z, 7, ctx, adapter(z, 7, ctx, c)).pow(2).mean().backward()
    for path, p in adapter.named_parameters():
        grad = torch.zeros_like(p) if p.grad is None else p.grad
        if path.startswith("zeros.") and path.endswith(".weight"):
            assert torch.count_nonzero(grad) > 0, path
        elif not path.startswith("zeros."):
            assert torch.count_nonzero(grad) == 0, path


def test_sgd_step_moves_zero_convs(toy_model):
    """Test that one optimizer step makes the zero convolutions non-zero."""
    adapter = init_adapter_from_unet(toy_model, TOY_UNET, patch=2, seed=0)
    optimizer = torch.optim.SGD(adapter.parameters(), lr=0.1)
    z, ctx, c = _inputs(toy_model)
    toy_model(z, 7, ctx, adapter(z, 7, ctx, c)).pow(2).mean().backward()
    optimizer.step()
    assert all(norm > 0 for norm in adapter.zero_conv_norms())


def test_feature_extractor_errors():
    """Test that bad patches and condition resolutions raise ValidationError."""
    with pytest.raises(ValidationError):
        ConditionFeatureExtractor(8, patch=3, sample_size=4)
    hint = ConditionFeatureExtractor(8, patch=2, sample_size=4)
    assert hint(torch.rand(3, 8, 8)).shape == (1, 8, 4, 4)
    with pytest.raises(ValidationError):
        hint(torch.rand(3, 16, 16))
    with pytest.raises(ValidationError):
        hint(torch.rand(1, 8, 8))


def test_adapter_rejects_wrong_resolution(toy_model):
    """Test that a condition at another resolution is refused."""
    adapter = init_adapter_from_unet(toy_model, TOY_UNET, patch=2, seed=0)
    z, ctx, _ = _inputs(toy_model)
    with pytest.raises(ValidationError):
        adapter(z, 1, ctx, torch.rand(3, 16, 16))


def test_propagate_broadcasts_over_frames():
    """Test that condition features are added to every frame of conv(z)."""
    entry = nn.Conv2d(12, 8, 3, padding=1)
    z = torch.randn(2, 12, 4, 4)
    feat = torch.randn(1, 8, 4, 4)
    with torch.no_grad():
        out = propagate(z, feat, entry)
        assert torch.allclose(out, entry(z) + feat, atol=1e-6)
        batched = propagate(torch.stack([z, z, z]), torch.randn(3, 8, 4, 4), entry)
    assert batched.shape == (3, 2, 8, 4, 4)
    with pytest.raises(ValidationError):
        propagate(torch.stack([z, z, z]), torch.randn(2, 8, 4, 4), entry)


def test_init_errors(toy_model):
    """Test that missing or mis-shaped denoiser tensors raise ValidationError."""
    params = dict(toy_model.state_dict())
    del params["spatial.middle.res.conv1.weight"]
    with pytest.raises(ValidationError):
        init_adapter_from_unet(params, TOY_UNET)
    params = dict(toy_model.state_dict())
    params["embed.time.0.weight"] = torch.zeros(3, 3)
    with pytest.raises(ValidationError):
        init_adapter_from_unet(params, TOY_UNET)


def test_init_is_deterministic(toy_model):
    """Test that the fresh adapter layers depend only on the seed."""
    a = init_adapter_from_unet(toy_model, TOY_UNET, seed=4).state_dict()
    b = init_adapter_from_unet(toy_model, TOY_UNET, seed=4).state_dict()
    assert all(torch.equal(a[k], b[k]) for k in a)


def test_load_adapter_roundtrip(toy_model):
    """Test that an adapter rebuilt from its state dict produces the same residuals."""
    adapter = init_adapter_from_unet(toy_model, TOY_UNET, seed=0)
    randomize_zero_params(adapter)
    restored = load_adapter(adapter.state_dict(), TOY_UNET, patch=2)
    z, ctx, c = _inputs(toy_model)
    with torch.no_grad():
        a, b = adapter(z, 3, ctx, c), restored(z, 3, ctx, c)
    assert all(torch.equal(x, y) for x, y in zip(a.r, b.r))
    params = dict(adapter.state_dict())
    params.pop("zeros.0.bias")
    with pytest.raises(ValidationError):
        load_adapter(params, TOY_UNET)


def test_adapter_gradients_match_finite_differences():
    """Test adapter gradients through the frozen denoiser against central differences."""
    model = build_unet(TOY_UNET, seed=0).double()
    adapter = init_adapter_from_unet(model, TOY_UNET, seed=0).double()
    randomize_zero_params(model)
    randomize_zero_params(adapter, seed=1)
    z, ctx, c = _inputs(model, dtype=torch.float64)
    ctx = ctx.embedded.detach()
    weights = torch.randn(z.shape, generator=torch.Generator().manual_seed(2), dtype=torch.float64)

    def loss():
        return (model(z, 9, ctx, adapter(z, 9, ctx, c)) * weights).mean()

    assert max_gradient_error(adapter.named_parameters(), loss, entries=2) < 1e-4


def test_residuals_are_frame_constant_for_constant_latent(toy_model):
    """Test that a latent repeated over frames yields residuals equal across frames."""
    adapter = init_adapter_from_unet(toy_model, TOY_UNET, patch=2, seed=0)
    randomize_zero_params(adapter, seed=2)
    z, ctx, c = _inputs(toy_model, seed=4)
    z = z[:1].expand(2, -1, -1, -1).clone()
    with torch.no_grad():
        res = adapter(z, 11, ctx, c)
    for r in res.r + [res.rm]:
        assert torch.count_nonzero(r) > 0
        assert torch.allclose(r[0], r[1], atol=1e-6)
