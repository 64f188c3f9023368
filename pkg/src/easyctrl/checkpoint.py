"""
Base and adapter checkpoints stored as EZTA archives
"""
import copy
import logging
from dataclasses import dataclass
from typing import Dict

import torch
from pydantic import ValidationError as PydanticValidationError

from easyctrl.conditions.base import Modality
from easyctrl.config import RunConfig
from easyctrl.exceptions import FormatError, ValidationError
from easyctrl.io.archive import load_archive, save_archive, tensor_to_text, text_to_tensor
from easyctrl.models.adapter import AdapterNet, load_adapter
from easyctrl.models.textenc import VOCAB, vocab_from_tensor, vocab_to_tensor
from easyctrl.models.unet import SpatioTemporalUNet, load_unet

logger = logging.getLogger(__name__)

CONFIG_KEY = "config.run"
VOCAB_KEY = "textenc.vocab"
MODALITY_KEY = "meta.modality"
TEMPORAL_PREFIX = "unet."


@dataclass
class BaseCheckpoint:
    model: SpatioTemporalUNet
    config: RunConfig


@dataclass
class AdapterCheckpoint:
    """
    A loaded adapter together with the denoiser it was trained with.

    Attributes:
        adapter: The condition adapter
        model: Copy of the base denoiser carrying the adapter's temporal layers
        modality: Condition modality the adapter was trained on
        config: Run configuration of the adapter training
    """
    adapter: AdapterNet
    model: SpatioTemporalUNet
    modality: Modality
    config: RunConfig


def _config_tensor(config: RunConfig) -> torch.Tensor:
    return text_to_tensor(config.model_dump_json())


def _read_config(params: Dict[str, torch.Tensor], path: str) -> RunConfig:
    if CONFIG_KEY not in params:
        raise FormatError(f"{path} has no '{CONFIG_KEY}' entry")
    try:
        return RunConfig.model_validate_json(tensor_to_text(params[CONFIG_KEY]))
    except PydanticValidationError as exc:
        raise FormatError(f"{path} carries an invalid run config: {exc}") from exc


def _tensors(module: torch.nn.Module) -> Dict[str, torch.Tensor]:
    return {name: t.detach().contiguous() for name, t in module.state_dict().items()}


def save_base(path: str, model: SpatioTemporalUNet, config: RunConfig) -> None:
    """Write the denoiser, the text vocabulary and the run config."""
    params = _tensors(model)
    params[VOCAB_KEY] = vocab_to_tensor()
    params[CONFIG_KEY] = _config_tensor(config)
    save_archive(params, path)


def load_base(path: str) -> BaseCheckpoint:
    """
    Read a base checkpoint written by save_base.
    """
    params = load_archive(path)
    config = _read_config(params, path)
    if VOCAB_KEY not in params:
        raise FormatError(f"{path} has no '{VOCAB_KEY}' entry")
    if tuple(vocab_from_tensor(params[VOCAB_KEY])) != VOCAB:
        raise ValidationError(f"{path} was trained with a different vocabulary")
    model = load_unet(params, config.unet)
    model.eval()
    logger.info(f"Loaded base model from {path}")
    return BaseCheckpoint(model=model, config=config)


def save_adapter(path: str, adapter: AdapterNet, model: SpatioTemporalUNet, modality: str,
                 config: RunConfig) -> None:
    """
    Write the adapter, the temporal layers trained alongside it, its modality and the run config.
    """
    params = _tensors(adapter)
    for name, tensor in _tensors(model.temporal).items():
        params[f"{TEMPORAL_PREFIX}temporal.{name}"] = tensor
    params[MODALITY_KEY] = text_to_tensor(Modality(modality).value)
    params[CONFIG_KEY] = _config_tensor(config)
    save_archive(params, path)


def load_adapter_checkpoint(path: str, base: BaseCheckpoint) -> AdapterCheckpoint:
    """
    Read an adapter checkpoint and attach it to `base`.

    The base model is not modified; the returned model is a copy with the
    adapter's temporal layers loaded.

    Raises:
        ValidationError: The adapter was trained for a different U-Net or codec configuration
    """
    params = load_archive(path)
    config = _read_config(params, path)
    if config.unet != base.config.unet or config.codec.patch != base.config.codec.patch:
        raise ValidationError(f"{path} was trained for a different U-Net or codec configuration than the base")
    if MODALITY_KEY not in params:
        raise FormatError(f"{path} has no '{MODALITY_KEY}' entry")
    modality = Modality(tensor_to_text(params[MODALITY_KEY]))

    prefix = f"{TEMPORAL_PREFIX}temporal."
    temporal = {k[len(prefix):]: v for k, v in params.items() if k.startswith(prefix)}
    own = {k: v for k, v in params.items()
           if k not in (CONFIG_KEY, MODALITY_KEY) and not k.startswith(TEMPORAL_PREFIX)}
    adapter = load_adapter(own, config.unet, config.codec.patch)

    model = copy.deepcopy(base.model)
    if temporal:
        try:
            model.temporal.load_state_dict(temporal)
        except RuntimeError as exc:
            raise ValidationError(f"temporal layers in {path} do not match the base: {exc}") from exc
    adapter.eval()
    model.eval()
    logger.info(f"Loaded {modality.value} adapter from {path}")
    return AdapterCheckpoint(adapter=adapter, model=model, modality=modality, config=config)
