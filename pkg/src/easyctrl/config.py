"""
Run configuration: every module's settings in one JSON document
"""
import json
import logging
import os
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from easyctrl.core.codec import CodecConfig
from easyctrl.core.schedule import ScheduleConfig
from easyctrl.evaluation.suite import EvalConfig
from easyctrl.exceptions import FormatError
from easyctrl.generators.writer import DataConfig
from easyctrl.models.unet import UNetConfig
from easyctrl.sampling.sampler import SampleConfig
from easyctrl.training.trainer import TrainConfig

logger = logging.getLogger(__name__)


class RunConfig(BaseModel):
    """
    Sections data, codec, unet, schedule, train, sample and eval.

    Unknown keys are rejected in every section, and the sections are checked
    against each other before any work starts.
    """
    model_config = ConfigDict(extra="forbid")

    data: DataConfig = Field(default_factory=DataConfig)
    codec: CodecConfig = Field(default_factory=CodecConfig)
    unet: UNetConfig = Field(default_factory=UNetConfig)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    sample: SampleConfig = Field(default_factory=SampleConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    @model_validator(mode="after")
    def _check_sections(self) -> "RunConfig":
        if self.unet.latent_channels != self.codec.latent_channels:
            raise ValueError(
                f"unet.latent_channels={self.unet.latent_channels} but the codec produces "
                f"{self.codec.latent_channels} channels (3 * patch^2)"
            )
        if self.unet.frames != self.data.frames:
            raise ValueError(f"unet.frames={self.unet.frames} differs from data.frames={self.data.frames}")
        resolution = self.unet.sample_size * self.codec.patch
        if (self.data.height, self.data.width) != (resolution, resolution):
            raise ValueError(
                f"data frames are {self.data.height}x{self.data.width}, but unet.sample_size * codec.patch = {resolution}"
            )
        if self.sample.steps > self.schedule.T:
            raise ValueError(f"sample.steps={self.sample.steps} exceeds schedule.T={self.schedule.T}")
        if self.eval.block > min(self.data.height, self.data.width):
            raise ValueError(f"eval.block={self.eval.block} is larger than the frame")
        return self


def load_run_config(path: Optional[str] = None) -> RunConfig:
    """
    Read a run configuration; no path gives the defaults.

    Args:
        path: JSON file

    Returns:
        RunConfig: The validated configuration
    """
    if path is None:
        return RunConfig()
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc.msg}", offset=exc.pos) from exc
    config = RunConfig.model_validate(raw)
    logger.debug(f"Loaded run config from {os.path.abspath(path)}")
    return config
