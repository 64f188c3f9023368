"""
Conditions read from the video itself or rendered from the scene's ground truth
"""
from typing import Union

import numpy as np
import torch

from easyctrl.conditions.base import ConditionMap, Modality, gray_to_rgb
from easyctrl.exceptions import ValidationError
from easyctrl.generators.shapes import SceneSpec, inverse_depth, occupancy

# shape class -> segmentation color; background stays black
PALETTE = {
    "square": (1.0, 0.0, 0.0),
    "circle": (0.0, 1.0, 0.0),
    "triangle": (0.0, 0.0, 1.0),
}


def cond_raw_pixels(video: Union[np.ndarray, torch.Tensor]) -> ConditionMap:
    """
    First frame of an F x 3 x H x W video as the condition image.
    """
    frames = video.detach().cpu().numpy() if isinstance(video, torch.Tensor) else np.asarray(video)
    if frames.ndim != 4 or frames.shape[1] != 3:
        raise ValidationError(f"expected an F x 3 x H x W video, got shape {frames.shape}")
    if frames.shape[0] == 0:
        raise ValidationError("cannot take the first frame of an empty video")
    return ConditionMap(Modality.RAW_PIXELS, np.transpose(frames[0], (1, 2, 0)))


def _check_frame(frame: int, frames: int) -> None:
    if not 0 <= frame < frames:
        raise ValidationError(f"frame {frame} is outside [0, {frames})")


def cond_depth(spec: SceneSpec, frame: int, height: int = 32, width: int = 32, frames: int = 8) -> ConditionMap:
    """
    Normalized inverse depth: the shape at (1/d - 1)/4, the background plane at 0.
    """
    _check_frame(frame, frames)
    depth = np.zeros((height, width), dtype=np.float32)
    depth[occupancy(spec, frame, height, width)] = np.float32(inverse_depth(spec.depth))
    return ConditionMap(Modality.DEPTH, gray_to_rgb(depth))


def cond_segmask(spec: SceneSpec, frame: int, height: int = 32, width: int = 32, frames: int = 8) -> ConditionMap:
    """
    Shape occupancy painted with the class palette (square red, circle green, triangle blue).
    """
    _check_frame(frame, frames)
    mask = np.zeros((height, width, 3), dtype=np.float32)
    if spec.shape is not None:
        mask[occupancy(spec, frame, height, width)] = PALETTE[spec.shape]
    return ConditionMap(Modality.SEGMASK, mask)


def empty_condition(height: int, width: int) -> ConditionMap:
    """All-black condition used for condition dropout and the unconditional guidance branch."""
    if height <= 0 or width <= 0:
        raise ValidationError(f"condition size must be positive, got {height}x{width}")
    return ConditionMap(Modality.EMPTY, np.zeros((height, width, 3), dtype=np.float32))
