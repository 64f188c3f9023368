"""
Video metrics: block-matching optical flow, Avg-Flow, first-frame PSNR and temporal consistency
"""
import math
from functools import lru_cache
from typing import List, Tuple

import numpy as np
from einops import reduce

from easyctrl.conditions.base import ConditionMap, Modality
from easyctrl.exceptions import ValidationError


@lru_cache(maxsize=None)
def candidate_displacements(radius: int) -> List[Tuple[int, int]]:
    """
    All (dy, dx) in [-radius, radius]^2, ordered by magnitude, then dy, then dx.

    The first minimum in this order is the tie-broken block match.
    """
    offsets = [(dy, dx) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)]
    return sorted(offsets, key=lambda d: (d[0] ** 2 + d[1] ** 2, d[0], d[1]))


def _as_channels(frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim == 2:
        return frame[None]
    if frame.ndim == 3:
        return frame
    raise ValidationError(f"a frame must be H x W or C x H x W, got shape {frame.shape}")


def optical_flow(a: np.ndarray, b: np.ndarray, block: int = 4, radius: int = 4) -> np.ndarray:
    """
    Exhaustive block matching from frame `a` to frame `b`.

    For every block x block tile of `a` the displacement (dy, dx) within
    +-radius minimizing the sum of absolute differences against `b` is chosen.
    Candidate windows that leave the frame are not considered.

    Args:
        a: Source frame, H x W or C x H x W
        b: Target frame of the same shape
        block: Tile size; must divide H and W
        radius: Search radius in pixels

    Returns:
        np.ndarray: 2 x H/block x W/block int64 field of (dy, dx)
    """
    a, b = _as_channels(a), _as_channels(b)
    if a.shape != b.shape:
        raise ValidationError(f"frames differ in shape: {a.shape} vs {b.shape}")
    if block < 1 or radius < 0:
        raise ValidationError(f"need block >= 1 and radius >= 0, got block={block}, radius={radius}")
    _, height, width = a.shape
    if height % block or width % block:
        raise ValidationError(f"block {block} does not divide the {height}x{width} frame")

    padded = np.pad(b, ((0, 0), (radius, radius), (radius, radius)), constant_values=np.nan)
    candidates = candidate_displacements(radius)
    costs = np.empty((len(candidates), height // block, width // block))
    for k, (dy, dx) in enumerate(candidates):
        window = padded[:, radius + dy:radius + dy + height, radius + dx:radius + dx + width]
        sad = reduce(np.abs(a - window), 'c (ty by) (tx bx) -> ty tx', 'sum', by=block, bx=block)
        costs[k] = np.where(np.isnan(sad), np.inf, sad)

    best = np.argmin(costs, axis=0)
    table = np.asarray(candidates, dtype=np.int64)
    return np.stack([table[best, 0], table[best, 1]])


def _check_video(video: np.ndarray) -> np.ndarray:
    video = np.asarray(video)
    if video.ndim not in (3, 4):
        raise ValidationError(f"a video must be F x H x W or F x C x H x W, got shape {video.shape}")
    if video.shape[0] < 2:
        raise ValidationError(f"the metric needs at least 2 frames, got {video.shape[0]}")
    return video


def avg_flow(video: np.ndarray, block: int = 4, radius: int = 4) -> float:
    """
    Motion strength: mean flow magnitude over all consecutive frame pairs and all tiles.
    """
    video = _check_video(video)
    magnitudes = []
    for f in range(video.shape[0] - 1):
        flow = optical_flow(video[f], video[f + 1], block, radius).astype(np.float64)
        magnitudes.append(np.sqrt(flow[0] ** 2 + flow[1] ** 2))
    return float(np.mean(magnitudes))


def psnr(x: np.ndarray, y: np.ndarray) -> float:
    """10 log10(1 / MSE) for images in [0, 1]; identical images give +inf."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValidationError(f"images differ in shape: {x.shape} vs {y.shape}")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def first_frame_psnr(video: np.ndarray, cond: ConditionMap) -> float:
    """
    Image retention: PSNR between frame 0 of an F x 3 x H x W video and a raw-pixel condition.
    """
    if cond.modality is not Modality.RAW_PIXELS:
        raise ValidationError(f"first-frame PSNR needs a raw_pixels condition, got {cond.modality.value}")
    frame = np.transpose(np.asarray(video)[0], (1, 2, 0))
    return psnr(frame, cond.data)


def temporal_consistency(video: np.ndarray) -> float:
    """Mean over consecutive pairs of the mean absolute inter-frame difference."""
    video = _check_video(video).astype(np.float64)
    return float(np.mean(np.abs(np.diff(video, axis=0))))
