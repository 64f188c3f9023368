"""
Synthetic moving-shape videos with captions and ground-truth geometry
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from easyctrl.core.dataset import VideoDataset
from easyctrl.core.rng import derive_seed, stream
from easyctrl.exceptions import ValidationError

logger = logging.getLogger(__name__)

SHAPES = ("square", "circle", "triangle")
COLORS: Dict[str, Tuple[float, float, float]] = {
    "red": (1.0, 0.0, 0.0),
    "green": (0.0, 1.0, 0.0),
    "blue": (0.0, 0.0, 1.0),
    "yellow": (1.0, 1.0, 0.0),
}
# unit (vx, vy) per direction; image rows grow downwards
DIRECTIONS: Dict[str, Tuple[int, int]] = {
    "left": (-1, 0),
    "right": (1, 0),
    "up": (0, -1),
    "down": (0, 1),
}
BACKGROUND = 0.9
MIN_SIZE, MAX_SIZE = 6, 12
MIN_SPEED, MAX_SPEED = 1.0, 3.0
MIN_DEPTH, MAX_DEPTH = 0.2, 0.8
MAX_ATTEMPTS = 100


class SceneSpec(BaseModel):
    """
    Generative description of one synthetic clip.

    ``pos0`` is the top-left corner of the shape's bounding box at frame 0.
    A spec without a shape renders the empty background.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    shape: Optional[str] = None
    color: str = "red"
    size: int = Field(default=8, ge=1)
    pos0: Tuple[float, float] = (0.0, 0.0)
    vel: Tuple[float, float] = (0.0, 0.0)
    depth: float = Field(default=0.5, ge=MIN_DEPTH, le=MAX_DEPTH)
    seed: int = 0

    def position(self, frame: int) -> Tuple[int, int]:
        """Integer top-left corner (x, y) at `frame`, rounded half to even."""
        x = np.rint(self.pos0[0] + frame * self.vel[0])
        y = np.rint(self.pos0[1] + frame * self.vel[1])
        return int(x), int(y)

    def in_bounds(self, height: int, width: int, frames: int) -> bool:
        for f in range(frames):
            x, y = self.position(f)
            if x < 0 or y < 0 or x + self.size > width or y + self.size > height:
                return False
        return True


@dataclass
class RenderedScene:
    """
    A rendered clip and its per-frame ground truth.

    Attributes:
        video: F x 3 x H x W float32 pixels
        masks: F x H x W bool occupancy
        depth: F x H x W float32 normalized inverse depth
    """
    video: np.ndarray
    masks: np.ndarray
    depth: np.ndarray


def shape_stencil(shape: str, size: int) -> np.ndarray:
    """
    Occupancy of a shape inside its size x size bounding box.

    Circles keep the pixels whose centres lie within size/2 of the box centre;
    triangles point up with the base on the bottom row.
    """
    centres = np.arange(size) + 0.5
    yy, xx = np.meshgrid(centres, centres, indexing="ij")
    half = size / 2.0
    if shape == "square":
        return np.ones((size, size), dtype=bool)
    if shape == "circle":
        return (yy - half) ** 2 + (xx - half) ** 2 <= half ** 2
    if shape == "triangle":
        return np.abs(xx - half) <= yy / size * half
    raise ValidationError(f"unknown shape '{shape}', expected one of {SHAPES}")


def occupancy(spec: SceneSpec, frame: int, height: int, width: int) -> np.ndarray:
    """H x W boolean mask of the shape at `frame`."""
    mask = np.zeros((height, width), dtype=bool)
    if spec.shape is None:
        return mask
    x, y = spec.position(frame)
    stencil = shape_stencil(spec.shape, spec.size)
    y0, x0 = max(y, 0), max(x, 0)
    y1, x1 = min(y + spec.size, height), min(x + spec.size, width)
    if y1 > y0 and x1 > x0:
        mask[y0:y1, x0:x1] = stencil[y0 - y:y1 - y, x0 - x:x1 - x]
    return mask


def inverse_depth(depth: float) -> float:
    """Normalized inverse depth: 1 at the nearest admissible depth, 0 at the background plane."""
    return (1.0 / depth - 1.0) / (1.0 / MIN_DEPTH - 1.0)


def _place(rng: np.random.Generator, size: int, height: int, width: int) -> Tuple[float, float]:
    return (float(rng.uniform(0, width - size)), float(rng.uniform(0, height - size)))


def gen_scene(seed: int, height: int = 32, width: int = 32, frames: int = 8, still_prob: float = 0.0) -> SceneSpec:
    """
    Draw a scene from the "scene" stream of `seed`.

    Args:
        seed: Scene seed
        height: Frame height (>= 16)
        width: Frame width (>= 16)
        frames: Number of frames the trajectory must stay inside
        still_prob: Probability of a static scene

    Returns:
        SceneSpec: A scene whose shape stays inside the frame for all frames
    """
    if height < 16 or width < 16:
        raise ValidationError(f"frames must be at least 16x16, got {height}x{width}")
    if frames < 1:
        raise ValidationError(f"frames must be >= 1, got {frames}")
    rng = stream(seed, "scene")
    shape = SHAPES[int(rng.integers(len(SHAPES)))]
    color = list(COLORS)[int(rng.integers(len(COLORS)))]
    size = int(rng.integers(MIN_SIZE, MAX_SIZE + 1))
    depth = float(rng.uniform(MIN_DEPTH, MAX_DEPTH))
    direction = list(DIRECTIONS)[int(rng.integers(len(DIRECTIONS)))]
    still = float(rng.random()) < still_prob
    ux, uy = DIRECTIONS[direction]

    base = dict(shape=shape, color=color, size=size, depth=depth, seed=seed)
    for _ in range(MAX_ATTEMPTS):
        speed = 0.0 if still else float(rng.uniform(MIN_SPEED, MAX_SPEED))
        vel = (ux * speed, uy * speed)
        spec = SceneSpec(pos0=_place(rng, size, height, width), vel=vel, **base)
        if spec.in_bounds(height, width, frames):
            return spec

    extent = (width if ux else height) - size
    speed = extent / max(frames - 1, 1)
    start = 0.0 if ux + uy > 0 else float(extent)
    other = float(rng.uniform(0, (height if ux else width) - size))
    pos0 = (start, other) if ux else (other, start)
    logger.warning(f"Scene seed {seed}: no in-bounds trajectory after {MAX_ATTEMPTS} draws, clamping speed to {speed:.3f}")
    return SceneSpec(pos0=pos0, vel=(ux * speed, uy * speed), **base)


def render_video(spec: SceneSpec, height: int = 32, width: int = 32, frames: int = 8) -> RenderedScene:
    """
    Hard-rasterize a scene on the light-gray background.

    Args:
        spec: Scene description
        height: Frame height
        width: Frame width
        frames: Number of frames

    Returns:
        RenderedScene: Video, occupancy masks and inverse-depth maps
    """
    video = np.full((frames, 3, height, width), BACKGROUND, dtype=np.float32)
    masks = np.zeros((frames, height, width), dtype=bool)
    depth = np.zeros((frames, height, width), dtype=np.float32)
    if spec.shape is not None:
        color = np.asarray(COLORS[spec.color], dtype=np.float32)
        value = np.float32(inverse_depth(spec.depth))
        for f in range(frames):
            mask = occupancy(spec, f, height, width)
            masks[f] = mask
            video[f][:, mask] = color[:, None]
            depth[f][mask] = value
    return RenderedScene(video=video, masks=masks, depth=depth)


def direction_of(spec: SceneSpec) -> Optional[str]:
    """Dominant motion direction, or None for a static scene."""
    vx, vy = spec.vel
    if vx == 0 and vy == 0:
        return None
    if abs(vx) >= abs(vy):
        return "right" if vx > 0 else "left"
    return "down" if vy > 0 else "up"


def caption_of(spec: SceneSpec) -> str:
    """
    Caption from the template "a {color} {shape} moving {direction}".
    """
    if spec.shape is None:
        return ""
    direction = direction_of(spec)
    if direction is None:
        return f"a {spec.color} {spec.shape} staying still"
    return f"a {spec.color} {spec.shape} moving {direction}"


class BaseVideoGenerator(ABC):
    """
    Abstract base class for synthetic video generators
    """

    @abstractmethod
    def generate_example(self, index: int) -> Dict[str, Any]:
        """
        Generate the example at `index`.

        Args:
            index: Sample index

        Returns:
            Dict[str, Any]: A dictionary representing a single example
        """

    def generate(self, num_examples: int) -> VideoDataset:
        """
        Generate examples 0..num_examples-1 as a dataset.

        Args:
            num_examples: Number of examples to generate

        Returns:
            VideoDataset: A dataset containing the generated examples
        """
        return VideoDataset([self.generate_example(i) for i in range(num_examples)])


class MovingShapesGenerator(BaseVideoGenerator):
    """
    Generator of single moving shapes with per-sample scene seeds derived from a dataset seed
    """

    def __init__(self, seed: int = 0, height: int = 32, width: int = 32, frames: int = 8,
                 still_fraction: float = 0.0):
        """
        Initialize the generator.

        Args:
            seed: Dataset seed
            height: Frame height
            width: Frame width
            frames: Frames per clip
            still_fraction: Probability of a static clip
        """
        if not 0.0 <= still_fraction <= 1.0:
            raise ValidationError(f"still_fraction must lie in [0, 1], got {still_fraction}")
        self.seed = seed
        self.height = height
        self.width = width
        self.frames = frames
        self.still_fraction = still_fraction

    def sample_seed(self, index: int) -> int:
        return derive_seed(self.seed, "scene", index)

    def generate_example(self, index: int) -> Dict[str, Any]:
        seed = self.sample_seed(index)
        spec = gen_scene(seed, self.height, self.width, self.frames, still_prob=self.still_fraction)
        return {
            'id': f"sample_{index:05d}",
            'seed': seed,
            'caption': caption_of(spec),
            'scene': spec,
        }

    def render(self, example: Dict[str, Any]) -> RenderedScene:
        return render_video(example['scene'], self.height, self.width, self.frames)
