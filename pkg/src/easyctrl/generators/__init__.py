"""
Synthetic moving-shape video generators
"""

from easyctrl.generators.shapes import (
    SceneSpec,
    RenderedScene,
    BaseVideoGenerator,
    MovingShapesGenerator,
    gen_scene,
    render_video,
    caption_of,
    occupancy,
)
from easyctrl.generators.writer import DataConfig, make_dataset

__all__ = [
    'SceneSpec',
    'RenderedScene',
    'BaseVideoGenerator',
    'MovingShapesGenerator',
    'gen_scene',
    'render_video',
    'caption_of',
    'occupancy',
    'DataConfig',
    'make_dataset',
]
