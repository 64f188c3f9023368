"""
Condition maps and extractors for the supported modalities
"""

from easyctrl.conditions.base import (
    Modality,
    ConditionMap,
    BaseConditionExtractor,
    TRAINABLE_MODALITIES,
)
from easyctrl.conditions.edges import cond_canny, cond_sketch, canny_edges
from easyctrl.conditions.scene import (
    cond_raw_pixels,
    cond_depth,
    cond_segmask,
    empty_condition,
    PALETTE,
)
from easyctrl.conditions.extractors import (
    FunctionExtractor,
    EdgeExtractor,
    SceneExtractor,
    get_extractor,
)

__all__ = [
    # Base
    'Modality',
    'ConditionMap',
    'BaseConditionExtractor',
    'TRAINABLE_MODALITIES',

    # Extractors
    'cond_raw_pixels',
    'cond_canny',
    'cond_sketch',
    'canny_edges',
    'cond_depth',
    'cond_segmask',
    'empty_condition',
    'PALETTE',
    'FunctionExtractor',
    'EdgeExtractor',
    'SceneExtractor',
    'get_extractor',
]
