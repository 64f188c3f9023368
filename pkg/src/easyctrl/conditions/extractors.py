"""
Record-level condition extractors for every modality
"""
from typing import Callable, Dict, Union

import numpy as np

from easyctrl.conditions.base import BaseConditionExtractor, ConditionMap, Modality, Record
from easyctrl.conditions.edges import cond_canny, cond_sketch
from easyctrl.conditions.scene import cond_depth, cond_raw_pixels, cond_segmask, empty_condition
from easyctrl.exceptions import ValidationError


def first_frame_image(record: Record) -> np.ndarray:
    """Frame 0 of the record's decoded video as H x W x 3."""
    if 'video' not in record:
        raise ValidationError(f"record {record.get('id')} has no decoded video")
    return np.transpose(np.asarray(record['video'])[0], (1, 2, 0))


class FunctionExtractor(BaseConditionExtractor):
    """
    An extractor that applies a given function to records.
    """

    def __init__(self, modality: Modality, func: Callable[[Record], ConditionMap]):
        self.modality = modality
        self.func = func

    def extract(self, record: Record) -> ConditionMap:
        return self.func(record)


class EdgeExtractor(BaseConditionExtractor):
    """
    Canny or sketch edges of the first frame.
    """

    def __init__(self, modality: Modality = Modality.CANNY, low: float = 0.1, high: float = 0.2):
        if modality not in (Modality.CANNY, Modality.SKETCH):
            raise ValidationError(f"EdgeExtractor handles canny and sketch, got {modality}")
        self.modality = modality
        self.low = low
        self.high = high

    def extract(self, record: Record) -> ConditionMap:
        image = first_frame_image(record)
        if self.modality is Modality.CANNY:
            return cond_canny(image, self.low, self.high)
        return cond_sketch(image, self.low, self.high)


class SceneExtractor(BaseConditionExtractor):
    """
    Ground-truth depth or segmentation of the first frame, rendered from the record's scene.
    """

    def __init__(self, modality: Modality = Modality.DEPTH):
        if modality not in (Modality.DEPTH, Modality.SEGMASK):
            raise ValidationError(f"SceneExtractor handles depth and segmask, got {modality}")
        self.modality = modality

    def extract(self, record: Record) -> ConditionMap:
        frames, _, height, width = np.asarray(record['video']).shape
        render = cond_depth if self.modality is Modality.DEPTH else cond_segmask
        return render(record['scene'], 0, height=height, width=width, frames=frames)


def _empty(record: Record) -> ConditionMap:
    _, _, height, width = np.asarray(record['video']).shape
    return empty_condition(height, width)


EXTRACTORS: Dict[Modality, Callable[[], BaseConditionExtractor]] = {
    Modality.RAW_PIXELS: lambda: FunctionExtractor(Modality.RAW_PIXELS, lambda r: cond_raw_pixels(r['video'])),
    Modality.CANNY: lambda: EdgeExtractor(Modality.CANNY),
    Modality.SKETCH: lambda: EdgeExtractor(Modality.SKETCH),
    Modality.DEPTH: lambda: SceneExtractor(Modality.DEPTH),
    Modality.SEGMASK: lambda: SceneExtractor(Modality.SEGMASK),
    Modality.EMPTY: lambda: FunctionExtractor(Modality.EMPTY, _empty),
}


def get_extractor(modality: Union[str, Modality]) -> BaseConditionExtractor:
    """
    Extractor for a modality name.

    Args:
        modality: One of the Modality values

    Returns:
        BaseConditionExtractor: A fresh extractor
    """
    try:
        key = Modality(modality)
    except ValueError as exc:
        raise ValidationError(f"unknown modality '{modality}', expected one of {[m.value for m in Modality]}") from exc
    return EXTRACTORS[key]()
