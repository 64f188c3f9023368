"""
Condition maps and the base class for condition extractors
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Union

import numpy as np
import torch

from easyctrl.exceptions import ValidationError

Record = Dict[str, Any]


class Modality(str, Enum):
    RAW_PIXELS = "raw_pixels"
    CANNY = "canny"
    SKETCH = "sketch"
    DEPTH = "depth"
    SEGMASK = "segmask"
    EMPTY = "empty"


# modalities an adapter can be trained for
TRAINABLE_MODALITIES = tuple(m.value for m in Modality if m is not Modality.EMPTY)


@dataclass(frozen=True)
class ConditionMap:
    """
    A single-frame condition image in normalized RGB.

    Attributes:
        modality: Which extractor produced the map
        data: H x W x 3 float32 array with values in [0, 1]
    """
    modality: Modality
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 3 or data.shape[-1] != 3:
            raise ValidationError(f"condition data must be H x W x 3, got shape {data.shape}")
        if data.size and (data.min() < 0.0 or data.max() > 1.0 or not np.all(np.isfinite(data))):
            raise ValidationError("condition data must lie in [0, 1]")
        modality = Modality(self.modality)
        if modality is Modality.EMPTY and np.any(data != 0):
            raise ValidationError("an empty condition must be all zeros")
        object.__setattr__(self, "modality", modality)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def to_tensor(self) -> torch.Tensor:
        """3 x H x W float32 tensor for the adapter's feature extractor."""
        return torch.from_numpy(np.ascontiguousarray(np.transpose(self.data, (2, 0, 1))))


def gray_to_rgb(image: np.ndarray) -> np.ndarray:
    """Replicate an H x W map into H x W x 3."""
    return np.repeat(image[:, :, None], 3, axis=2).astype(np.float32)


class BaseConditionExtractor(ABC):
    """
    Abstract base class for condition extractors.

    Extractors turn a dataset record (carrying ``video`` and ``scene``) into
    the ConditionMap that conditions its generation.
    """

    modality: Modality

    @abstractmethod
    def extract(self, record: Record) -> ConditionMap:
        """
        Extract the condition of a single record.

        Args:
            record: Dataset record with a decoded video and its scene spec

        Returns:
            ConditionMap: The extracted condition
        """

    def batch_extract(self, records: List[Record]) -> List[ConditionMap]:
        """
        Extract conditions for a batch of records.

        The default implementation calls extract on each record individually.

        Args:
            records: List of dataset records

        Returns:
            List[ConditionMap]: One condition per record
        """
        return [self.extract(record) for record in records]

    def __call__(self, record_or_batch: Union[Record, List[Record]]) -> Union[ConditionMap, List[ConditionMap]]:
        if isinstance(record_or_batch, list):
            return self.batch_extract(record_or_batch)
        return self.extract(record_or_batch)
