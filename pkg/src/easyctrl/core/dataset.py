"""
VideoDataset is the in-memory collection of manifest records used by training and evaluation
"""
from typing import Any, Dict, Iterator, List, Union

import numpy as np

from easyctrl.core.rng import stream

Record = Dict[str, Any]


class VideoDataset:
    """
    VideoDataset holds sample records (id, caption, seed, scene, paths, and
    optionally a decoded ``video``) that can be indexed, iterated and sampled.
    """

    def __init__(self, records: List[Record]):
        """
        Initialize a VideoDataset with a list of records.

        Args:
            records: List of sample dictionaries
        """
        self._data = records
        self._index = list(range(len(records)))

    def __len__(self) -> int:
        return len(self._index)

    def __getitem__(self, idx: Union[int, slice]) -> Union[Record, List[Record]]:
        """
        Get a record or slice of records by index.

        Args:
            idx: Integer index or slice

        Returns:
            The record or list of records
        """
        if isinstance(idx, slice):
            return [self._data[i] for i in self._index[idx]]
        return self._data[self._index[idx]]

    def __iter__(self) -> Iterator[Record]:
        for i in self._index:
            yield self._data[i]

    def sample_indices(self, n: int, seed: int, step: int) -> np.ndarray:
        """
        Draw `n` record indices with replacement from the "batch" stream keyed by `step`.
        """
        if len(self) == 0:
            raise ValueError("cannot sample from an empty dataset")
        return stream(seed, "batch", step).integers(0, len(self), size=n)

    def __repr__(self) -> str:
        return f"VideoDataset(num_records={len(self)})"
