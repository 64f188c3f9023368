"""
DataLoader reads synthetic datasets and generated-video directories from disk
"""
import glob
import logging
import os
from typing import Any, Dict, List, Optional

from easyctrl.core.dataset import VideoDataset
from easyctrl.core.streaming import ordered_map
from easyctrl.exceptions import FormatError, ValidationError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
META_NAME = "meta.json"


class DataLoader:
    """
    DataLoader turns an on-disk dataset into a VideoDataset
    """

    def __init__(self,
                 source_type: str,
                 source_path: str,
                 load_videos: bool = True,
                 workers: Optional[int] = None):
        """
        Initialize a DataLoader.

        Args:
            source_type: "manifest" (a dataset written by make_dataset) or "directory"
                (sample directories of PPM frames, e.g. generated videos)
            source_path: Manifest file, dataset directory, or video directory
            load_videos: Whether to decode the PPM frames into a ``video`` array
            workers: Thread count for decoding
        """
        self.source_type = source_type
        self.source_path = source_path
        self.load_videos = load_videos
        self.workers = workers

    @classmethod
    def from_manifest(cls, path: str, load_videos: bool = True, workers: Optional[int] = None) -> 'DataLoader':
        """
        Create a loader for a dataset written by make_dataset.

        Args:
            path: The manifest.jsonl file or the directory containing it
            load_videos: Whether to decode frames
            workers: Thread count for decoding

        Returns:
            DataLoader: A configured DataLoader instance
        """
        if os.path.isdir(path):
            path = os.path.join(path, MANIFEST_NAME)
        return cls(source_type="manifest", source_path=path, load_videos=load_videos, workers=workers)

    @classmethod
    def from_directory(cls, path: str, load_videos: bool = True, workers: Optional[int] = None) -> 'DataLoader':
        """
        Create a loader for a directory of videos.

        `path` may itself hold frame_*.ppm files (a single video) or contain one
        sub-directory per video.
        """
        return cls(source_type="directory", source_path=path, load_videos=load_videos, workers=workers)

    def load(self) -> VideoDataset:
        """
        Load the records.

        Returns:
            VideoDataset: One record per sample, ordered by id
        """
        if self.source_type == "manifest":
            records = self._manifest_records()
        elif self.source_type == "directory":
            records = self._directory_records()
        else:
            raise ValueError(f"Unsupported source type: {self.source_type}")
        if self.load_videos:
            records = list(ordered_map(self._decode, records, workers=self.workers))
        logger.info(f"Loaded {len(records)} samples from {self.source_path}")
        return VideoDataset(records)

    def _manifest_records(self) -> List[Dict[str, Any]]:
        from easyctrl.io.files import read_jsonl

        if not os.path.exists(self.source_path):
            raise ValidationError(f"dataset manifest not found: {self.source_path}")
        root = os.path.dirname(os.path.abspath(self.source_path))
        try:
            entries = read_jsonl(self.source_path)
        except ValueError as exc:
            raise FormatError(f"{self.source_path} is not valid JSON lines: {exc}") from exc
        records = []
        for entry in entries:
            missing = {'id', 'caption', 'seed', 'paths'} - set(entry)
            if missing:
                raise FormatError(f"manifest record is missing {sorted(missing)}: {entry}")
            record = dict(entry)
            record['dir'] = os.path.join(root, entry['id'])
            record['meta_path'] = os.path.join(root, entry['paths']['meta'])
            records.append(record)
        return records

    def _directory_records(self) -> List[Dict[str, Any]]:
        root = self.source_path
        if not os.path.isdir(root):
            raise ValidationError(f"video directory not found: {root}")
        if glob.glob(os.path.join(root, "frame_*.ppm")):
            dirs = [root]
        else:
            dirs = sorted(d for d in glob.glob(os.path.join(root, "*"))
                          if os.path.isdir(d) and glob.glob(os.path.join(d, "frame_*.ppm")))
        if not dirs:
            raise ValidationError(f"no videos found under {root}")
        records = []
        for d in dirs:
            meta_path = os.path.join(d, META_NAME)
            records.append({
                'id': os.path.basename(os.path.normpath(d)),
                'dir': d,
                'meta_path': meta_path if os.path.exists(meta_path) else None,
            })
        return records

    def _decode(self, record: Dict[str, Any]) -> Dict[str, Any]:
        from easyctrl.generators.shapes import SceneSpec
        from easyctrl.io.files import read_json
        from easyctrl.io.ppm import load_video_frames

        record = dict(record)
        record['video'] = load_video_frames(record['dir'])
        if record.get('meta_path'):
            meta = read_json(record['meta_path'])
            record['meta'] = meta
            if meta.get('scene') is not None:
                record['scene'] = SceneSpec(**meta['scene'])
            record.setdefault('caption', meta.get('caption', ""))
        return record

    def __repr__(self) -> str:
        return f"DataLoader(source_type='{self.source_type}', source_path='{self.source_path}')"
