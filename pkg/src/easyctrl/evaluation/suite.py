"""
Evaluation suite: per-video metrics over a directory of generated videos and the report.json they roll up into
"""
import logging
import os
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from easyctrl.conditions.base import ConditionMap
from easyctrl.core.dataloader import DataLoader
from easyctrl.core.streaming import ordered_map
from easyctrl.evaluation.metrics import avg_flow, first_frame_psnr, temporal_consistency
from easyctrl.exceptions import ValidationError
from easyctrl.io.files import read_json, write_json

logger = logging.getLogger(__name__)

REPORT_NAME = "report.json"
METRICS = ('avg_flow', 'first_frame_psnr', 'temporal_consistency')


class EvalConfig(BaseModel):
    """
    Block-matching parameters of the motion metric
    """
    model_config = ConfigDict(extra="forbid")

    block: int = Field(default=4, ge=1)
    radius: int = Field(default=4, ge=0)


class VideoMetrics(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    avg_flow: float = Field(ge=0.0)
    first_frame_psnr: Optional[float] = None
    temporal_consistency: float = Field(ge=0.0)


class MetricsReport(BaseModel):
    """
    Aggregated metrics of a set of videos.

    The top-level metric fields are means over `per_video`; `median` holds the
    medians. `first_frame_psnr` is present only when a reference condition was given.
    """
    model_config = ConfigDict(extra="forbid")

    count: int = Field(ge=1)
    avg_flow: float = Field(ge=0.0)
    first_frame_psnr: Optional[float] = None
    temporal_consistency: float = Field(ge=0.0)
    median: Dict[str, Optional[float]]
    per_video: List[VideoMetrics]


def evaluate_video(record: Dict[str, Any], ref: Optional[ConditionMap], cfg: EvalConfig) -> VideoMetrics:
    video = record['video']
    return VideoMetrics(
        id=record['id'],
        avg_flow=avg_flow(video, cfg.block, cfg.radius),
        first_frame_psnr=first_frame_psnr(video, ref) if ref is not None else None,
        temporal_consistency=temporal_consistency(video),
    )


def aggregate(per_video: List[VideoMetrics]) -> MetricsReport:
    """
    Roll per-video metrics up into a report.
    """
    if not per_video:
        raise ValidationError("cannot aggregate an empty set of videos")
    frame = pd.DataFrame([m.model_dump() for m in per_video])
    has_psnr = frame['first_frame_psnr'].notna().all()
    columns = list(METRICS) if has_psnr else ['avg_flow', 'temporal_consistency']
    values = frame[columns].astype(np.float64)
    means = values.mean()
    medians = values.median()
    return MetricsReport(
        count=len(per_video),
        avg_flow=float(means['avg_flow']),
        first_frame_psnr=float(means['first_frame_psnr']) if has_psnr else None,
        temporal_consistency=float(means['temporal_consistency']),
        median={name: (float(medians[name]) if name in medians else None) for name in METRICS},
        per_video=per_video,
    )


def eval_suite(video_dir: str, ref: Optional[ConditionMap] = None, cfg: Optional[EvalConfig] = None,
               out_path: Optional[str] = None, workers: Optional[int] = None) -> MetricsReport:
    """
    Evaluate every video under `video_dir` and write report.json.

    Args:
        video_dir: A video directory or a directory of video directories
        ref: Raw-pixel reference condition for first-frame PSNR
        cfg: Block-matching configuration
        out_path: Report path (defaults to video_dir/report.json)
        workers: Thread count for per-video evaluation

    Returns:
        MetricsReport: The written report
    """
    cfg = cfg or EvalConfig()
    dataset = DataLoader.from_directory(video_dir, workers=workers).load()
    if len(dataset) == 0:
        raise ValidationError(f"no videos found under {video_dir}")
    per_video = list(ordered_map(lambda r: evaluate_video(r, ref, cfg), list(dataset), workers=workers))
    report = aggregate(sorted(per_video, key=lambda m: m.id))

    out_path = out_path or os.path.join(video_dir, REPORT_NAME)
    write_json(out_path, report.model_dump())
    logger.info(f"Evaluated {report.count} videos: avg_flow={report.avg_flow:.4f}, "
                f"temporal_consistency={report.temporal_consistency:.4f}")
    return report


def load_report(path: str) -> MetricsReport:
    """Read a report.json written by eval_suite."""
    return MetricsReport.model_validate(read_json(path))
