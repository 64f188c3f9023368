"""
Writes synthetic datasets to disk: PPM frames, meta.json per sample, manifest.jsonl
"""
import logging
import os
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from easyctrl.core.dataloader import MANIFEST_NAME, META_NAME
from easyctrl.core.streaming import ordered_map
from easyctrl.exceptions import ValidationError
from easyctrl.generators.shapes import MovingShapesGenerator
from easyctrl.io.files import write_json, write_jsonl
from easyctrl.io.ppm import save_video_frames

logger = logging.getLogger(__name__)


class DataConfig(BaseModel):
    """
    Configuration of the synthetic dataset
    """
    model_config = ConfigDict(extra="forbid")

    height: int = Field(default=32, ge=16)
    width: int = Field(default=32, ge=16)
    frames: int = Field(default=8, ge=1)
    fps: int = Field(default=8, ge=1)
    n_train: int = Field(default=500, ge=1)
    n_eval: int = Field(default=64, ge=1)
    still_fraction: float = Field(default=0.2, ge=0.0, le=1.0)


def write_sample(out_dir: str, example: Dict[str, Any], generator: MovingShapesGenerator, fps: int) -> Dict[str, Any]:
    """
    Render one example into ``out_dir/<id>/`` and return its manifest record.
    """
    sample_dir = os.path.join(out_dir, example['id'])
    render = generator.render(example)
    frames = save_video_frames(sample_dir, render.video)
    meta = {
        'fps': fps,
        'num_frames': generator.frames,
        'width': generator.width,
        'height': generator.height,
        'caption': example['caption'],
        'seed': example['seed'],
        'scene': example['scene'].model_dump(mode="json"),
    }
    write_json(os.path.join(sample_dir, META_NAME), meta)
    return {
        'id': example['id'],
        'caption': example['caption'],
        'seed': example['seed'],
        'paths': {
            'frames': [f"{example['id']}/{name}" for name in frames],
            'meta': f"{example['id']}/{META_NAME}",
        },
    }


def make_dataset(n: int, seed: int, out_dir: str, cfg: Optional[DataConfig] = None,
                 progress_bar: bool = True, workers: Optional[int] = None) -> str:
    """
    Write `n` synthetic samples and their manifest.

    Output bytes are a pure function of (n, seed, cfg); reruns overwrite with identical files.

    Args:
        n: Number of samples
        seed: Dataset seed; sample i uses the scene seed derived from (seed, i)
        out_dir: Output directory
        cfg: Dataset configuration
        progress_bar: Whether to show a progress bar
        workers: Thread count

    Returns:
        str: Path of manifest.jsonl
    """
    cfg = cfg or DataConfig()
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    os.makedirs(out_dir, exist_ok=True)
    generator = MovingShapesGenerator(seed=seed, height=cfg.height, width=cfg.width, frames=cfg.frames,
                                      still_fraction=cfg.still_fraction)

    def job(index: int) -> Dict[str, Any]:
        return write_sample(out_dir, generator.generate_example(index), generator, cfg.fps)

    records = ordered_map(job, range(n), workers=workers)
    if progress_bar:
        records = tqdm(records, total=n, desc="Writing samples")
    manifest = list(records)

    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    write_jsonl(manifest_path, manifest)
    logger.info(f"Wrote {n} samples (seed {seed}) to {out_dir}")
    return manifest_path
