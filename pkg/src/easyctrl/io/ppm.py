"""
Binary PPM (P6, maxval 255) frames and frame directories
"""
import glob
import io
import os

import numpy as np
from PIL import Image, UnidentifiedImageError

from easyctrl.exceptions import FormatError, ValidationError
from easyctrl.io.files import atomic_write_bytes

FRAME_PATTERN = "frame_{:03d}.ppm"


def quantize(image: np.ndarray) -> np.ndarray:
    """Map [0, 1] floats to uint8 by round(v * 255) after clipping."""
    return np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def encode_ppm(image: np.ndarray) -> bytes:
    """
    Serialize an H x W x 3 float image in [0, 1] as P6 bytes.
    """
    if image.ndim != 3 or image.shape[-1] != 3:
        raise ValidationError(f"expected an H x W x 3 image, got shape {image.shape}")
    buffer = io.BytesIO()
    Image.fromarray(quantize(image)).save(buffer, format="PPM")
    return buffer.getvalue()


def save_ppm(path: str, image: np.ndarray) -> None:
    atomic_write_bytes(path, encode_ppm(image))


def load_ppm(path: str) -> np.ndarray:
    """
    Read a PPM file as an H x W x 3 float32 image in [0, 1].
    """
    try:
        with Image.open(path) as img:
            if img.format != "PPM":
                raise FormatError(f"{path} is a {img.format} file, expected PPM", offset=0)
            pixels = np.asarray(img.convert("RGB"), dtype=np.float32)
    except UnidentifiedImageError as exc:
        raise FormatError(f"{path} is not a readable PPM image", offset=0) from exc
    return pixels / np.float32(255.0)


def save_video_frames(directory: str, video: np.ndarray) -> list:
    """
    Write an F x 3 x H x W video as frame_000.ppm, frame_001.ppm, ...

    Returns:
        list: Written file names, relative to `directory`
    """
    if video.ndim != 4 or video.shape[1] != 3:
        raise ValidationError(f"expected an F x 3 x H x W video, got shape {video.shape}")
    names = []
    for f, frame in enumerate(video):
        name = FRAME_PATTERN.format(f)
        save_ppm(os.path.join(directory, name), np.transpose(frame, (1, 2, 0)))
        names.append(name)
    return names


def load_video_frames(directory: str) -> np.ndarray:
    """Read every frame_*.ppm in `directory` (sorted) as an F x 3 x H x W float32 video."""
    paths = sorted(glob.glob(os.path.join(directory, "frame_*.ppm")))
    if not paths:
        raise ValidationError(f"no frame_*.ppm files in {directory}")
    frames = [np.transpose(load_ppm(p), (2, 0, 1)) for p in paths]
    return np.stack(frames).astype(np.float32)
