"""
Core components: random streams, diffusion schedule, latent codec and data access
"""

from easyctrl.core.rng import stream, derive_seed, STREAMS
from easyctrl.core.schedule import (
    ScheduleConfig,
    NoiseSchedule,
    build_schedule,
    q_sample,
    training_loss,
    snr,
)
from easyctrl.core.codec import CodecConfig, encode_video, decode_video, encode_image
from easyctrl.core.dataset import VideoDataset
from easyctrl.core.dataloader import DataLoader
from easyctrl.core.streaming import BatchStream, ordered_map, thread_count

__all__ = [
    # Random streams
    'stream',
    'derive_seed',
    'STREAMS',

    # Diffusion
    'ScheduleConfig',
    'NoiseSchedule',
    'build_schedule',
    'q_sample',
    'training_loss',
    'snr',

    # Codec
    'CodecConfig',
    'encode_video',
    'decode_video',
    'encode_image',

    # Data
    'VideoDataset',
    'DataLoader',
    'BatchStream',
    'ordered_map',
    'thread_count',
]
