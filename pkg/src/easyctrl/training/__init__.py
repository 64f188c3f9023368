"""
Denoiser pretraining and condition-adapter training
"""

from easyctrl.training.trainer import (
    TrainConfig,
    TrainResult,
    Batch,
    lr_schedule,
    apply_dropout,
    frozen_paths,
    train_base,
    train_adapter,
)

__all__ = [
    'TrainConfig',
    'TrainResult',
    'Batch',
    'lr_schedule',
    'apply_dropout',
    'frozen_paths',
    'train_base',
    'train_adapter',
]
