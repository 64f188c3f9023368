"""
DDIM sampling with classifier-free guidance and VideoInit
"""

from easyctrl.sampling.sampler import (
    SampleConfig,
    videoinit,
    lowpass_mask,
    cfg_combine,
    ddim_step,
    ddim_timesteps,
    generate,
    save_sample,
)

__all__ = [
    'SampleConfig',
    'videoinit',
    'lowpass_mask',
    'cfg_combine',
    'ddim_step',
    'ddim_timesteps',
    'generate',
    'save_sample',
]
