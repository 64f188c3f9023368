"""
Variance-preserving diffusion schedules, forward noising and the training loss
"""
from dataclasses import dataclass
from typing import Union

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field, model_validator

from easyctrl.exceptions import ValidationError

Timestep = Union[int, torch.Tensor]


class ScheduleConfig(BaseModel):
    """
    Configuration of the linear-beta schedule
    """
    model_config = ConfigDict(extra="forbid")

    T: int = Field(default=200, ge=1)
    beta_start: float = 1e-4
    beta_end: float = 0.02

    @model_validator(mode="after")
    def _check_betas(self) -> "ScheduleConfig":
        if not (0.0 < self.beta_start <= self.beta_end < 1.0):
            raise ValueError(
                f"betas must satisfy 0 < beta_start <= beta_end < 1, "
                f"got beta_start={self.beta_start}, beta_end={self.beta_end}"
            )
        return self


@dataclass(frozen=True)
class NoiseSchedule:
    """
    Per-timestep signal and noise coefficients, indexed t = 0..T.

    The arrays are read-only; alpha_t^2 + sigma_t^2 = 1 holds within 1e-6.
    """
    T: int
    alpha: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=np.float32)
        sigma = np.array(self.sigma, dtype=np.float32)
        if alpha.shape != (self.T + 1,) or sigma.shape != (self.T + 1,):
            raise ValidationError(
                f"alpha and sigma must have length T+1={self.T + 1}, "
                f"got {alpha.shape} and {sigma.shape}"
            )
        if np.max(np.abs(alpha.astype(np.float64) ** 2 + sigma.astype(np.float64) ** 2 - 1.0)) > 1e-6:
            raise ValidationError("schedule is not variance-preserving")
        alpha.flags.writeable = False
        sigma.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "sigma", sigma)

    def coefficients(self, t: Timestep, like: torch.Tensor):
        """
        Look up (alpha_t, sigma_t) shaped to broadcast against `like`.

        Args:
            t: Integer timestep or a 1-D tensor with one timestep per leading item of `like`
            like: Tensor whose dtype and device the coefficients adopt

        Returns:
            tuple: (alpha_t, sigma_t) tensors
        """
        if isinstance(t, torch.Tensor) and t.ndim > 0:
            idx = t.detach().cpu().long().numpy()
            if idx.min() < 0 or idx.max() > self.T:
                raise ValidationError(f"timesteps must lie in [0, {self.T}]")
            shape = (len(idx),) + (1,) * (like.ndim - 1)
            a = torch.as_tensor(self.alpha[idx], dtype=like.dtype, device=like.device).reshape(shape)
            s = torch.as_tensor(self.sigma[idx], dtype=like.dtype, device=like.device).reshape(shape)
            return a, s
        step = int(t)
        if not 0 <= step <= self.T:
            raise ValidationError(f"timestep must lie in [0, {self.T}], got {step}")
        a = torch.tensor(float(self.alpha[step]), dtype=like.dtype, device=like.device)
        s = torch.tensor(float(self.sigma[step]), dtype=like.dtype, device=like.device)
        return a, s

    @classmethod
    def from_config(cls, config: ScheduleConfig) -> "NoiseSchedule":
        return build_schedule(config.T, config.beta_start, config.beta_end)


def build_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """
    Build a DDPM linear-beta schedule.

    The cumulative products are accumulated in float64 and stored in float32.

    Args:
        T: Number of diffusion steps
        beta_start: First beta
        beta_end: Last beta

    Returns:
        NoiseSchedule: The schedule with alpha_0 = 1 and sigma_0 = 0
    """
    if T < 1:
        raise ValidationError(f"T must be >= 1, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValidationError(
            f"betas must satisfy 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    alpha = np.sqrt(alpha_bar)
    sigma = np.sqrt(1.0 - alpha_bar)
    return NoiseSchedule(T=T, alpha=alpha, sigma=sigma)


def q_sample(z0: torch.Tensor, t: Timestep, eps: torch.Tensor, sched: NoiseSchedule) -> torch.Tensor:
    """
    Forward-noise a clean latent: alpha_t * z0 + sigma_t * eps.

    Args:
        z0: Clean latent
        t: Timestep, or one timestep per leading item
        eps: Noise of the same shape as z0
        sched: Noise schedule

    Returns:
        torch.Tensor: The noised latent z_t
    """
    if z0.shape != eps.shape:
        raise ValidationError(f"z0 and eps shapes differ: {tuple(z0.shape)} vs {tuple(eps.shape)}")
    alpha, sigma = sched.coefficients(t, z0)
    return alpha * z0 + sigma * eps


def training_loss(eps_pred: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
    """Mean squared error between predicted and true noise."""
    if eps_pred.shape != eps.shape:
        raise ValidationError(
            f"prediction and target shapes differ: {tuple(eps_pred.shape)} vs {tuple(eps.shape)}"
        )
    return torch.mean((eps_pred - eps) ** 2)


def snr(sched: NoiseSchedule, t: int) -> float:
    """
    Signal-to-noise ratio alpha_t^2 / sigma_t^2.

    Returns +inf at t = 0, where sigma_0 = 0.
    """
    if not 0 <= t <= sched.T:
        raise ValidationError(f"timestep must lie in [0, {sched.T}], got {t}")
    sigma = float(sched.sigma[t])
    if sigma == 0.0:
        return float("inf")
    return float(sched.alpha[t]) ** 2 / sigma ** 2
