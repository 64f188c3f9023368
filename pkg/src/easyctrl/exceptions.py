"""
Exception hierarchy shared by every easyctrl module
"""
from typing import Optional


class EasyControlError(Exception):
    """
    Base class for all errors raised by easyctrl.
    """


class ValidationError(EasyControlError, ValueError):
    """
    An argument, configuration value or tensor shape violates a documented contract.
    """


class FormatError(EasyControlError):
    """
    A file on disk does not follow the expected format.

    Attributes:
        offset: Byte offset at which the problem was detected, if known
    """

    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericalError(EasyControlError, ArithmeticError):
    """
    A numerical computation produced NaN or infinite values and was aborted.
    """

    def __init__(self, message: str, step: Optional[int] = None,
                 lr: Optional[float] = None, grad_norm: Optional[float] = None):
        details = []
        if step is not None:
            details.append(f"step={step}")
        if lr is not None:
            details.append(f"lr={lr:.3e}")
        if grad_norm is not None:
            details.append(f"grad_norm={grad_norm:.3e}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
        self.step = step
        self.lr = lr
        self.grad_norm = grad_norm
