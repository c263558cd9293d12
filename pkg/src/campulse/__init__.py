"""campulse: pulse-wave recovery from video via a selective state-space core."""

__version__ = "0.1.0"

from .autodiff import Tensor, backward, grad_check  # noqa: F401
from .backend import ACTIVE as kernel_backend  # noqa: F401
