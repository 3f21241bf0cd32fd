"""Minimal dense-network stack with hand-derived reverse-mode gradients.

Hot kernels (layer forward/backward) run in a compiled core when the
extension built, with a numpy fallback selected at import; see `backend`.
"""

from .backend import active_backend, set_backend
from .dense import DenseNet, grad_check
from .optim import AdamW, OneCycleSchedule

__all__ = [
    "DenseNet",
    "grad_check",
    "AdamW",
    "OneCycleSchedule",
    "active_backend",
    "set_backend",
]
