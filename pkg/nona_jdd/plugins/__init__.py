from .finite_output import FiniteOutputPlugin
from .forward_timing import ForwardTimingPlugin

__all__ = [
    "FiniteOutputPlugin",
    "ForwardTimingPlugin",
]
