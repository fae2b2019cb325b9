from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from ._exceptions import DataError, ShapeMismatchError
from ._tensor import Tensor
from .settings import settings

MOMENT_PREFIXES = ("adam/m/", "adam/v/")
STEP_KEY = "adam/step"


@dataclass
class AdamState:
    lr: float = field(default_factory=lambda: settings.ADAM_LR)
    betas: Tuple[float, float] = field(
        default_factory=lambda: tuple(settings.ADAM_BETAS)
    )
    eps: float = field(default_factory=lambda: settings.ADAM_EPS)
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=OrderedDict)
    v: Dict[str, np.ndarray] = field(default_factory=OrderedDict)

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        state = OrderedDict()
        for name, moment in self.m.items():
            state[f"adam/m/{name}"] = moment.copy()
        for name, moment in self.v.items():
            state[f"adam/v/{name}"] = moment.copy()
        state[STEP_KEY] = np.asarray(self.step, dtype=np.float32)
        return state

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        if STEP_KEY not in state:
            raise DataError("optimizer state has no step counter")
        self.step = int(np.asarray(state[STEP_KEY]).item())
        self.m = OrderedDict()
        self.v = OrderedDict()
        for key, value in state.items():
            if key.startswith("adam/m/"):
                self.m[key[len("adam/m/") :]] = np.array(value)
            elif key.startswith("adam/v/"):
                self.v[key[len("adam/v/") :]] = np.array(value)


def adam_step(
    params: Mapping[str, Tensor],
    state: AdamState,
    grads: Optional[Mapping[str, np.ndarray]] = None,
) -> AdamState:
    """
    One bias-corrected Adam update of every parameter, in place. Gradients
    default to each tensor's ``.grad``; a missing gradient counts as zero.
    """
    beta1, beta2 = state.betas
    state.step += 1
    correction1 = 1 - beta1 ** state.step
    correction2 = 1 - beta2 ** state.step

    for name, tensor in params.items():
        grad = tensor.grad if grads is None else grads.get(name)
        if grad is None:
            grad = np.zeros_like(tensor.data)
        if grad.shape != tensor.shape:
            raise ShapeMismatchError(
                "adam_step",
                f"{name}: gradient {grad.shape} vs parameter {tensor.shape}",
            )
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(tensor.data)
            v = np.zeros_like(tensor.data)
        elif m.shape != tensor.shape:
            raise ShapeMismatchError(
                "adam_step", f"{name}: moment {m.shape} vs parameter {tensor.shape}"
            )

        grad = grad.astype(tensor.dtype, copy=False)
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad * grad
        update = state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        tensor.data = (tensor.data - update).astype(tensor.dtype, copy=False)
        state.m[name] = m.astype(tensor.dtype, copy=False)
        state.v[name] = v.astype(tensor.dtype, copy=False)
    return state
