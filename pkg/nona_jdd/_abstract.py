import inspect
import types
from collections import OrderedDict
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from nona_jdd.settings import settings

from ._exceptions import DataError, ShapeMismatchError
from ._functional import BatchNormStats, batch_norm, conv2d, linear
from ._tensor import Tensor
from ._utils import counter_rng
from .config import ModelConfig

RUNNING_MEAN = "running_mean"
RUNNING_VAR = "running_var"


class AbstractNetwork:
    """
    A named, ordered parameter set plus the forward pass that uses it.

    Subclasses declare their layers in ``build()`` through the ``add_*``
    helpers; registration order fixes both the initialisation draws and
    the checkpoint order, so the same ``(config, seed)`` always yields the
    same parameters.
    """

    # salt separating the init streams of different network kinds
    stream = 0

    def __init__(self, config: Optional[ModelConfig] = None, seed: int = 0, dtype=None):
        self.config = config or ModelConfig()
        self.seed = int(seed)
        self.dtype = np.dtype(dtype or settings.DEFAULT_DTYPE)
        self.training = True
        self.timings: List[float] = []
        self._params: "OrderedDict[str, Tensor]" = OrderedDict()
        self._stats: "OrderedDict[str, BatchNormStats]" = OrderedDict()
        self._rng = counter_rng(self.seed, self.stream)

        self.build()

        # attach the plugins as instructed in settings.PLUGINS
        for name, func in inspect.getmembers(self, inspect.ismethod):
            current_method = getattr(self.__class__, name)
            wrapped = current_method
            for plugin in reversed(settings.PLUGINS):
                if plugin.should_run(self.name(), name):
                    wrapped = plugin.run(wrapped)
            if wrapped is not current_method:
                setattr(self, name, types.MethodType(wrapped, self))

    @classmethod
    def name(cls) -> str:
        return cls.__name__

    def build(self) -> None:
        raise NotImplementedError("This should be implemented.")

    def forward(self, *inputs: Tensor) -> Tensor:
        raise NotImplementedError("This should be implemented.")

    def __call__(self, *inputs: Tensor) -> Tensor:
        return self.forward(*inputs)

    # -- registration -----------------------------------------------------

    def _register(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"parameter {name} registered twice")
        tensor = Tensor(data.astype(self.dtype), requires_grad=True, name=name)
        self._params[name] = tensor
        return tensor

    def _uniform(self, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
        bound = np.sqrt(6.0 / fan_in)
        return self._rng.uniform(-bound, bound, size=shape)

    def add_conv(
        self,
        name: str,
        out_channels: int,
        in_channels: int,
        kh: int,
        kw: int,
        bias: bool = True,
    ) -> None:
        shape = (out_channels, in_channels, kh, kw)
        self._register(f"{name}.weight", self._uniform(shape, in_channels * kh * kw))
        if bias:
            self._register(f"{name}.bias", np.zeros(out_channels))

    def add_linear(self, name: str, out_features: int, in_features: int) -> None:
        shape = (out_features, in_features)
        self._register(f"{name}.weight", self._uniform(shape, in_features))
        self._register(f"{name}.bias", np.zeros(out_features))

    def add_batch_norm(self, name: str, channels: int) -> None:
        self._register(f"{name}.gamma", np.ones(channels))
        self._register(f"{name}.beta", np.zeros(channels))
        self._stats[name] = BatchNormStats(name)

    # -- layer application ------------------------------------------------

    def param(self, name: str) -> Tensor:
        return self._params[name]

    def conv(self, x: Tensor, name: str, stride: int = 1) -> Tensor:
        return conv2d(
            x,
            self._params[f"{name}.weight"],
            self._params.get(f"{name}.bias"),
            stride=stride,
        )

    def fc(self, x: Tensor, name: str) -> Tensor:
        return linear(x, self._params[f"{name}.weight"], self._params[f"{name}.bias"])

    def bn(self, x: Tensor, name: str) -> Tensor:
        return batch_norm(
            x,
            self._params[f"{name}.gamma"],
            self._params[f"{name}.beta"],
            self._stats[name],
            training=self.training,
        )

    # -- bookkeeping ------------------------------------------------------

    def train(self, mode: bool = True) -> "AbstractNetwork":
        self.training = mode
        return self

    def eval(self) -> "AbstractNetwork":
        return self.train(False)

    def named_parameters(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self._params.items())

    def parameters(self) -> List[Tensor]:
        return list(self._params.values())

    def zero_grad(self) -> None:
        for tensor in self._params.values():
            tensor.zero_grad()

    def count_parameters(self) -> int:
        return sum(tensor.size for tensor in self._params.values())

    def to(self, dtype) -> "AbstractNetwork":
        """Cast every parameter and running statistic, e.g. to float64."""
        self.dtype = np.dtype(dtype)
        for tensor in self._params.values():
            tensor.data = tensor.data.astype(self.dtype)
            tensor.grad = None
        for stats in self._stats.values():
            if stats.populated:
                stats.mean = stats.mean.astype(self.dtype)
                stats.var = stats.var.astype(self.dtype)
        return self

    def state_dict(self, copy: bool = True) -> "OrderedDict[str, np.ndarray]":
        """
        Parameters in registration order, then populated batch-norm statistics.
        With ``copy=False`` the arrays are shared; updates rebind rather than
        mutate them, so the result still works as a snapshot.
        """
        take = np.copy if copy else np.asarray
        state = OrderedDict((name, take(t.data)) for name, t in self._params.items())
        for name, stats in self._stats.items():
            if stats.populated:
                state[f"{name}.{RUNNING_MEAN}"] = take(stats.mean)
                state[f"{name}.{RUNNING_VAR}"] = take(stats.var)
        return state

    def load_state_dict(
        self, state: Dict[str, np.ndarray], strict: bool = True
    ) -> None:
        missing = [name for name in self._params if name not in state]
        if strict and missing:
            raise DataError(f"{self.name()} state is missing {', '.join(missing[:5])}")
        known = set(self._params)
        for stats_name in self._stats:
            known.update(
                (f"{stats_name}.{RUNNING_MEAN}", f"{stats_name}.{RUNNING_VAR}")
            )
        unexpected = [name for name in state if name not in known]
        if strict and unexpected:
            raise DataError(
                f"{self.name()} state has unknown {', '.join(unexpected[:5])}"
            )

        for name, tensor in self._params.items():
            if name not in state:
                continue
            value = np.asarray(state[name])
            if value.shape != tensor.shape:
                raise ShapeMismatchError(
                    "load_state_dict",
                    f"{name}: expected {tensor.shape}, got {value.shape}",
                )
            tensor.data = value.astype(self.dtype)
            tensor.grad = None
        for name, stats in self._stats.items():
            mean = state.get(f"{name}.{RUNNING_MEAN}")
            var = state.get(f"{name}.{RUNNING_VAR}")
            if mean is not None and var is not None:
                stats.mean = np.asarray(mean, dtype=self.dtype).copy()
                stats.var = np.asarray(var, dtype=self.dtype).copy()
