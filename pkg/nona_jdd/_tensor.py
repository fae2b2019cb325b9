import contextlib
import logging
import threading
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np

from ._exceptions import GradientError, NonFiniteError, ShapeMismatchError
from .settings import settings

logger = logging.getLogger(__name__)

_local = threading.local()

Operand = Union["Tensor", float, int, np.ndarray]


def is_grad_enabled() -> bool:
    return getattr(_local, "grad_enabled", True)


@contextlib.contextmanager
def no_grad():
    """Run forward passes without recording a graph (evaluation, benchmarks)."""
    previous = is_grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = previous


@contextlib.contextmanager
def record_branches():
    """
    Collect the branch keys of every piecewise op run inside the block.
    Two runs took the same branches iff their logs compare equal.
    """
    log: List[np.ndarray] = []
    previous = getattr(_local, "branches", None)
    _local.branches = log
    try:
        yield log
    finally:
        _local.branches = previous


def same_branches(first: List[np.ndarray], second: List[np.ndarray]) -> bool:
    return len(first) == len(second) and all(
        np.array_equal(a, b) for a, b in zip(first, second)
    )


class Function:
    """
    Base class for differentiable operations.

    Subclasses implement ``forward`` on raw arrays and ``backward`` returning
    one gradient array (or None) per input tensor, in input order.
    """

    def __init__(self, *tensors: "Tensor"):
        self.tensors = tensors

    def forward(self, *args: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError("Forward pass not implemented for this function")

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError("Backward pass not implemented for this function")

    def branch_key(self) -> Optional[np.ndarray]:
        """Which piece of a piecewise op was taken; None for smooth ops."""
        return None

    @classmethod
    def apply(cls, *tensors: "Tensor", **kwargs: Any) -> "Tensor":
        func = cls(*tensors)
        out_data = func.forward(*(tensor.data for tensor in tensors), **kwargs)

        if settings.CHECK_FINITE and not np.all(np.isfinite(out_data)):
            raise NonFiniteError(f"{cls.__name__} forward")

        branches = getattr(_local, "branches", None)
        if branches is not None:
            key = func.branch_key()
            if key is not None:
                branches.append(key)

        requires_grad = is_grad_enabled() and any(t.requires_grad for t in tensors)
        return Tensor(
            out_data,
            requires_grad=requires_grad,
            creator=func if requires_grad else None,
        )

    @staticmethod
    def unbroadcast(grad: np.ndarray, to_shape: Tuple[int, ...]) -> np.ndarray:
        """Sum out broadcast dimensions so that ``grad`` matches ``to_shape``."""
        if grad.shape == to_shape:
            return grad
        while grad.ndim > len(to_shape):
            grad = grad.sum(axis=0)
        for dim, size in enumerate(to_shape):
            if size == 1 and grad.shape[dim] != 1:
                grad = grad.sum(axis=dim, keepdims=True)
        return grad


class Tensor:
    """
    Dense float array participating in a reverse-mode autodiff graph.

    Python scalars and lists become ``settings.DEFAULT_DTYPE`` arrays;
    floating numpy arrays keep their dtype so float64 gradient checks stay
    in double precision end to end.
    """

    __array_priority__ = 1000

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        creator: Optional[Function] = None,
        dtype: Any = None,
        name: Optional[str] = None,
    ):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None and not isinstance(data, (np.ndarray, np.generic)):
            dtype = settings.DEFAULT_DTYPE
        array = np.asarray(data, dtype=dtype)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(settings.DEFAULT_DTYPE)

        self.data = array
        self.requires_grad = bool(requires_grad)
        self.creator = creator
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        return self.data.item()

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return (
            f"Tensor(shape={self.shape}, dtype={self.dtype}, "
            f"requires_grad={self.requires_grad})"
        )

    def _lift(self, other: Operand) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def __add__(self, other: Operand) -> "Tensor":
        return Add.apply(self, self._lift(other))

    def __radd__(self, other: Operand) -> "Tensor":
        return Add.apply(self._lift(other), self)

    def __sub__(self, other: Operand) -> "Tensor":
        return Sub.apply(self, self._lift(other))

    def __rsub__(self, other: Operand) -> "Tensor":
        return Sub.apply(self._lift(other), self)

    def __mul__(self, other: Operand) -> "Tensor":
        return Mul.apply(self, self._lift(other))

    def __rmul__(self, other: Operand) -> "Tensor":
        return Mul.apply(self._lift(other), self)

    def __truediv__(self, other: Operand) -> "Tensor":
        return Div.apply(self, self._lift(other))

    def __rtruediv__(self, other: Operand) -> "Tensor":
        return Div.apply(self._lift(other), self)

    def __neg__(self) -> "Tensor":
        return Neg.apply(self)

    def __pow__(self, exponent: float) -> "Tensor":
        return Pow.apply(self, exponent=float(exponent))

    def __getitem__(self, index: Any) -> "Tensor":
        return GetItem.apply(self, index=index)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return Mean.apply(self, axis=axis, keepdims=keepdims)

    def max(self, axis: int, keepdims: bool = False) -> "Tensor":
        return Max.apply(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Reshape.apply(self, shape=shape)

    def exp(self) -> "Tensor":
        return Exp.apply(self)

    def log(self) -> "Tensor":
        return Log.apply(self)

    def sqrt(self) -> "Tensor":
        return Sqrt.apply(self)

    def abs(self) -> "Tensor":
        return Abs.apply(self)

    def sin(self) -> "Tensor":
        return Sin.apply(self)

    def cos(self) -> "Tensor":
        return Cos.apply(self)

    def clip(self, low: Optional[float], high: Optional[float]) -> "Tensor":
        return Clip.apply(self, low=low, high=high)

    def backward(self) -> None:
        backward(self)


class Graph:
    """Topologically ordered record of the operations leading to one output."""

    def __init__(self, nodes: List[Tensor]):
        self.nodes = nodes

    @classmethod
    def trace(cls, output: Tensor) -> "Graph":
        order: List[Tensor] = []
        visited = set()
        stack = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node.creator is not None:
                for parent in node.creator.tensors:
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return cls(order)

    def leaves(self) -> List[Tensor]:
        return [node for node in self.nodes if node.creator is None]

    def reset(self) -> None:
        for node in self.nodes:
            node.creator = None


def backward(scalar_output: Tensor, graph: Optional[Graph] = None) -> List[Tensor]:
    """
    Propagate d(scalar_output)/d(leaf) into ``.grad`` of every leaf that
    requires grad. Leaf gradients accumulate additively across calls; the
    graph is consumed. Returns the leaves that received a gradient.
    """
    if scalar_output.size != 1:
        raise GradientError(
            f"backward() needs a single-element output, got shape {scalar_output.shape}"
        )
    if not scalar_output.requires_grad:
        raise GradientError("backward() called on a tensor that does not require grad")

    graph = graph or Graph.trace(scalar_output)
    pending = {id(scalar_output): np.ones_like(scalar_output.data)}
    reached = []

    for node in reversed(graph.nodes):
        grad = pending.pop(id(node), None)
        if grad is None:
            continue
        if node.creator is None:
            node.grad = np.array(grad) if node.grad is None else node.grad + grad
            reached.append(node)
            continue

        input_grads = node.creator.backward(grad)
        if not isinstance(input_grads, tuple):
            input_grads = (input_grads,)
        for tensor, input_grad in zip(node.creator.tensors, input_grads):
            if input_grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            if key in pending:
                input_grad = pending[key] + input_grad
            pending[key] = input_grad

    graph.reset()
    return reached


def atan2(y: Tensor, x: Tensor) -> Tensor:
    return Atan2.apply(y, x)


def where(condition: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Elementwise select; ``condition`` is a constant mask."""
    return Where.apply(a, b, condition=np.asarray(condition, dtype=bool))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


class Add(Function):
    def forward(self, x, y):
        return x + y

    def backward(self, grad):
        x, y = self.tensors
        return self.unbroadcast(grad, x.shape), self.unbroadcast(grad, y.shape)


class Sub(Function):
    def forward(self, x, y):
        return x - y

    def backward(self, grad):
        x, y = self.tensors
        return self.unbroadcast(grad, x.shape), self.unbroadcast(-grad, y.shape)


class Mul(Function):
    def forward(self, x, y):
        self.x, self.y = x, y
        return x * y

    def backward(self, grad):
        return (
            self.unbroadcast(grad * self.y, self.x.shape),
            self.unbroadcast(grad * self.x, self.y.shape),
        )


class Div(Function):
    def forward(self, x, y):
        self.x, self.y = x, y
        return x / y

    def backward(self, grad):
        return (
            self.unbroadcast(grad / self.y, self.x.shape),
            self.unbroadcast(-grad * self.x / (self.y * self.y), self.y.shape),
        )


class Neg(Function):
    def forward(self, x):
        return -x

    def backward(self, grad):
        return (-grad,)


class Pow(Function):
    def forward(self, x, exponent):
        self.x, self.exponent = x, exponent
        return np.power(x, exponent).astype(x.dtype, copy=False)

    def backward(self, grad):
        return (grad * self.exponent * np.power(self.x, self.exponent - 1),)


class Exp(Function):
    def forward(self, x):
        self.out = np.exp(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Log(Function):
    def forward(self, x):
        self.x = x
        return np.log(x)

    def backward(self, grad):
        return (grad / self.x,)


class Sqrt(Function):
    """Square root whose subgradient at 0 is taken as 0."""

    def forward(self, x):
        self.out = np.sqrt(x)
        return self.out

    def backward(self, grad):
        positive = self.out > 0
        safe = np.where(positive, self.out, 1)
        return (np.where(positive, grad * 0.5 / safe, 0).astype(grad.dtype),)

    def branch_key(self):
        return self.out > 0


class Abs(Function):
    def forward(self, x):
        self.sign = np.sign(x)
        return np.abs(x)

    def backward(self, grad):
        return (grad * self.sign,)

    def branch_key(self):
        return self.sign


class Sin(Function):
    def forward(self, x):
        self.x = x
        return np.sin(x)

    def backward(self, grad):
        return (grad * np.cos(self.x),)


class Cos(Function):
    def forward(self, x):
        self.x = x
        return np.cos(x)

    def backward(self, grad):
        return (-grad * np.sin(self.x),)


class Atan2(Function):
    """Two-argument arctangent; gradient at the origin is taken as 0."""

    def forward(self, y, x):
        self.y, self.x = y, x
        return np.arctan2(y, x)

    def backward(self, grad):
        radius = self.x * self.x + self.y * self.y
        nonzero = radius > 0
        safe = np.where(nonzero, radius, 1)
        dy = np.where(nonzero, grad * self.x / safe, 0).astype(grad.dtype)
        dx = np.where(nonzero, -grad * self.y / safe, 0).astype(grad.dtype)
        return self.unbroadcast(dy, self.y.shape), self.unbroadcast(dx, self.x.shape)

    def branch_key(self):
        # the angle jumps by 2π across the negative x axis
        return np.where(self.x < 0, np.signbit(self.y), False)


class Clip(Function):
    def forward(self, x, low, high):
        inside = np.ones(x.shape, dtype=bool)
        if low is not None:
            inside &= x >= low
        if high is not None:
            inside &= x <= high
        self.inside = inside
        self.region = np.zeros(x.shape, dtype=np.int8)
        if low is not None:
            self.region[x < low] = -1
        if high is not None:
            self.region[x > high] = 1
        return np.clip(x, low, high)

    def backward(self, grad):
        return (np.where(self.inside, grad, 0).astype(grad.dtype),)

    def branch_key(self):
        return self.region


class Where(Function):
    def forward(self, a, b, condition):
        self.condition = condition
        return np.where(condition, a, b)

    def backward(self, grad):
        a, b = self.tensors
        zero = np.zeros((), dtype=grad.dtype)
        return (
            self.unbroadcast(np.where(self.condition, grad, zero), a.shape),
            self.unbroadcast(np.where(self.condition, zero, grad), b.shape),
        )

    def branch_key(self):
        return self.condition


class Sum(Function):
    def forward(self, x, axis, keepdims):
        self.shape, self.axis, self.keepdims = x.shape, axis, keepdims
        return np.sum(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, self.shape).copy(),)


class Mean(Function):
    def forward(self, x, axis, keepdims):
        self.shape, self.axis, self.keepdims = x.shape, axis, keepdims
        out = np.mean(x, axis=axis, keepdims=keepdims)
        self.count = x.size // max(np.size(out), 1)
        return out

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return ((np.broadcast_to(grad, self.shape) / self.count).astype(grad.dtype),)


class Max(Function):
    """Max along one axis; ties send the gradient to the first maximum."""

    def forward(self, x, axis, keepdims):
        self.shape, self.axis, self.keepdims = x.shape, axis, keepdims
        self.argmax = np.expand_dims(np.argmax(x, axis=axis), axis)
        return np.max(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        if not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        out = np.zeros(self.shape, dtype=grad.dtype)
        np.put_along_axis(out, self.argmax, grad, axis=self.axis)
        return (out,)

    def branch_key(self):
        return self.argmax


class Reshape(Function):
    def forward(self, x, shape):
        self.original = x.shape
        try:
            return x.reshape(shape)
        except ValueError as e:
            raise ShapeMismatchError("reshape", str(e))

    def backward(self, grad):
        return (grad.reshape(self.original),)


class GetItem(Function):
    def forward(self, x, index):
        self.shape, self.index = x.shape, index
        return x[index]

    def backward(self, grad):
        out = np.zeros(self.shape, dtype=grad.dtype)
        np.add.at(out, self.index, grad)
        return (out,)


class Concat(Function):
    def forward(self, *arrays, axis):
        self.axis = axis
        self.sizes = [array.shape[axis] for array in arrays]
        try:
            return np.concatenate(arrays, axis=axis)
        except ValueError as e:
            raise ShapeMismatchError("concat", str(e))

    def backward(self, grad):
        bounds = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, bounds, axis=self.axis))
