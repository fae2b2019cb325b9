import functools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._exceptions import NonFiniteError, NonFiniteLossError, ShapeMismatchError
from ._tensor import Tensor
from .colour import delta_e_map
from .settings import settings


def _loss_term(term: str):
    """Report an op-level NaN or Inf under the loss term it happened in."""

    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except NonFiniteLossError:
                raise
            except NonFiniteError as e:
                raise NonFiniteLossError(term, op=e.where) from e

        return wrapper

    return decorator


def _check_pair(operation: str, reconstruction: Tensor, target: Tensor) -> None:
    if reconstruction.shape != target.shape:
        raise ShapeMismatchError(
            operation, f"shapes differ: {reconstruction.shape} vs {target.shape}"
        )


@_loss_term("l_r")
def loss_reconstruction(reconstruction: Tensor, target: Tensor) -> Tensor:
    """Mean absolute difference over every element."""
    _check_pair("loss_reconstruction", reconstruction, target)
    return (reconstruction - target).abs().mean()


@_loss_term("l_c")
def loss_pcl(
    reconstruction: Tensor, target: Tensor, colour_space: str = "srgb"
) -> Tensor:
    """Perceptual colour loss: mean per-pixel CIEDE2000."""
    _check_pair("loss_pcl", reconstruction, target)
    return delta_e_map(reconstruction, target, colour_space).mean()


def _log(probability: Tensor, eps: Optional[float]) -> Tensor:
    eps = settings.LOG_CLAMP_EPS if eps is None else eps
    return probability.clip(eps, 1.0).log()


@_loss_term("l_g")
def loss_adversarial(d_fake: Tensor, eps: Optional[float] = None) -> Tensor:
    """Generator term: -mean(log D(reconstruction, target))."""
    return -_log(d_fake, eps).mean()


@_loss_term("l_d")
def discriminator_loss(
    d_real: Tensor, d_fake: Tensor, eps: Optional[float] = None
) -> Tensor:
    """-[mean(log D(real pair)) + mean(log(1 - D(fake pair)))]."""
    return -(_log(d_real, eps).mean() + _log(1 - d_fake, eps).mean())


@dataclass
class LossBreakdown:
    """
    One step's generator objective. ``l_total`` is computed as
    ``(l_r + l_c) + lambda_g * l_g`` in the loss dtype; the floats here are
    exact copies of those values.
    """

    l_r: float
    l_c: float
    l_g: float
    l_total: float
    lambda_g: float
    total: Optional[Tensor] = field(default=None, repr=False, compare=False)

    def recompute(self, dtype=np.float32) -> float:
        cast = np.dtype(dtype).type
        return float(
            (cast(self.l_r) + cast(self.l_c)) + cast(self.lambda_g) * cast(self.l_g)
        )


def _scalar(value: Optional[Tensor], like: Tensor) -> Tensor:
    if value is None:
        return Tensor(np.zeros((), dtype=like.dtype))
    return value


def loss_total(
    l_r: Tensor,
    l_c: Optional[Tensor] = None,
    l_g: Optional[Tensor] = None,
    lambda_g: Optional[float] = None,
    step: Optional[int] = None,
) -> LossBreakdown:
    """
    Combine the reconstruction, colour and adversarial terms. A term left
    out (an ablation without it) counts as zero. Raises NonFiniteLossError
    naming the first non-finite term.
    """
    lambda_g = settings.LAMBDA_G if lambda_g is None else lambda_g
    l_c = _scalar(l_c, l_r)
    l_g = _scalar(l_g, l_r)
    for name, term in (("l_r", l_r), ("l_c", l_c), ("l_g", l_g)):
        if not np.all(np.isfinite(term.data)):
            raise NonFiniteLossError(name, step)

    weight = Tensor(np.asarray(lambda_g, dtype=l_r.dtype))
    total = (l_r + l_c) + weight * l_g
    if not np.all(np.isfinite(total.data)):
        raise NonFiniteLossError("l_total", step)
    return LossBreakdown(
        l_r=float(l_r.item()),
        l_c=float(l_c.item()),
        l_g=float(l_g.item()),
        l_total=float(total.item()),
        lambda_g=float(lambda_g),
        total=total,
    )
