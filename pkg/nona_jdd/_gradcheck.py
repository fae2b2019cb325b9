"""
Central finite-difference checks of the analytic gradients.

The network output is projected onto fixed random weights so every output
element contributes. Coordinates whose ±h perturbation flips a piecewise op
onto another branch (a ReLU kink, a clip bound, a max argument) are
skipped and counted; the difference quotient is meaningless there.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from ._functional import (
    BatchNormStats,
    batch_norm,
    channel_avg,
    channel_max,
    conv2d,
    global_avg,
    leaky_relu,
    linear,
    pixel_shuffle,
    sigmoid,
    swish,
)
from ._tensor import Tensor, backward, no_grad, record_branches, same_branches
from ._utils import counter_rng
from .attention import AttentionNetwork
from .config import ModelConfig
from .discriminator import Discriminator
from .generator import Generator, ResidualParams, residual_block
from .losses import loss_pcl, loss_reconstruction
from .settings import settings

logging.basicConfig()
logger = logging.getLogger(__name__)

RELATIVE_FLOOR = 1e-2
TOLERANCE = 1e-4
PCL_TOLERANCE = 1e-3


@dataclass
class GradcheckResult:
    layer: str
    max_rel_error: float
    tolerance: float
    checked: int
    skipped: int

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.max_rel_error < self.tolerance

    def __str__(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{verdict} {self.layer:<22} max rel error {self.max_rel_error:.3e} "
            f"(tol {self.tolerance:g}, {self.checked} checked, {self.skipped} skipped)"
        )


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), RELATIVE_FLOOR)


def gradcheck(
    fn: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    layer: str = "fn",
    h: float = 1e-4,
    samples: Optional[int] = 8,
    seed: int = 0,
    tolerance: float = TOLERANCE,
) -> GradcheckResult:
    """
    Compare the backward pass of ``fn(*inputs)`` against central differences
    for every input that requires a gradient, ``samples`` coordinates per
    input (all of them when None).
    """
    rng = counter_rng(seed, 0)
    with no_grad():
        reference = fn(*inputs)
    projection = Tensor(rng.standard_normal(reference.shape).astype(reference.dtype))

    def objective() -> float:
        return float((fn(*inputs) * projection).sum().data)

    for tensor in inputs:
        tensor.zero_grad()
    with record_branches() as reference:
        out = (fn(*inputs) * projection).sum()
    backward(out)

    worst, checked, skipped = 0.0, 0, 0
    for position, tensor in enumerate(inputs):
        if not tensor.requires_grad:
            continue
        analytic_grad = tensor.grad
        if analytic_grad is None:
            analytic_grad = np.zeros_like(tensor.data)
        if samples is None or samples >= tensor.size:
            coordinates = np.arange(tensor.size)
        else:
            coordinates = counter_rng(seed, 1, position).choice(
                tensor.size, size=samples, replace=False
            )

        for flat in coordinates:
            index = np.unravel_index(int(flat), tensor.shape)
            original = tensor.data[index]
            values = []
            branch_logs = []
            for delta in (h, -h):
                tensor.data[index] = original + delta
                with no_grad(), record_branches() as log:
                    values.append(objective())
                branch_logs.append(log)
            tensor.data[index] = original

            if not all(same_branches(reference, log) for log in branch_logs):
                skipped += 1
                continue
            numeric = (values[0] - values[1]) / (2 * h)
            error = relative_error(float(analytic_grad[index]), numeric)
            if error > worst:
                worst = error
            checked += 1

    result = GradcheckResult(layer, worst, tolerance, checked, skipped)
    logger.debug(str(result))
    return result


def _network_check(name, network, inputs, samples, seed, tolerance=TOLERANCE):
    return gradcheck(
        lambda *args: network(*args[: len(inputs)]),
        list(inputs) + network.parameters(),
        layer=name,
        samples=samples,
        seed=seed,
        tolerance=tolerance,
    )


def run_layer_suite(
    toy: bool = True, seed: int = 0, samples: int = 6, networks: bool = True
) -> List[GradcheckResult]:
    """
    Check every layer class the model is built from, then the toy (or
    full) generator and discriminator and the two image losses, in double
    precision. ``networks=False`` leaves out the two whole networks.
    """
    logger.setLevel(settings.LOG_LEVEL)
    dtype = np.dtype(settings.GRADCHECK_DTYPE)
    rng = counter_rng(seed, 2)

    def tensor(*shape, low=-1.0, high=1.0, grad=True):
        return Tensor(
            rng.uniform(low, high, size=shape).astype(dtype), requires_grad=grad
        )

    config = ModelConfig.toy_config() if toy else ModelConfig()
    network_samples = max(1, samples // 3)
    results = []

    def check(name, fn, inputs, tolerance=TOLERANCE, count=samples):
        results.append(
            gradcheck(
                fn, inputs, layer=name, samples=count, seed=seed, tolerance=tolerance
            )
        )

    check("conv2d square", conv2d, [tensor(2, 3, 6, 6), tensor(4, 3, 3, 3), tensor(4)])
    check(
        "conv2d asymmetric", conv2d, [tensor(2, 3, 6, 6), tensor(4, 3, 5, 1), tensor(4)]
    )
    check(
        "conv2d strided",
        lambda x, w, b: conv2d(x, w, b, stride=2),
        [tensor(2, 3, 6, 6), tensor(4, 3, 3, 3), tensor(4)],
    )
    check("pixel_shuffle", lambda x: pixel_shuffle(x, 2), [tensor(1, 8, 3, 3)])
    check(
        "channel pooling", lambda x: channel_avg(x) + channel_max(x), [tensor(4, 5, 5)]
    )
    check("global_avg", global_avg, [tensor(2, 4, 3, 3)])

    stats = BatchNormStats("gradcheck")
    check(
        "batch_norm",
        lambda x, g, b: batch_norm(x, g, b, stats, training=True),
        [tensor(4, 3, 4, 4), tensor(3, low=0.5, high=1.5), tensor(3)],
    )
    check(
        "batch_norm eval",
        lambda x, g, b: batch_norm(x, g, b, stats, training=False),
        [tensor(2, 3, 4, 4), tensor(3, low=0.5, high=1.5), tensor(3)],
    )
    check("linear", linear, [tensor(2, 5), tensor(3, 5), tensor(3)])
    check("sigmoid", sigmoid, [tensor(3, 4, 4, low=-4, high=4)])
    check("leaky_relu", leaky_relu, [tensor(3, 4, 4)])
    check("swish", swish, [tensor(3, 4, 4, low=-4, high=4)])

    attention = AttentionNetwork(8, config, seed=seed).to(dtype)
    results.append(
        _network_check("sa_attention", attention, [tensor(8, 6, 6)], samples, seed)
    )

    width = config.widths[0]
    residual_inputs = [
        tensor(width, 6, 6), tensor(width, width, 3, 3, low=-0.3, high=0.3)
    ]
    residual_inputs += [
        tensor(width), tensor(width, width, 3, 3, low=-0.3, high=0.3), tensor(width)
    ]
    check(
        "residual_block",
        lambda x, w1, b1, w2, b2: residual_block(x, ResidualParams(w1, b1, w2, b2)),
        residual_inputs,
    )

    if networks:
        size = 2 * config.size_multiple
        generator = Generator(config, seed=seed).to(dtype)
        results.append(
            _network_check(
                "generator",
                generator,
                [tensor(1, 1, size, size, low=0.0, high=1.0)],
                network_samples,
                seed,
            )
        )

        discriminator = Discriminator(config, seed=seed).to(dtype)
        side = Discriminator.downsampling
        pair = [
            tensor(2, 3, side, side, low=0, high=1),
            tensor(2, 3, side, side, low=0, high=1),
        ]
        results.append(
            _network_check("discriminator", discriminator, pair, network_samples, seed)
        )

    check(
        "loss_reconstruction",
        loss_reconstruction,
        [
            tensor(1, 3, 4, 4, low=0.05, high=0.95),
            tensor(1, 3, 4, 4, low=0.05, high=0.95, grad=False),
        ],
    )
    check(
        "loss_pcl",
        loss_pcl,
        [
            tensor(1, 3, 4, 4, low=0.05, high=0.95),
            tensor(1, 3, 4, 4, low=0.05, high=0.95, grad=False),
        ],
        tolerance=PCL_TOLERANCE,
    )

    for result in results:
        log = logger.info if result.passed else logger.warning
        log(str(result))
    return results
