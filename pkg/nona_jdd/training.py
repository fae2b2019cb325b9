import csv
import logging
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from ._exceptions import ConfigError, EmptyDatasetError, NonFiniteError
from ._tensor import Tensor, backward
from ._utils import PathLike, counter_rng
from .cfa import add_noise, make_pattern, mosaic
from .checkpoint import save_checkpoint
from .config import ModelConfig, TrainConfig
from .discriminator import Discriminator
from .generator import Generator
from .losses import (
    LossBreakdown,
    discriminator_loss,
    loss_adversarial,
    loss_pcl,
    loss_reconstruction,
    loss_total,
)
from .optim import AdamState, adam_step
from .patches import PatchSet
from .settings import settings
from .variants import get_variant

logging.basicConfig()
logger = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "l_r", "l_c", "l_g", "l_total")


@dataclass
class Batch:
    step: int
    sigma: float
    mosaics: np.ndarray
    targets: np.ndarray


@dataclass
class TrainResult:
    generator: Generator
    discriminator: Optional[Discriminator]
    history: List[LossBreakdown] = field(default_factory=list)
    checkpoints: List[Path] = field(default_factory=list)


def prepare_batch(patches: PatchSet, config: TrainConfig, step: int) -> Batch:
    """
    Draw the patches and sigma of one step, then mosaic and add noise.
    Every draw is keyed by (seed, step), so batches are identical whichever
    thread builds them.
    """
    rng = counter_rng(config.seed, step)
    indices = rng.integers(0, len(patches), size=config.batch)
    sigma = config.sigmas[int(rng.integers(0, len(config.sigmas)))]
    pattern = make_pattern(config.pattern, config.base)

    mosaics, targets = [], []
    for i, index in enumerate(indices):
        rgb = patches[int(index)].rgb
        noisy = add_noise(mosaic(rgb, pattern), sigma, config.seed, stream=(step, i))
        mosaics.append(noisy.plane[None])
        targets.append(np.transpose(rgb, (2, 0, 1)))
    dtype = settings.DEFAULT_DTYPE
    return Batch(
        step, sigma, np.stack(mosaics).astype(dtype), np.stack(targets).astype(dtype)
    )


class Trainer:
    """
    Alternating adversarial training: each step updates the discriminator
    once on (target, target) real pairs and (reconstruction, target) fake
    pairs, then the generator once on the combined objective.
    """

    def __init__(
        self,
        patches: PatchSet,
        model_config: ModelConfig,
        config: TrainConfig,
        out_dir: Optional[PathLike] = None,
    ):
        logger.setLevel(settings.LOG_LEVEL)
        if len(patches) == 0:
            raise EmptyDatasetError("patch set")
        self.patches = patches
        self.config = config
        self.variant = get_variant(config.variant)
        self.out_dir = Path(out_dir) if out_dir is not None else None

        generator_config = self.variant.model_config(model_config)
        pattern = make_pattern(config.pattern, config.base)
        factors = [generator_config.size_multiple, pattern.period]
        if self.variant.gan:
            factors.append(Discriminator.downsampling)
        multiple = 1
        for factor in factors:
            multiple = multiple * factor // math.gcd(multiple, factor)
        if patches.size % multiple:
            raise ConfigError(
                f"patch size {patches.size} must be a multiple of {multiple} for the "
                f"{pattern.kind} pattern and the {self.variant.name} networks"
            )

        self.generator = Generator(generator_config, seed=config.seed)
        self.discriminator = (
            Discriminator(model_config, seed=config.seed) if self.variant.gan else None
        )
        self.g_state = AdamState(lr=config.lr, betas=config.betas, eps=config.eps)
        self.d_state = AdamState(lr=config.lr, betas=config.betas, eps=config.eps)
        self.history: List[LossBreakdown] = []
        self.checkpoints: List[Path] = []
        self._last_good: Optional[Dict[str, object]] = None

    def step(self, batch: Batch) -> LossBreakdown:
        mosaics = Tensor(batch.mosaics)
        targets = Tensor(batch.targets)

        reconstruction = self.generator(mosaics)

        if self.discriminator is not None:
            fake = reconstruction.detach()
            self.discriminator.zero_grad()
            l_d = discriminator_loss(
                self.discriminator(targets, targets), self.discriminator(fake, targets)
            )
            backward(l_d)
            adam_step(dict(self.discriminator.named_parameters()), self.d_state)

        l_r = loss_reconstruction(reconstruction, targets)
        l_c = loss_pcl(reconstruction, targets) if self.variant.pcl else None
        l_g = None
        if self.discriminator is not None:
            l_g = loss_adversarial(self.discriminator(reconstruction, targets))
        breakdown = loss_total(
            l_r, l_c, l_g, lambda_g=self.config.lambda_g, step=batch.step
        )

        self.generator.zero_grad()
        backward(breakdown.total)
        adam_step(dict(self.generator.named_parameters()), self.g_state)
        if self.discriminator is not None:
            # gradients that reached D through the generator objective are not used
            self.discriminator.zero_grad()
        return breakdown

    def _snapshot(self) -> Dict[str, object]:
        snapshot = {
            "generator": self.generator.state_dict(copy=False),
            "g_state": replace(
                self.g_state, m=dict(self.g_state.m), v=dict(self.g_state.v)
            ),
        }
        if self.discriminator is not None:
            snapshot["discriminator"] = self.discriminator.state_dict(copy=False)
            snapshot["d_state"] = replace(
                self.d_state, m=dict(self.d_state.m), v=dict(self.d_state.v)
            )
        return snapshot

    def _save(self, tag: str, snapshot: Dict[str, object]) -> None:
        if self.out_dir is None:
            return
        self.checkpoints.append(
            save_checkpoint(
                self.out_dir / f"generator-{tag}.ckpt",
                snapshot["generator"],
                snapshot["g_state"],
            )
        )
        if "discriminator" in snapshot:
            self.checkpoints.append(
                save_checkpoint(
                    self.out_dir / f"discriminator-{tag}.ckpt",
                    snapshot["discriminator"],
                    snapshot["d_state"],
                )
            )

    def batches(self):
        """Batches in step order, prepared ahead on worker threads."""
        ahead = max(int(settings.PREFETCH_BATCHES), 1)
        with ThreadPoolExecutor(max_workers=ahead) as pool:
            pending = deque()
            next_step = 1
            while next_step <= self.config.steps or pending:
                while next_step <= self.config.steps and len(pending) < ahead:
                    pending.append(
                        pool.submit(prepare_batch, self.patches, self.config, next_step)
                    )
                    next_step += 1
                yield pending.popleft().result()

    def run(self) -> TrainResult:
        log_file = None
        writer = None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            log_file = open(
                self.out_dir / "loss_log.csv", "w", newline="", encoding="utf-8"
            )
            writer = csv.writer(log_file)
            writer.writerow(LOG_COLUMNS)

        try:
            self._last_good = self._snapshot()
            for batch in self.batches():
                try:
                    breakdown = self.step(batch)
                except NonFiniteError as e:
                    logger.error(
                        f"step {batch.step}: {e.message}; saving last good state"
                    )
                    self._save("last-good", self._last_good)
                    raise

                self.history.append(breakdown)
                if writer is not None:
                    writer.writerow(
                        [
                            batch.step,
                            repr(breakdown.l_r),
                            repr(breakdown.l_c),
                            repr(breakdown.l_g),
                            repr(breakdown.l_total),
                        ]
                    )
                if batch.step % self.config.log_every == 0:
                    logger.info(
                        f"step {batch.step} sigma {batch.sigma:g}: l_r={breakdown.l_r:.5f} "
                        f"l_c={breakdown.l_c:.5f} l_g={breakdown.l_g:.5f} "
                        f"l_total={breakdown.l_total:.5f}"
                    )
                self._last_good = self._snapshot()
                last_step = batch.step == self.config.steps
                if batch.step % self.config.interval == 0 or last_step:
                    self._save(f"{batch.step:06d}", self._last_good)
        finally:
            if log_file is not None:
                log_file.close()

        return TrainResult(
            generator=self.generator,
            discriminator=self.discriminator,
            history=self.history,
            checkpoints=self.checkpoints,
        )


def train(
    patches: PatchSet,
    model_config: ModelConfig,
    config: TrainConfig,
    out_dir: Optional[PathLike] = None,
) -> TrainResult:
    return Trainer(patches, model_config, config, out_dir).run()


def read_loss_log(path: PathLike) -> List[Dict[str, float]]:
    with open(path, "r", newline="", encoding="utf-8") as f:
        return [
            {
                key: (int(value) if key == "step" else float(value))
                for key, value in row.items()
            }
            for row in csv.DictReader(f)
        ]
