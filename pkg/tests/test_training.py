from pathlib import Path

import numpy as np

from nona_jdd._exceptions import ConfigError, EmptyDatasetError, NonFiniteError
from nona_jdd._tensor import Tensor, no_grad
from nona_jdd.cfa import add_noise, make_pattern, mosaic
from nona_jdd.checkpoint import load_checkpoint
from nona_jdd.config import ModelConfig, TrainConfig
from nona_jdd.generator import Generator
from nona_jdd.metrics import psnr
from nona_jdd.patches import Patch, PatchSet
from nona_jdd.training import Trainer, prepare_batch, read_loss_log, train
from nona_jdd.variants import get_variant
from tests import NonaJddTest


def smooth_patches(count, size, seed=0):
    """Low-frequency colour ramps, easy enough to memorise."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:size, 0:size] / size
    patches = []
    for index in range(count):
        a, b, c = rng.uniform(0.2, 0.8, size=(3, 3))
        rgb = np.stack(
            [
                a[i] + 0.15 * np.sin(3 * x + b[i]) * np.cos(2 * y + c[i])
                for i in range(3)
            ],
            -1,
        )
        patches.append(Patch(np.clip(rgb, 0, 1), Path(f"ramp{index}.png"), (0, 0)))
    return PatchSet(size=size, stride=size, patches=patches)


class FailingTrainer(Trainer):
    def step(self, batch):
        if batch.step == 2:
            raise NonFiniteError("Conv2d forward")
        return super().step(batch)


class TestTraining(NonaJddTest):
    def setUp(self):
        super().setUp()
        self.model = ModelConfig.toy_config()
        self.patches = smooth_patches(3, 48)

    def config(self, **overrides):
        options = dict(
            steps=3,
            batch=1,
            patch_size=48,
            sigmas=(10.0,),
            seed=4,
            interval=2,
            log_every=1,
        )
        options.update(overrides)
        return TrainConfig(**options)

    def test_prepare_batch_is_keyed_by_step(self):
        config = self.config(batch=2, sigmas=(10.0, 20.0, 30.0))
        first = prepare_batch(self.patches, config, 5)
        again = prepare_batch(self.patches, config, 5)
        other = prepare_batch(self.patches, config, 6)
        self.assertEqual(first.mosaics.tobytes(), again.mosaics.tobytes())
        self.assertEqual(first.sigma, again.sigma)
        self.assertFalse(np.array_equal(first.mosaics, other.mosaics))
        self.assertEqual(first.mosaics.shape, (2, 1, 48, 48))
        self.assertEqual(first.targets.shape, (2, 3, 48, 48))
        self.assertEqual(first.mosaics.dtype, np.float32)

    def test_two_runs_give_identical_loss_logs(self):
        first_dir, second_dir = self.tmp_dir(), self.tmp_dir()
        train(self.patches, self.model, self.config(), first_dir)
        train(self.patches, self.model, self.config(), second_dir)
        first = (first_dir / "loss_log.csv").read_bytes()
        self.assertEqual(first, (second_dir / "loss_log.csv").read_bytes())
        self.assertEqual(len(first.splitlines()), 4)

    def test_logged_total_satisfies_the_loss_identity(self):
        out = self.tmp_dir()
        result = train(self.patches, self.model, self.config(lambda_g=0.5), out)
        rows = read_loss_log(out / "loss_log.csv")
        self.assertEqual([row["step"] for row in rows], [1, 2, 3])
        for row, breakdown in zip(rows, result.history):
            self.assertEqual(row["l_total"], breakdown.l_total)
            self.assertEqual(breakdown.l_total, breakdown.recompute(np.float32))
            self.assertGreater(row["l_c"], 0.0)
            self.assertGreater(row["l_g"], 0.0)

    def test_checkpoints_per_interval(self):
        out = self.tmp_dir()
        result = train(self.patches, self.model, self.config(steps=4), out)
        names = sorted(path.name for path in result.checkpoints)
        self.assertEqual(
            names,
            [
                "discriminator-000002.ckpt",
                "discriminator-000004.ckpt",
                "generator-000002.ckpt",
                "generator-000004.ckpt",
            ],
        )
        params, state = load_checkpoint(out / "generator-000004.ckpt")
        self.assertEqual(state.step, 4)
        for name, tensor in result.generator.named_parameters():
            self.assertEqual(
                params[name].tobytes(), tensor.data.astype(np.float32).tobytes()
            )

    def test_final_step_is_saved_off_interval(self):
        out = self.tmp_dir()
        train(self.patches, self.model, self.config(steps=3, variant="basenet"), out)
        self.assertTrue((out / "generator-000003.ckpt").exists())
        self.assertFalse((out / "discriminator-000002.ckpt").exists())

    def test_non_finite_step_saves_last_good_state(self):
        out = self.tmp_dir()
        trainer = FailingTrainer(
            self.patches, self.model, self.config(steps=3, interval=10), out
        )
        with self.assertRaises(NonFiniteError):
            trainer.run()
        params, state = load_checkpoint(out / "generator-last-good.ckpt")
        self.assertEqual(state.step, 1)
        for name, tensor in trainer.generator.named_parameters():
            self.assertEqual(
                params[name].tobytes(), tensor.data.astype(np.float32).tobytes()
            )
        self.assertTrue((out / "discriminator-last-good.ckpt").exists())
        self.assertEqual(len(read_loss_log(out / "loss_log.csv")), 1)

    def test_patch_size_must_tile_every_network(self):
        with self.assertRaises(ConfigError):
            Trainer(smooth_patches(1, 24), self.model, self.config(patch_size=24))
        # without a discriminator 24 = lcm(8, 6) is enough
        Trainer(
            smooth_patches(1, 24),
            self.model,
            self.config(patch_size=24, variant="basenet"),
        )

    def test_empty_patch_set(self):
        with self.assertRaises(EmptyDatasetError):
            Trainer(PatchSet(size=48, stride=48), self.model, self.config())

    def test_ablation_without_gan_has_no_discriminator(self):
        result = train(self.patches, self.model, self.config(steps=1, variant="san"))
        self.assertIsNone(result.discriminator)
        self.assertEqual(result.history[0].l_g, 0.0)
        self.assertGreater(result.history[0].l_c, 0.0)


class TestOverfit(NonaJddTest):
    needs_slow = True

    def score(self, generator, patches):
        pattern = make_pattern("nona")
        scores = []
        for index, patch in enumerate(patches):
            noisy = add_noise(
                mosaic(patch.rgb, pattern), 10.0, seed=99, stream=(index,)
            )
            with no_grad():
                out = generator(Tensor(noisy.plane[None].astype(np.float32))).data
            scores.append(psnr(np.transpose(out, (1, 2, 0)), patch.rgb))
        return float(np.mean(scores))

    def test_toy_generator_memorises_four_patches(self):
        patches = smooth_patches(4, 48, seed=1)
        config = TrainConfig(
            steps=500,
            batch=4,
            patch_size=48,
            sigmas=(10.0,),
            seed=0,
            lambda_g=0.0,
            variant="sanwp",
            interval=500,
            log_every=100,
        )
        result = train(patches, ModelConfig.toy_config(), config)
        trained = self.score(result.generator.eval(), patches)
        self.assertGreaterEqual(trained, 28.0)

        untrained = Generator(
            get_variant("sanwp").model_config(ModelConfig.toy_config()), seed=0
        ).eval()
        self.assertLess(self.score(untrained, patches), trained)

    def test_reconstruction_loss_trends_down(self):
        patches = smooth_patches(4, 48, seed=2)
        falling = 0
        for seed in range(10):
            config = TrainConfig(
                steps=200,
                batch=2,
                patch_size=48,
                sigmas=(10.0,),
                seed=seed,
                lambda_g=0.0,
                variant="sanwp",
                interval=200,
                log_every=200,
            )
            history = train(patches, ModelConfig.toy_config(), config).history
            l_r = np.array([row.l_r for row in history])
            means = l_r.reshape(4, 50).mean(axis=1)
            falling += bool(np.all(np.diff(means) <= 0))
        self.assertGreaterEqual(falling, 9)

    def test_full_objective_stays_finite(self):
        patches = smooth_patches(4, 48, seed=3)
        config = TrainConfig(
            steps=2000,
            batch=1,
            patch_size=48,
            sigmas=(5.0, 10.0, 20.0),
            seed=0,
            variant="sagan",
            interval=2000,
            log_every=500,
        )
        result = train(patches, ModelConfig.toy_config(), config)

        self.assertEqual(len(result.history), 2000)
        for row in result.history:
            self.assertTrue(
                np.all(np.isfinite([row.l_r, row.l_c, row.l_g, row.l_total])), row
            )
        self.assertTrue(any(row.l_g > 0 for row in result.history))
        for network in (result.generator, result.discriminator):
            for name, value in network.state_dict().items():
                self.assertTrue(np.all(np.isfinite(value)), name)
