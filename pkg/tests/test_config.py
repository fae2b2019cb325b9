import json

from nona_jdd._exceptions import ConfigError
from nona_jdd.config import ModelConfig, RunConfig, TrainConfig
from tests import NonaJddTest


class TestModelConfig(NonaJddTest):
    def test_full_defaults(self):
        config = ModelConfig()
        self.assertEqual(config.widths, (64, 128, 192, 256))
        self.assertEqual(config.size_multiple, 8)
        self.assertEqual(config.attention_kernel, 9)

    def test_toy_config(self):
        config = ModelConfig.toy_config()
        self.assertEqual(config.widths, (8, 16, 24, 32))
        self.assertEqual(
            (config.attention_kernel, config.square_kernel, config.reduction), (5, 5, 4)
        )
        self.assertTrue(config.toy)

    def test_reduction_must_divide_widths(self):
        with self.assertRaises(ConfigError):
            ModelConfig.toy_config(reduction=16)

    def test_widths_must_not_shrink(self):
        with self.assertRaises(ConfigError):
            ModelConfig(widths=(64, 32))

    def test_discriminator_has_seven_layers(self):
        with self.assertRaises(ConfigError):
            ModelConfig(disc_widths=(64, 64))


class TestTrainConfig(NonaJddTest):
    def test_defaults(self):
        config = TrainConfig()
        self.assertEqual(config.lr, 5e-4)
        self.assertEqual(config.betas, (0.9, 0.99))
        self.assertEqual(config.sigmas, (10.0, 20.0, 30.0))
        self.assertEqual(config.patch_size, 48)

    def test_rejects_bad_values(self):
        for overrides in (
            {"steps": 0},
            {"sigmas": ()},
            {"sigmas": (-1.0,)},
            {"pattern": "xtrans"},
            {"betas": (0.9, 1.0)},
        ):
            with self.subTest(**{k: str(v) for k, v in overrides.items()}):
                with self.assertRaises(ConfigError):
                    TrainConfig(**overrides)


class TestRunConfig(NonaJddTest):
    def write(self, document):
        path = self.tmp_dir() / "run.json"
        path.write_text(json.dumps(document), encoding="utf-8")
        return str(path)

    def test_load(self):
        run = RunConfig.load(
            self.write(
                {
                    "pattern": "quad",
                    "sigma": 15,
                    "seed": 3,
                    "model": {"toy": True, "k": 3},
                    "train": {"steps": 10, "betas": [0.5, 0.9]},
                    "paths": {"data": "images"},
                }
            )
        )
        self.assertEqual(run.pattern, "quad")
        self.assertEqual(run.sigmas, (15.0,))
        self.assertEqual(run.train_config().betas, (0.5, 0.9))
        self.assertEqual(run.train_config().steps, 10)

    def test_unknown_keys_are_rejected(self):
        for document in (
            {"sigmas": [10]},
            {"model": {"kernel": 9}},
            {"train": {"epochs": 1}},
            {"paths": {"log": "x"}},
        ):
            with self.subTest(document=document), self.assertRaises(ConfigError):
                RunConfig.from_dict(document)

    def test_missing_and_malformed_files(self):
        with self.assertRaises(ConfigError):
            RunConfig.load(str(self.tmp_dir() / "absent.json"))
        path = self.tmp_dir() / "broken.json"
        path.write_text("{", encoding="utf-8")
        with self.assertRaises(ConfigError):
            RunConfig.load(str(path))

    def test_seed_must_be_an_integer(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_dict({"seed": "7"})

    def test_flags_override_the_file(self):
        run = RunConfig.from_dict({"seed": 1, "sigma": [10, 20], "train": {"steps": 5}})
        updated = run.override(seed=9, sigma=[30.0], steps=7, pattern=None, data="here")
        self.assertEqual(updated.seed, 9)
        self.assertEqual(updated.sigmas, (30.0,))
        self.assertEqual(updated.train["steps"], 7)
        self.assertEqual(updated.paths["data"], "here")
        self.assertEqual(updated.pattern, "nona")
        self.assertEqual(run.seed, 1)
        self.assertEqual(run.train["steps"], 5)

    def test_require_seed(self):
        with self.assertRaises(ConfigError):
            RunConfig().require_seed()
        with self.assertRaises(ConfigError):
            RunConfig().train_config()
        self.assertEqual(RunConfig(seed=0).require_seed(), 0)

    def test_require_paths(self):
        directory = self.tmp_dir()
        run = RunConfig(paths={"data": str(directory), "out": str(directory / "new")})
        resolved = run.require_paths("data", "out", existing=("data",))
        self.assertEqual(resolved["data"], directory)
        with self.assertRaises(ConfigError):
            run.require_paths("checkpoint")
        with self.assertRaises(ConfigError):
            run.require_paths("out", existing=("out",))

    def test_model_options_are_mapped(self):
        config = RunConfig(model={"toy": True, "k": 3, "r": 8}).model_config()
        self.assertEqual(config.attention_kernel, 3)
        self.assertEqual(config.reduction, 8)
        self.assertEqual(config.widths, (8, 16, 24, 32))
        full = RunConfig(model={"widths": [16, 32], "r": 16}).model_config()
        self.assertEqual(full.widths, (16, 32))
        self.assertFalse(full.toy)

    def test_document_roundtrip(self):
        run = RunConfig.from_dict({"seed": 2, "variant": "san", "model": {"toy": True}})
        self.assertEqual(RunConfig.from_dict(run.to_dict()), run)
