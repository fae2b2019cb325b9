"""
nona-jdd command line.

    nona-jdd patches     --data DIR --out DIR [--patch-size N] [--stride N]
    nona-jdd mosaic      IMAGE --out PNG [--pattern P] [--base B]
    nona-jdd noise       INPUT --out PNG --sigma S --seed N
    nona-jdd bin         MOSAIC --out PNG
    nona-jdd train       --data DIR --out DIR --seed N [--variant V] [--toy] ...
    nona-jdd reconstruct MOSAIC --checkpoint CKPT --out PNG [--toy]
    nona-jdd evaluate    --data DIR --checkpoint CKPT --seed N [--sigma S ...]
    nona-jdd gradcheck   [--toy]
    nona-jdd bench       [--toy] [--size N] [--repeats N]

Every command takes ``--config run.json``; flags given on the command line
win over the file. Exit codes: 0 success, 1 usage or configuration error,
2 data error, 3 numerical failure.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from ._exceptions import (
    ConfigError,
    DataError,
    GradientError,
    NonaJddException,
    NonFiniteError,
    PatternNotSupportedError,
    ShapeMismatchError,
    VariantNotImplementedError,
)
from ._gradcheck import run_layer_suite
from ._tensor import Tensor, no_grad
from ._utils import counter_rng, read_rgb, sidecar_path, write_rgb
from .cfa import (
    add_noise,
    bin_to_bayer,
    make_pattern,
    mosaic,
    read_mosaic,
    write_mosaic,
)
from .checkpoint import load_checkpoint
from .config import BAYER_BASES, PATTERN_KINDS, RunConfig, TrainConfig
from .evaluation import evaluate, reconstruct
from .generator import Generator
from .patches import extract_patches, save_patches
from .settings import settings
from .training import train
from .variants import VARIANTS, get_variant

logging.basicConfig()
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class UsageError(NonaJddException):
    pass


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="seed for every random draw")
    common.add_argument("--pattern", choices=PATTERN_KINDS)
    common.add_argument("--base", choices=BAYER_BASES, help="Bayer base of the pattern")
    common.add_argument(
        "-v", "--verbose", action="store_true", help="log at INFO level"
    )
    return common


def _model_options() -> argparse.ArgumentParser:
    model = argparse.ArgumentParser(add_help=False)
    model.add_argument(
        "--toy", action="store_true", default=None, help="widths divided by 8"
    )
    model.add_argument("--variant", choices=sorted(VARIANTS), help="ablation variant")
    model.add_argument("--k", type=int, help="asymmetric attention kernel length")
    model.add_argument("--r", type=int, help="squeeze-excitation reduction")
    return model


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="nona-jdd", description="Nona-Bayer joint demosaicing and denoising"
    )
    commands = parser.add_subparsers(dest="command", parser_class=ArgumentParser)
    common, model = _common_options(), _model_options()

    patches = commands.add_parser(
        "patches", parents=[common], help="cut training patches"
    )
    patches.add_argument("--data", help="directory of RGB images")
    patches.add_argument("--out", help="output directory")
    patches.add_argument("--patch-size", dest="patch_size", type=int)
    patches.add_argument("--stride", type=int)

    mosaic_cmd = commands.add_parser(
        "mosaic", parents=[common], help="simulate a CFA capture"
    )
    mosaic_cmd.add_argument("input", help="RGB image")
    mosaic_cmd.add_argument("--out", required=True, help="16-bit mosaic PNG")

    noise = commands.add_parser(
        "noise", parents=[common], help="mosaic and add Gaussian noise"
    )
    noise.add_argument("input", help="RGB image, or a mosaic PNG with its sidecar")
    noise.add_argument("--out", required=True)
    noise.add_argument(
        "--sigma", type=float, nargs="+", help="noise level on the 0-255 scale"
    )

    bin_cmd = commands.add_parser(
        "bin", parents=[common], help="bin a quad or nona mosaic to Bayer"
    )
    bin_cmd.add_argument("input", help="mosaic PNG with its sidecar")
    bin_cmd.add_argument("--out", required=True)

    train_cmd = commands.add_parser(
        "train", parents=[common, model], help="train the networks"
    )
    train_cmd.add_argument("--data", help="directory of RGB images")
    train_cmd.add_argument("--out", help="checkpoint and log directory")
    train_cmd.add_argument("--sigma", type=float, nargs="+")
    train_cmd.add_argument("--steps", type=int)
    train_cmd.add_argument("--batch", type=int)
    train_cmd.add_argument("--patch-size", dest="patch_size", type=int)
    train_cmd.add_argument("--lr", type=float)
    train_cmd.add_argument("--lambda-g", dest="lambda_g", type=float)
    train_cmd.add_argument("--interval", type=int, help="checkpoint every N steps")
    train_cmd.add_argument("--log-every", dest="log_every", type=int)

    rec = commands.add_parser(
        "reconstruct", parents=[common, model], help="demosaic one mosaic"
    )
    rec.add_argument("input", help="mosaic PNG with its sidecar")
    rec.add_argument("--checkpoint")
    rec.add_argument("--out", required=True, help="RGB PNG")

    ev = commands.add_parser(
        "evaluate", parents=[common, model], help="score a checkpoint"
    )
    ev.add_argument("--data", help="directory of RGB images")
    ev.add_argument("--checkpoint")
    ev.add_argument("--sigma", type=float, nargs="+")
    ev.add_argument("--out", help="write the report JSON here")
    ev.add_argument(
        "--colour-space",
        dest="colour_space",
        choices=("srgb", "linear"),
        default="srgb",
    )
    ev.add_argument(
        "--binned", action="store_true", help="bin nona to Bayer before reconstruction"
    )

    grad = commands.add_parser(
        "gradcheck", parents=[common], help="finite-difference checks"
    )
    grad.add_argument("--toy", action="store_true", help="toy-width networks")
    grad.add_argument("--samples", type=int, default=6, help="coordinates per input")

    bench = commands.add_parser(
        "bench", parents=[common, model], help="parameter count and speed"
    )
    bench.add_argument("--size", type=int, default=256, help="square input side")
    bench.add_argument("--repeats", type=int, default=3)
    return parser


def _run_config(args) -> RunConfig:
    flags = {
        key: value
        for key, value in vars(args).items()
        if key not in ("config", "command", "input", "verbose", "out")
    }
    if "out" in vars(args) and args.command in ("patches", "train"):
        flags["out"] = args.out
    return RunConfig.load(args.config).override(**flags)


def _generator(run: RunConfig, checkpoint: Optional[Path]) -> Generator:
    variant = get_variant(run.variant)
    generator = Generator(variant.model_config(run.model_config()), seed=run.seed or 0)
    if checkpoint is not None:
        params, _ = load_checkpoint(checkpoint)
        generator.load_state_dict(params)
    return generator.eval()


def _single_sigma(run: RunConfig) -> float:
    if len(run.sigmas) != 1:
        raise ConfigError(f"expected one --sigma, got {list(run.sigmas)}")
    return run.sigmas[0]


def cmd_patches(args, run: RunConfig) -> int:
    paths = run.require_paths("data", "out", existing=("data",))
    size = int(run.train.get("patch_size", TrainConfig.patch_size))
    patch_set = extract_patches(paths["data"], size, stride=args.stride)
    written = save_patches(patch_set, paths["out"])
    print(f"{len(written)} patches of {size}×{size} written to {paths['out']}")
    return EXIT_OK


def cmd_mosaic(args, run: RunConfig) -> int:
    m = mosaic(read_rgb(args.input), make_pattern(run.pattern, run.base))
    write_mosaic(args.out, m)
    print(f"{m.pattern.kind} mosaic {m.shape[0]}×{m.shape[1]} written to {args.out}")
    return EXIT_OK


def cmd_noise(args, run: RunConfig) -> int:
    seed = run.require_seed()
    sigma = _single_sigma(run)
    if sidecar_path(args.input).exists():
        m = read_mosaic(args.input)
    else:
        m = mosaic(read_rgb(args.input), make_pattern(run.pattern, run.base))
    noisy = add_noise(m, sigma, seed)
    write_mosaic(args.out, noisy)
    print(f"sigma {sigma:g} {noisy.pattern.kind} mosaic written to {args.out}")
    return EXIT_OK


def cmd_bin(args, run: RunConfig) -> int:
    binned = bin_to_bayer(read_mosaic(args.input))
    write_mosaic(args.out, binned)
    print(
        f"binned Bayer mosaic {binned.shape[0]}×{binned.shape[1]} written to {args.out}"
    )
    return EXIT_OK


def cmd_train(args, run: RunConfig) -> int:
    paths = run.require_paths("data", "out", existing=("data",))
    config = run.train_config()
    model_config = run.model_config()
    patch_set = extract_patches(paths["data"], config.patch_size)

    out_dir = paths["out"]
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "run.json", "w", encoding="utf-8") as f:
        json.dump(run.to_dict(), f, indent=2, sort_keys=True)

    result = train(patch_set, model_config, config, out_dir)
    last = result.history[-1]
    print(
        f"{config.steps} steps of {get_variant(config.variant).name}: "
        f"l_total {last.l_total:.5f}, {len(result.checkpoints)} checkpoints in {out_dir}"
    )
    return EXIT_OK


def cmd_reconstruct(args, run: RunConfig) -> int:
    paths = run.require_paths("checkpoint", existing=("checkpoint",))
    generator = _generator(run, paths["checkpoint"])
    rgb = reconstruct(generator, read_mosaic(args.input))
    write_rgb(args.out, np.transpose(rgb, (2, 0, 1)))
    print(f"{rgb.shape[0]}×{rgb.shape[1]} reconstruction written to {args.out}")
    return EXIT_OK


def cmd_evaluate(args, run: RunConfig) -> int:
    paths = run.require_paths("data", "checkpoint", existing=("data", "checkpoint"))
    generator = _generator(run, paths["checkpoint"])
    report = evaluate(
        generator,
        paths["data"],
        run.sigmas,
        pattern=run.pattern,
        base=run.base,
        seed=run.require_seed(),
        colour_space=args.colour_space,
        binned=args.binned,
    )
    if args.out:
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
    print(report.to_table())
    return EXIT_OK


def cmd_gradcheck(args, run: RunConfig) -> int:
    results = run_layer_suite(toy=args.toy, seed=run.seed or 0, samples=args.samples)
    for result in results:
        print(result)
    failed = [r.layer for r in results if not r.passed]
    if failed:
        raise GradientError(f"finite-difference check failed for {', '.join(failed)}")
    return EXIT_OK


def cmd_bench(args, run: RunConfig) -> int:
    generator = _generator(run, None)
    multiple = generator.config.size_multiple
    size = max(multiple, args.size // multiple * multiple)
    rng = counter_rng(run.seed or 0, 0)
    mosaic_batch = Tensor(
        rng.uniform(0, 1, size=(1, 1, size, size)).astype(generator.dtype)
    )

    generator.timings.clear()
    with no_grad():
        for _ in range(max(args.repeats, 1)):
            generator(mosaic_batch)
    if not generator.timings:
        raise ConfigError("bench needs ForwardTimingPlugin in settings.PLUGINS")
    seconds = float(np.median(generator.timings))
    megapixels = size * size / 1e6
    published = settings.PUBLISHED_SECONDS_PER_1024 / (1024 * 1024 / 1e6)

    count = generator.count_parameters()
    reference = settings.PUBLISHED_PARAMETER_COUNT
    print(
        f"generator parameters  {count:,} (published {reference:,}, "
        f"delta {count - reference:+,})"
    )
    print(
        f"forward {size}×{size}     {seconds * 1e3:.1f} ms, "
        f"{seconds * 1e3 / megapixels:.1f} ms/megapixel "
        f"(published {published * 1e3:.1f})"
    )
    return EXIT_OK


COMMANDS = {
    "patches": cmd_patches,
    "mosaic": cmd_mosaic,
    "noise": cmd_noise,
    "bin": cmd_bin,
    "train": cmd_train,
    "reconstruct": cmd_reconstruct,
    "evaluate": cmd_evaluate,
    "gradcheck": cmd_gradcheck,
    "bench": cmd_bench,
}


def exit_code(error: Exception) -> int:
    if isinstance(error, (NonFiniteError, GradientError)):
        return EXIT_NUMERICAL
    if isinstance(error, (DataError, ShapeMismatchError)):
        return EXIT_DATA
    if isinstance(
        error,
        (UsageError, ConfigError, PatternNotSupportedError, VariantNotImplementedError),
    ):
        return EXIT_USAGE
    return EXIT_DATA


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("nona-jdd: a command is required")
        if args.verbose:
            settings.LOG_LEVEL = logging.INFO
        logger.setLevel(settings.LOG_LEVEL)
        run = _run_config(args)
        return COMMANDS[args.command](args, run)
    except NonaJddException as e:
        print(f"nona-jdd: {e.message}", file=sys.stderr)
        return exit_code(e)


if __name__ == "__main__":
    sys.exit(main())
