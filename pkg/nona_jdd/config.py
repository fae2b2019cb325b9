"""
Configuration documents: network shapes, training runs and the JSON run
file the command line reads. Library-wide tunables live in
``nona_jdd.settings`` instead.
"""
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple

from ._exceptions import ConfigError
from .settings import settings

PATTERN_KINDS = ("bayer", "quad", "nona")
BAYER_BASES = ("RGGB", "BGGR", "GRBG", "GBRG")
TRAINING_SIGMAS = (10.0, 20.0, 30.0)


@dataclass(frozen=True)
class ModelConfig:
    widths: Tuple[int, ...] = (64, 128, 192, 256)
    disc_widths: Tuple[int, ...] = (64, 64, 128, 128, 256, 256, 512)
    attention_kernel: int = 9
    square_kernel: int = 9
    reduction: int = 16
    use_attention: bool = True
    gated_skips: bool = True
    toy: bool = False

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "disc_widths", tuple(int(w) for w in self.disc_widths))
        self.validate()

    @classmethod
    def toy_config(cls, **overrides: Any) -> "ModelConfig":
        """Every width divided by 8, 5-tap kernels, SE reduction 4."""
        defaults = dict(
            widths=(8, 16, 24, 32),
            disc_widths=(8, 8, 16, 16, 32, 32, 64),
            attention_kernel=5,
            square_kernel=5,
            reduction=4,
            toy=True,
        )
        defaults.update(overrides)
        return cls(**defaults)

    @property
    def levels(self) -> int:
        return len(self.widths)

    @property
    def size_multiple(self) -> int:
        """Generator inputs must have H and W divisible by this."""
        return 2 ** (self.levels - 1)

    def validate(self) -> None:
        if not self.widths or any(w <= 0 for w in self.widths):
            raise ConfigError(f"widths must be positive, got {self.widths}")
        if any(b < a for a, b in zip(self.widths, self.widths[1:])):
            raise ConfigError(f"widths must be non-decreasing, got {self.widths}")
        if len(self.disc_widths) != 7 or any(w <= 0 for w in self.disc_widths):
            raise ConfigError(
                f"disc_widths needs 7 positive widths, got {self.disc_widths}"
            )
        if self.attention_kernel < 1 or self.square_kernel < 1:
            raise ConfigError("attention and square kernels must be >= 1")
        if self.reduction < 1:
            raise ConfigError("SE reduction must be >= 1")
        for width in self.widths + self.disc_widths[-1:]:
            if width % self.reduction:
                raise ConfigError(
                    f"width {width} is not divisible by SE reduction {self.reduction}"
                )

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["widths"] = list(self.widths)
        data["disc_widths"] = list(self.disc_widths)
        return data


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch: int = 4
    patch_size: int = 48
    sigmas: Tuple[float, ...] = TRAINING_SIGMAS
    pattern: str = "nona"
    base: str = "RGGB"
    seed: int = 0
    interval: int = 500
    log_every: int = 50
    variant: str = "sagan"
    lambda_g: float = field(default_factory=lambda: settings.LAMBDA_G)
    lr: float = field(default_factory=lambda: settings.ADAM_LR)
    betas: Tuple[float, float] = field(
        default_factory=lambda: tuple(settings.ADAM_BETAS)
    )
    eps: float = field(default_factory=lambda: settings.ADAM_EPS)

    def __post_init__(self):
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        self.validate()

    def validate(self) -> None:
        for name in ("steps", "batch", "patch_size", "interval", "log_every"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not self.sigmas or any(s < 0 for s in self.sigmas):
            raise ConfigError(
                f"sigmas must be a non-empty set of values >= 0, got {self.sigmas}"
            )
        if self.pattern not in PATTERN_KINDS:
            raise ConfigError(
                f"pattern must be one of {PATTERN_KINDS}, got {self.pattern!r}"
            )
        if self.base not in BAYER_BASES:
            raise ConfigError(f"base must be one of {BAYER_BASES}, got {self.base!r}")
        if self.lambda_g < 0 or self.lr <= 0 or self.eps <= 0:
            raise ConfigError("lambda_g must be >= 0, lr and eps > 0")
        if len(self.betas) != 2 or not all(0 <= b < 1 for b in self.betas):
            raise ConfigError(f"betas must be two values in [0, 1), got {self.betas}")


RUN_KEYS = ("pattern", "base", "sigma", "seed", "variant", "model", "train", "paths")
MODEL_KEYS = ("widths", "disc_widths", "k", "square_kernel", "r", "toy", "gated_skips")
TRAIN_KEYS = (
    "steps", "batch", "patch_size", "lr", "betas", "lambda_g", "interval", "log_every"
)
PATH_KEYS = ("data", "out", "checkpoint")


def _reject_unknown(
    section: str, document: Dict[str, Any], known: Iterable[str]
) -> None:
    if not isinstance(document, dict):
        raise ConfigError(f"'{section}' must be a JSON object")
    unknown = sorted(set(document) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {', '.join(unknown)}")


def _sigmas(value: Any) -> Tuple[float, ...]:
    values = value if isinstance(value, (list, tuple)) else [value]
    try:
        return tuple(float(v) for v in values)
    except (TypeError, ValueError):
        raise ConfigError(f"sigma must be a number or a list of numbers, got {value!r}")


@dataclass
class RunConfig:
    """
    One run's JSON document. Keys:

    {"pattern", "base", "sigma", "seed", "variant",
     "model": {"widths", "disc_widths", "k", "square_kernel", "r", "toy",
               "gated_skips"},
     "train": {"steps", "batch", "patch_size", "lr", "betas", "lambda_g",
               "interval", "log_every"},
     "paths": {"data", "out", "checkpoint"}}

    Unknown keys are rejected. Command-line flags override the file.
    """

    pattern: str = "nona"
    base: str = "RGGB"
    sigmas: Tuple[float, ...] = TRAINING_SIGMAS
    seed: Optional[int] = None
    variant: str = "sagan"
    model: Dict[str, Any] = field(default_factory=dict)
    train: Dict[str, Any] = field(default_factory=dict)
    paths: Dict[str, Optional[str]] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, document: Dict[str, Any]) -> "RunConfig":
        _reject_unknown("run", document, RUN_KEYS)
        _reject_unknown("model", document.get("model", {}), MODEL_KEYS)
        _reject_unknown("train", document.get("train", {}), TRAIN_KEYS)
        _reject_unknown("paths", document.get("paths", {}), PATH_KEYS)

        seed = document.get("seed")
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
            raise ConfigError(f"seed must be an integer, got {seed!r}")
        sigmas = _sigmas(document["sigma"]) if "sigma" in document else TRAINING_SIGMAS
        config = cls(
            pattern=document.get("pattern", "nona"),
            base=document.get("base", "RGGB"),
            sigmas=sigmas,
            seed=seed,
            variant=document.get("variant", "sagan"),
            model=dict(document.get("model", {})),
            train=dict(document.get("train", {})),
            paths=dict(document.get("paths", {})),
        )
        config.validate()
        return config

    @classmethod
    def load(cls, path: Optional[str]) -> "RunConfig":
        if path is None:
            return cls()
        try:
            with open(path, "r", encoding="utf-8") as f:
                document = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}")
        return cls.from_dict(document)

    def validate(self) -> None:
        if self.pattern not in PATTERN_KINDS:
            raise ConfigError(
                f"pattern must be one of {PATTERN_KINDS}, got {self.pattern!r}"
            )
        if self.base not in BAYER_BASES:
            raise ConfigError(f"base must be one of {BAYER_BASES}, got {self.base!r}")
        if any(s < 0 for s in self.sigmas):
            raise ConfigError(f"sigma must be >= 0, got {self.sigmas}")

    def override(self, **flags: Any) -> "RunConfig":
        """Return a copy where every flag that was given (not None) wins."""
        top = {
            k: v
            for k, v in flags.items()
            if k in ("pattern", "base", "seed", "variant")
        }
        updated = replace(
            self,
            model=dict(self.model),
            train=dict(self.train),
            paths=dict(self.paths),
            **{k: v for k, v in top.items() if v is not None},
        )
        if flags.get("sigma") is not None:
            updated.sigmas = _sigmas(flags["sigma"])
        for key in MODEL_KEYS:
            if flags.get(key) is not None:
                updated.model[key] = flags[key]
        for key in TRAIN_KEYS:
            if flags.get(key) is not None:
                updated.train[key] = flags[key]
        for key in PATH_KEYS:
            if flags.get(key) is not None:
                updated.paths[key] = flags[key]
        updated.validate()
        return updated

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError(
                "a seed is required: pass --seed or set 'seed' in the config"
            )
        return self.seed

    def require_paths(
        self, *names: str, existing: Iterable[str] = ()
    ) -> Dict[str, Path]:
        """Check the named paths are set, and that the ``existing`` ones exist."""
        resolved = {}
        for name in names:
            value = self.paths.get(name)
            if not value:
                raise ConfigError(f"path '{name}' is required")
            resolved[name] = Path(value)
        for name in existing:
            if not resolved[name].exists():
                raise ConfigError(f"path '{name}' does not exist: {resolved[name]}")
        return resolved

    def model_config(self) -> ModelConfig:
        options = dict(self.model)
        toy = bool(options.pop("toy", False))
        renamed = {}
        for key, value in options.items():
            target = {"k": "attention_kernel", "r": "reduction"}.get(key, key)
            renamed[target] = tuple(value) if isinstance(value, list) else value
        if toy:
            return ModelConfig.toy_config(**renamed)
        return ModelConfig(**renamed)

    def train_config(self) -> TrainConfig:
        options = dict(self.train)
        if "betas" in options:
            options["betas"] = tuple(options["betas"])
        return TrainConfig(
            pattern=self.pattern,
            base=self.base,
            sigmas=self.sigmas,
            seed=self.require_seed(),
            variant=self.variant,
            **options,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pattern": self.pattern,
            "base": self.base,
            "sigma": list(self.sigmas),
            "seed": self.seed,
            "variant": self.variant,
            "model": dict(self.model),
            "train": dict(self.train),
            "paths": dict(self.paths),
        }
