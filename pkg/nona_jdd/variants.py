from dataclasses import dataclass

from ._exceptions import VariantNotImplementedError
from .config import ModelConfig


@dataclass(frozen=True)
class Variant:
    """Which parts of the full model and objective an ablation keeps."""

    name: str
    attention: bool
    pcl: bool
    gan: bool

    def model_config(self, config: ModelConfig) -> ModelConfig:
        if config.use_attention == self.attention:
            return config
        return ModelConfig(**{**config.to_dict(), "use_attention": self.attention})


BASENET = Variant("BaseNet", attention=False, pcl=False, gan=False)
BASEGAN = Variant("BaseGAN", attention=False, pcl=False, gan=True)
SANWP = Variant("SANWP", attention=True, pcl=False, gan=False)
SAN = Variant("SAN", attention=True, pcl=True, gan=False)
SAGAN = Variant("SAGAN", attention=True, pcl=True, gan=True)

VARIANTS = {
    BASENET.name.lower(): BASENET,
    BASEGAN.name.lower(): BASEGAN,
    SANWP.name.lower(): SANWP,
    SAN.name.lower(): SAN,
    SAGAN.name.lower(): SAGAN,
}


def get_variant(name: str) -> Variant:
    try:
        return VARIANTS[name.lower()]
    except (KeyError, AttributeError):
        raise VariantNotImplementedError(name)
