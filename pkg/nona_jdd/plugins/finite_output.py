import functools
import logging

import numpy as np

from nona_jdd.settings import settings

from .._exceptions import NonFiniteError
from ._interface import PluginInterface

logging.basicConfig()
logger = logging.getLogger(__name__)


class FiniteOutputPlugin(PluginInterface):
    """
    Scan what the decorated network method returns and raise NonFiniteError
    naming the network and method when any value is NaN or Inf.

    Stays active when op-level scanning (settings.CHECK_FINITE) is off.
    """

    run_on_networks = ("*",)
    run_on_methods = ("forward",)

    @classmethod
    def run(cls, decorated):
        @functools.wraps(decorated)
        def decorated_method_wrapper(self, *args, **kwargs):
            logger.setLevel(settings.LOG_LEVEL)
            class_name = self.__class__.__name__
            method_name = decorated.__name__
            logger.debug(
                f"Decorating: {class_name}.{method_name}() with FiniteOutputPlugin"
            )

            result = decorated(self, *args, **kwargs)
            data = getattr(result, "data", result)
            if not np.all(np.isfinite(data)):
                raise NonFiniteError(f"{class_name}.{method_name}()")
            return result

        return decorated_method_wrapper
