import functools
import logging
import time

from nona_jdd.settings import settings

from ._interface import PluginInterface

logging.basicConfig()
logger = logging.getLogger(__name__)


class ForwardTimingPlugin(PluginInterface):
    """
    Record the wall-clock duration of every decorated call in the
    network's ``timings`` list (seconds). The benchmark reads it back.
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

            started = time.perf_counter()
            result = decorated(self, *args, **kwargs)
            elapsed = time.perf_counter() - started

            timings = getattr(self, "timings", None)
            if timings is not None:
                timings.append(elapsed)
            logger.debug(f"{class_name}.{method_name}() took {elapsed * 1e3:.2f} ms")
            return result

        return decorated_method_wrapper
