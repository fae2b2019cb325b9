from abc import ABC, abstractmethod
from typing import Iterable


class PluginInterface(ABC):
    """
    Interface that all "Plugins" (including the ones written by programmers
    using the package) should implement.

    Every plugin should have the following 2 methods implemented:

    - should_run
    - run
    """

    run_on_networks: Iterable[str] = ("*",)
    run_on_methods: Iterable[str] = ("forward",)

    @classmethod
    @abstractmethod
    def run(cls, decorated):
        pass

    @classmethod
    def should_run(cls, network, method):
        return cls._should_run_network_check(network) and cls._should_run_method_check(
            method
        )

    @classmethod
    def _should_run_network_check(cls, network):
        return "*" in cls.run_on_networks or network in cls.run_on_networks

    @classmethod
    def _should_run_method_check(cls, method):
        return method in cls.run_on_methods
