import os
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pytest


class NonaJddTest(unittest.TestCase):

    maxDiff = None
    slow = False
    needs_slow = False

    def setUp(self):
        os.environ[
            "NONA_JDD_SETTINGS"
        ] = "tests.test_data.test_settings_module.test_settings"
        if self.needs_slow and not self.slow:
            pytest.skip(f"'{self.__class__.__name__}' is slow, run with --slow")

    def tmp_dir(self) -> Path:
        directory = tempfile.TemporaryDirectory()
        self.addCleanup(directory.cleanup)
        return Path(directory.name)

    def rng(self, *stream) -> np.random.Generator:
        return np.random.default_rng([20230901, *stream])
