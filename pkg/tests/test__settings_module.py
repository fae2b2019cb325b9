import os
import unittest

from nona_jdd.settings import settings


class SettingsModuleTest(unittest.TestCase):
    def test_default_settings(self):

        os.environ["NONA_JDD_SETTINGS"] = "nona_jdd.settings.default"

        self.assertTrue(
            len(settings.PLUGINS) > 0,
            "There should be some plugins in the default project's settings",
        )

        self.assertEqual(
            settings.LOG_LEVEL,
            30,
            "LOG_LEVEL should be WARNING in the project's default settings",
        )
        self.assertEqual(settings.LAMBDA_G, 1e-4)
        self.assertEqual(tuple(settings.ADAM_BETAS), (0.9, 0.99))

    def test_settings_change_when_new_module_set(self):
        os.environ["NONA_JDD_SETTINGS"] = "nona_jdd.settings.default"
        self.assertEqual(settings.LOG_LEVEL, 30)

        os.environ[
            "NONA_JDD_SETTINGS"
        ] = "tests.test_data.test_settings_module.test_settings"

        self.assertEqual(
            settings.LOG_LEVEL,
            40,
            "LOG_LEVEL should be ERROR after settings are changed with the testing ones",
        )
        self.assertEqual(
            settings.PSNR_CAP_DB,
            100.0,
            "Settings missing from the testing module fall back to the defaults",
        )

    def test_unset_variable_falls_back_to_defaults(self):
        os.environ[
            "NONA_JDD_SETTINGS"
        ] = "tests.test_data.test_settings_module.test_settings"
        self.assertEqual(settings.PREFETCH_BATCHES, 1)

        del os.environ["NONA_JDD_SETTINGS"]
        self.assertEqual(settings.PREFETCH_BATCHES, 2)
