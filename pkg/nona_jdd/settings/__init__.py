import importlib
import os

SETTINGS_ENVIRONMENT_VARIABLE = "NONA_JDD_SETTINGS"


class NonaJddSettings:
    """
    Allowing users to configure package settings when using nona-jdd
    without the need of touching the core package.

    Similar to django's settings module but simpler.

    User defined settings can be saved in whatever python settings module / .py file
    and then used by changing the env variable
    "NONA_JDD_SETTINGS" to point to them:
    os.environ["NONA_JDD_SETTINGS"] = "path.to.my.custom.settings.file" [py]

    Access package's settings with

    from nona_jdd.settings import settings
    # settings.LOG_LEVEL
    # settings.LAMBDA_G etc. (check nona_jdd/settings/default.py for more info)
    """

    def __init__(self, *args, **kwargs):
        self._configured = False
        self._user_settings = False
        super().__init__(*args, **kwargs)

    def __getattribute__(self, item):
        if item.startswith("_"):
            return super().__getattribute__(item)

        # reconfigure when never configured or when NONA_JDD_SETTINGS changed
        user_defined_settings = os.environ.get(SETTINGS_ENVIRONMENT_VARIABLE, False)
        if not self._configured or user_defined_settings != getattr(
            self, "_user_settings"
        ):
            self._configure()

        return super().__getattribute__(item)

    def _configure(self):
        if not getattr(self, "_configured"):
            default_settings = importlib.import_module("nona_jdd.settings.default")
            self._apply(default_settings)
            self._configured = True

        user_settings = os.environ.get(SETTINGS_ENVIRONMENT_VARIABLE, False)
        if user_settings != getattr(self, "_user_settings"):
            # a new user module overlays the defaults, not the previous overlay
            self._apply(importlib.import_module("nona_jdd.settings.default"))
            setattr(self, "_user_settings", user_settings)
            if user_settings:
                self._apply(importlib.import_module(user_settings))

    def _apply(self, module):
        for item in dir(module):
            if item.isupper():
                setattr(self, item, getattr(module, item))


settings = NonaJddSettings()


__all__ = ["settings", "SETTINGS_ENVIRONMENT_VARIABLE"]
