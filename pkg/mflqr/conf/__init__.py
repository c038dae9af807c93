"""
Library settings: tolerances, seeds, sample sizes and output formats.

Defaults live in :mod:`mflqr.conf.global_settings`. They can be replaced by

- a module named in the ``MFLQR_SETTINGS_MODULE`` environment variable, read on first access;
- ``settings.configure(NAME=value, ...)`` before the first access;
- ``settings.load('package.module')`` at any time;
- ``with settings.override(NAME=value):`` for a temporary change.

Only names defined in the defaults can be set. A misspelled name raises
:class:`~mflqr.exceptions.ConfigException` instead of being silently ignored.
"""

import importlib
import os
from contextlib import contextmanager
from types import ModuleType

from mflqr.conf import global_settings
from mflqr.exceptions import ConfigException
from mflqr.logger import logger

ENVIRONMENT_VARIABLE = "MFLQR_SETTINGS_MODULE"


def _module_settings(module: ModuleType) -> dict:
    return {name: getattr(module, name) for name in dir(module) if name.isupper()}


def _import(module_name: str) -> ModuleType:
    try:
        return importlib.import_module(module_name)
    except ImportError as e:
        raise ConfigException(
            ConfigException.ERRORS.INVALID_VALUE,
            key=ENVIRONMENT_VARIABLE,
            detail=f"Could not import settings module '{module_name}': {e}",
        ) from e


class Settings:
    """Resolved values, one attribute per ALL_CAPS name of the defaults."""

    def __init__(self, overrides: dict | None = None, source: str | None = None):
        self.__dict__.update(_module_settings(global_settings))
        self.SETTINGS_MODULE = source
        for name, value in (overrides or {}).items():
            self.set(name, value)

    def set(self, name: str, value):
        if name not in _module_settings(global_settings):
            raise ConfigException(ConfigException.ERRORS.UNKNOWN_KEY, key=name, detail="Not an MFLQR setting.")
        setattr(self, name, value)

    def as_dict(self) -> dict:
        return {name: value for name, value in vars(self).items() if name.isupper() and name != "SETTINGS_MODULE"}


class LazySettings:
    """
    Proxy resolving :class:`Settings` on first attribute access.

    Assigning attributes on the proxy is refused; use :meth:`configure`,
    :meth:`load` or :meth:`override`.
    """

    def __init__(self):
        self.__dict__["_wrapped"] = None

    def __getattr__(self, name):
        return getattr(self._resolved(), name)

    def __setattr__(self, name, value):
        raise AttributeError(f"Use settings.configure({name}=...) or settings.override({name}=...) to change it.")

    def __dir__(self):
        return dir(self._resolved())

    def _resolved(self) -> Settings:
        if self._wrapped is None:
            module_name = os.environ.get(ENVIRONMENT_VARIABLE) or None
            if module_name is None:
                logger.debug("{} is undefined, using global_settings.", ENVIRONMENT_VARIABLE)
                self.__dict__["_wrapped"] = Settings()
            else:
                self.load(module_name)
        return self._wrapped

    @property
    def configured(self) -> bool:
        return self._wrapped is not None

    def configure(self, **options):
        """
        Set values before the first access.

        :raises RuntimeError: If the settings were already resolved.
        :raises ConfigException: If a name is not a known setting.
        """
        if self.configured:
            raise RuntimeError("Settings already configured or accessed; use settings.override instead.")
        self.__dict__["_wrapped"] = Settings(options)

    def load(self, module_name: str):
        """Replace the current values with the defaults updated by ``module_name``."""
        values = _module_settings(_import(module_name))
        for name, value in values.items():
            logger.info("Setting {} = {!r} from {}.", name, value, module_name)
        self.__dict__["_wrapped"] = Settings(values, source=module_name)

    def reset(self):
        """Forget any configuration; the next access resolves the defaults again."""
        self.__dict__["_wrapped"] = None

    @contextmanager
    def override(self, **options):
        """Temporarily change some values, restoring the previous ones on exit."""
        current = self._resolved()
        previous = current.as_dict()
        try:
            for name, value in options.items():
                current.set(name, value)
            yield self
        finally:
            for name, value in previous.items():
                setattr(current, name, value)


settings = LazySettings()
