"""Season-varying remote-sensing image translation and change detection."""

import json

from . import _core
from ._core import *  # noqa: F401,F403


def train_config(**overrides):
    """JSON text for TranslationModel / Trainer; unset keys keep their defaults."""
    return json.dumps(overrides)


def trainer(**overrides):
    return _core.Trainer(train_config(**overrides))


def model(**overrides):
    return _core.TranslationModel(train_config(**overrides))
