"""Python access to the mucf simulator.

Configurations are passed as JSON text or as plain dicts, in the same format
the ``mucf`` command-line tool reads.
"""

import json

from . import _mucf
from ._mucf import ConfigError, derive_seed, geometric_checkpoints, gm_rank, max_weight_matching

__all__ = [
    "ConfigError",
    "derive_seed",
    "geometric_checkpoints",
    "gm_rank",
    "max_weight_matching",
    "replicate",
    "run",
    "validate_config",
]


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def validate_config(config):
    return _mucf.validate_config(_text(config))


def run(config, seed=None):
    return _mucf.run(_text(config), seed)


def replicate(config, reps, threads=0, seed=None):
    return _mucf.replicate(_text(config), reps, threads, seed)
