"""Unsupervised cross-domain retrieval: differentiable core, clustering and training."""

import json as _json

from ._core import (
    CollapseError,
    ConfigError,
    DataError,
    NumericError,
    StructuralError,
    UcdirError,
    UsageError,
    check,
    cosine_lr,
    dd_pair,
    derive_seed,
    encode,
    entropy,
    in_domain_distance,
    init_params,
    instance_losses,
    kmeans,
    lambda_schedule,
    retrieve,
)
from . import _core


def default_config():
    return _json.loads(_core.default_config())


def _dump(config):
    if config is None:
        return ""
    return config if isinstance(config, str) else _json.dumps(config)


def generate(config=None):
    return _core.generate(_dump(config))


def train(config=None, variant="full", out_dir=""):
    return _core.train(_dump(config), variant, str(out_dir))


__all__ = [
    "CollapseError", "ConfigError", "DataError", "NumericError", "StructuralError", "UcdirError",
    "UsageError", "check", "cosine_lr", "dd_pair", "default_config", "derive_seed", "encode", "entropy", "generate",
    "in_domain_distance", "init_params", "instance_losses", "kmeans", "lambda_schedule", "retrieve", "train",
]
