"""Spatio-temporal forecasting with separate spatial and temporal branches."""

import json

from . import _core
from ._core import (
    CheckpointError,
    ConfigError,
    NumericError,
    ParseError,
    ShapeError,
    adaptive_adjacency,
    coverage_check,
    hop_hyperedges,
    metrics,
    patch_count,
    synthesize,
    write_synthetic,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "NumericError",
    "ParseError",
    "ShapeError",
    "adaptive_adjacency",
    "coverage_check",
    "default_config",
    "evaluate",
    "hop_hyperedges",
    "metrics",
    "patch_count",
    "synthesize",
    "train",
    "write_synthetic",
]


def default_config():
    """Every config key with its default value."""
    return json.loads(_core.default_config_json())


def _config_text(config):
    if config is None:
        return ""
    if isinstance(config, str):
        with open(config) as f:
            config = json.load(f)
    return json.dumps(config)


def train(config=None, data_dir="", out_dir=""):
    """Train and evaluate one model; returns the report as a dict."""
    return json.loads(_core.train_json(_config_text(config), str(data_dir), str(out_dir)))


def evaluate(checkpoint, data_dir, out_dir=""):
    """Evaluate a saved checkpoint on a dataset directory."""
    return json.loads(_core.evaluate_json(str(checkpoint), str(data_dir), str(out_dir)))
