"""OpenAI-compatible model shim for the framewise runtime."""

from framewise_shim.config import ShimConfig, config_from_sources
from framewise_shim.models import LoadedModels, ModelLoadError, load_models
from framewise_shim.server import create_app, serve

__all__ = [
    "LoadedModels",
    "ModelLoadError",
    "ShimConfig",
    "config_from_sources",
    "create_app",
    "load_models",
    "serve",
]
