"""Service configuration from defaults, flags, and environment."""

from __future__ import annotations

import os
from dataclasses import dataclass

DEFAULT_EMBED_MODEL = "builtin/palette"

# Environment wins over flags so a deployment can override a baked-in
# launch script without editing it.
ENV_EMBED_MODEL = "SHIM_EMBED_MODEL"
ENV_CHAT_MODEL = "SHIM_CHAT_MODEL"
ENV_JUDGE_MODEL = "SHIM_JUDGE_MODEL"
ENV_DEVICE = "SHIM_DEVICE"
ENV_PORT = "SHIM_PORT"
ENV_HOST = "SHIM_HOST"


@dataclass(frozen=True)
class ShimConfig:
    """One served process; only the embedder is mandatory."""

    embed_model_id: str = DEFAULT_EMBED_MODEL
    chat_model_id: str | None = None
    judge_model_id: str | None = None
    device: str = "cpu"
    port: int = 8080
    host: str = "127.0.0.1"

    def __post_init__(self) -> None:
        if not self.embed_model_id:
            raise ValueError("embed_model_id must be set")
        if not 0 <= self.port <= 65535:
            raise ValueError(f"port out of range: {self.port}")


def config_from_sources(
    embed_model: str | None = None,
    chat_model: str | None = None,
    judge_model: str | None = None,
    device: str | None = None,
    port: int | None = None,
    host: str | None = None,
    env: dict[str, str] | None = None,
) -> ShimConfig:
    """Merge flag values with the environment; env beats flags."""
    env = os.environ if env is None else env

    def pick(env_key: str, flag: str | None, default):
        if env_key in env and env[env_key]:
            return env[env_key]
        if flag is not None:
            return flag
        return default

    raw_port = pick(ENV_PORT, port, 8080)
    try:
        port_value = int(raw_port)
    except (TypeError, ValueError):
        raise ValueError(f"port must be an integer, got {raw_port!r}") from None
    return ShimConfig(
        embed_model_id=pick(ENV_EMBED_MODEL, embed_model, DEFAULT_EMBED_MODEL),
        chat_model_id=pick(ENV_CHAT_MODEL, chat_model, None),
        judge_model_id=pick(ENV_JUDGE_MODEL, judge_model, None),
        device=pick(ENV_DEVICE, device, "cpu"),
        port=port_value,
        host=pick(ENV_HOST, host, "127.0.0.1"),
    )
