"""Command line launcher: ``framewise-shim`` or ``python -m framewise_shim``."""

from __future__ import annotations

import argparse

from framewise_shim.config import config_from_sources
from framewise_shim.server import serve


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="framewise-shim",
        description="Serve OpenAI-compatible embeddings (and optional chat) locally.",
    )
    parser.add_argument("--embed-model", help="embedding model id (default builtin/palette)")
    parser.add_argument("--chat-model", help="enable /v1/chat/completions with this model id")
    parser.add_argument("--judge-model", help="serve this id on chat completions for grading")
    parser.add_argument("--device", help="device hint for checkpoint-backed models")
    parser.add_argument("--port", type=int, help="listen port (default 8080)")
    parser.add_argument("--host", help="bind address (default 127.0.0.1)")
    args = parser.parse_args(argv)
    config = config_from_sources(
        embed_model=args.embed_model,
        chat_model=args.chat_model,
        judge_model=args.judge_model,
        device=args.device,
        port=args.port,
        host=args.host,
    )
    serve(config)


if __name__ == "__main__":
    main()
