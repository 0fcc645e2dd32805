from __future__ import annotations

import threading
import time
from pathlib import Path

import pytest
import uvicorn

from framewise_shim.config import ShimConfig
from framewise_shim.server import create_app

FIXTURES = Path(__file__).parent.parent / "fixtures"


@pytest.fixture(scope="session")
def shim_url():
    """A real shim process boundary: uvicorn on an ephemeral port."""
    config = ShimConfig(
        chat_model_id="builtin/caption",
        judge_model_id="builtin/lexical-judge",
        port=0,
    )
    server = uvicorn.Server(
        uvicorn.Config(create_app(config), host="127.0.0.1", port=0, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10.0
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("shim server did not start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


@pytest.fixture(scope="session")
def fixture_images() -> dict[str, bytes]:
    return {
        name: (FIXTURES / f"{name}.png").read_bytes()
        for name in ("red_coat", "green_field", "blue_door")
    }
