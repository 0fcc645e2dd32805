"""FastAPI app exposing the OpenAI-compatible wire surface.

Request bodies are parsed by hand rather than through pydantic models:
the wire contract promises 400 on malformed payloads, not framework
422s.
"""

from __future__ import annotations

import base64
import binascii
import contextlib
import uuid

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from framewise_shim.config import ShimConfig
from framewise_shim.models import LoadedModels, load_models


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"message": message, "type": "invalid_request_error"}},
    )


def _decode_data_url(item: str) -> bytes:
    head, _, b64 = item.partition(";base64,")
    if not b64 or not head.startswith("data:"):
        raise ValueError("image inputs must be base64 data-URLs")
    try:
        return base64.b64decode(b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ValueError(f"bad base64 in data-URL: {exc}") from exc


def create_app(config: ShimConfig) -> FastAPI:
    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.models = load_models(
            config.embed_model_id,
            config.chat_model_id,
            config.judge_model_id,
            config.device,
        )
        yield

    app = FastAPI(title="framewise-shim", lifespan=lifespan)
    app.state.config = config
    app.state.models = None

    def models_or_none() -> LoadedModels | None:
        return app.state.models

    @app.post("/v1/embeddings")
    async def embeddings(request: Request):
        models = models_or_none()
        if models is None:
            return _error(503, "models are still loading")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "body is not valid JSON")
        if not isinstance(body, dict):
            return _error(400, "body must be a JSON object")
        model_id = body.get("model")
        if model_id is not None and model_id != models.embedder.model_id:
            return _error(404, f"model {model_id!r} is not served here")
        raw_input = body.get("input")
        if isinstance(raw_input, str):
            items = [raw_input]
        elif isinstance(raw_input, list) and all(isinstance(x, str) for x in raw_input):
            items = raw_input
        else:
            return _error(400, "input must be a string or a list of strings")
        if not items:
            return _error(400, "input must not be empty")

        data = []
        for index, item in enumerate(items):
            try:
                if item.startswith("data:"):
                    vector = models.embedder.embed_image(_decode_data_url(item))
                else:
                    vector = models.embedder.embed_text(item)
            except ValueError as exc:
                return _error(400, f"input {index}: {exc}")
            data.append(
                {"object": "embedding", "index": index, "embedding": vector.tolist()}
            )
        return JSONResponse(
            {"object": "list", "model": models.embedder.model_id, "data": data}
        )

    @app.post("/v1/chat/completions")
    async def chat_completions(request: Request):
        models = models_or_none()
        if models is None:
            return _error(503, "models are still loading")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "body is not valid JSON")
        if not isinstance(body, dict):
            return _error(400, "body must be a JSON object")
        serving = models.chat_like(body.get("model"))
        if serving is None:
            return _error(404, "no chat model configured")
        messages = body.get("messages")
        problem = _validate_messages(messages)
        if problem is not None:
            return _error(400, problem)
        text = serving.complete(messages)
        return JSONResponse(
            {
                "id": f"shim-{uuid.uuid4().hex[:12]}",
                "object": "chat.completion",
                "model": serving.model_id,
                "choices": [
                    {
                        "index": 0,
                        "message": {"role": "assistant", "content": text},
                        "finish_reason": "stop",
                    }
                ],
            }
        )

    return app


def _validate_messages(messages) -> str | None:
    if not isinstance(messages, list) or not messages:
        return "messages must be a non-empty list"
    for i, message in enumerate(messages):
        if not isinstance(message, dict) or not isinstance(message.get("role"), str):
            return f"message {i}: role must be a string"
        content = message.get("content")
        if isinstance(content, str):
            continue
        if not isinstance(content, list):
            return f"message {i}: content must be a string or a list of parts"
        for j, part in enumerate(content):
            if not isinstance(part, dict):
                return f"message {i} part {j}: not an object"
            kind = part.get("type")
            if kind == "text":
                if not isinstance(part.get("text"), str):
                    return f"message {i} part {j}: text part without text"
            elif kind == "image_url":
                url = part.get("image_url")
                if not isinstance(url, dict) or not isinstance(url.get("url"), str):
                    return f"message {i} part {j}: image_url part without url"
            else:
                return f"message {i} part {j}: unknown part type {kind!r}"
    return None


def serve(config: ShimConfig) -> None:
    """Load models, then block serving HTTP until interrupted."""
    import uvicorn

    # Fail fast on bad model ids instead of binding a broken port.
    load_models(
        config.embed_model_id, config.chat_model_id, config.judge_model_id, config.device
    )
    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
