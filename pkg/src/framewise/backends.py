"""HTTP clients for chat, embedding, and judge endpoints.

All three speak the OpenAI wire shapes: ``POST {base}/v1/chat/completions``
with multimodal content parts and ``POST {base}/v1/embeddings`` with text or
base64 data-URL inputs. Any transport or response-shape problem surfaces as
:class:`BackendError` so callers never see httpx internals.
"""

from __future__ import annotations

import base64
import re
from typing import Mapping, Sequence

import httpx
import numpy as np

from .frame_store import Frame
from .protocol import PromptMessage

__all__ = [
    "BackendError",
    "OpenAIChatClient",
    "OpenAIEmbeddingClient",
    "RemoteJudge",
    "message_to_openai",
]


class BackendError(Exception):
    """A remote model call failed or returned an unusable response."""


def _normalize_base_url(url: str) -> str:
    url = url.rstrip("/")
    if not url.endswith("/v1"):
        url = url + "/v1"
    return url


def frame_to_data_url(frame: Frame) -> str:
    encoded = base64.b64encode(frame.payload).decode("ascii")
    return f"data:{frame.media_type};base64,{encoded}"


def message_to_openai(message: PromptMessage) -> dict:
    """Render one message as OpenAI content parts.

    User text splits on its ``<image>`` placeholders and image parts are
    interleaved at the placeholder positions. Non-user messages go as plain
    strings so echoed model output is never reinterpreted.
    """
    if message.role != "user":
        return {"role": message.role, "content": message.text}
    chunks = message.text.split("<image>")
    parts: list[dict] = []
    for position, chunk in enumerate(chunks):
        if chunk:
            parts.append({"type": "text", "text": chunk})
        if position < len(message.images):
            parts.append(
                {
                    "type": "image_url",
                    "image_url": {"url": frame_to_data_url(message.images[position])},
                }
            )
    return {"role": message.role, "content": parts}


class _HttpBase:
    def __init__(self, base_url: str, api_key: str | None = None, timeout: float = 120.0) -> None:
        self.base_url = _normalize_base_url(base_url)
        headers = {}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(timeout=timeout, headers=headers)

    def _post(self, path: str, payload: dict) -> dict:
        url = f"{self.base_url}{path}"
        try:
            response = self._client.post(url, json=payload)
        except httpx.HTTPError as exc:
            raise BackendError(f"POST {url} failed: {exc}") from exc
        if response.status_code != 200:
            snippet = response.text[:300]
            raise BackendError(f"POST {url} returned {response.status_code}: {snippet}")
        try:
            return response.json()
        except ValueError as exc:
            raise BackendError(f"POST {url} returned non-JSON body") from exc

    def close(self) -> None:
        self._client.close()


class OpenAIChatClient(_HttpBase):
    """Chat-completions client satisfying the orchestrator's backend contract."""

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        model: str = "default",
        timeout: float = 120.0,
    ) -> None:
        super().__init__(base_url, api_key, timeout)
        self.model = model

    def complete(self, system: str, messages: Sequence[PromptMessage]) -> str:
        wire = [{"role": "system", "content": system}]
        wire.extend(message_to_openai(m) for m in messages)
        data = self._post("/chat/completions", {"model": self.model, "messages": wire})
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed chat response: {data!r:.300}") from exc
        if not isinstance(content, str):
            raise BackendError("chat response content is not text")
        return content


class OpenAIEmbeddingClient(_HttpBase):
    """Embeddings client; texts go as strings, frames as base64 data-URLs."""

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        model: str = "default",
        timeout: float = 120.0,
    ) -> None:
        super().__init__(base_url, api_key, timeout)
        self.model = model
        self._dim: int | None = None

    @property
    def dim(self) -> int:
        if self._dim is None:
            self.embed_text(["dimension probe"])
        assert self._dim is not None
        return self._dim

    def _embed(self, inputs: list[str]) -> np.ndarray:
        data = self._post("/embeddings", {"model": self.model, "input": inputs})
        try:
            rows = sorted(data["data"], key=lambda item: item["index"])
            vectors = [row["embedding"] for row in rows]
        except (KeyError, TypeError) as exc:
            raise BackendError(f"malformed embeddings response: {data!r:.300}") from exc
        if len(vectors) != len(inputs):
            raise BackendError(f"expected {len(inputs)} embeddings, got {len(vectors)}")
        try:
            matrix = np.asarray(vectors, dtype=np.float64)
        except ValueError as exc:
            raise BackendError(f"embeddings are not rectangular numeric arrays: {exc}") from exc
        if matrix.ndim != 2:
            raise BackendError(f"embeddings have shape {matrix.shape}, expected 2-D")
        if self._dim is None:
            self._dim = int(matrix.shape[1])
        elif matrix.shape[1] != self._dim:
            raise BackendError(
                f"embedding dimensionality drifted: {matrix.shape[1]} != {self._dim}"
            )
        return matrix

    def embed_text(self, texts: Sequence[str]) -> np.ndarray:
        return self._embed(list(texts))

    def embed_images(self, images: Sequence[Frame]) -> np.ndarray:
        return self._embed([frame_to_data_url(frame) for frame in images])


_SCORE_RE = re.compile(r"[01](?:\.\d+)?|\.\d+")


class RemoteJudge:
    """LLM-as-judge over a chat backend, using the committed grading templates."""

    SYSTEM = "You are a strict grader. Reply with only the requested value."

    def __init__(self, chat: OpenAIChatClient) -> None:
        self.chat = chat

    def _ask(self, prompt: str) -> str:
        message = PromptMessage(role="user", text=prompt, images=())
        return self.chat.complete(self.SYSTEM, [message])

    def judge_mc(
        self, question: str, options: Mapping[str, str], gold: str, answer: str
    ) -> int:
        from .reward import JUDGE_MC_TEMPLATE, render_options

        reply = self._ask(
            JUDGE_MC_TEMPLATE.format(
                question=question, options=render_options(options), gold=gold, answer=answer
            )
        )
        stripped = reply.strip()
        if stripped.startswith("1"):
            return 1
        if stripped.startswith("0"):
            return 0
        raise BackendError(f"judge returned unparseable verdict: {reply!r:.100}")

    def judge_oe(self, question: str, gold: str, answer: str) -> float:
        from .reward import JUDGE_OE_TEMPLATE

        reply = self._ask(
            JUDGE_OE_TEMPLATE.format(question=question, gold=gold, answer=answer)
        )
        match = _SCORE_RE.search(reply)
        if match is None:
            raise BackendError(f"judge returned unparseable score: {reply!r:.100}")
        score = float(match.group(0))
        return min(1.0, max(0.0, score))
