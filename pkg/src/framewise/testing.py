"""Deterministic test doubles: hermetic backends, synthetic videos, turn builders.

Everything here is seeded or scripted so suites using it are reproducible
without network access or model weights.
"""

from __future__ import annotations

import hashlib
import json
import threading
from typing import Callable, Mapping, Sequence

import numpy as np

from .backends import BackendError
from .frame_store import Frame, VideoRef, open_video, register_decoder
from .protocol import PromptMessage

__all__ = [
    "HashEmbedder",
    "ConstantEmbedder",
    "ScriptedChatBackend",
    "CallableChatBackend",
    "ConstantJudge",
    "synthetic_video",
    "make_turn",
]


def _seed_from(payload: bytes) -> int:
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


class HashEmbedder:
    """Deterministic pseudo-embeddings seeded from input bytes.

    Unrelated inputs get near-orthogonal vectors, identical inputs identical
    vectors, which is all ranking tests need.
    """

    def __init__(self, dim: int = 64) -> None:
        self._dim = dim

    @property
    def dim(self) -> int:
        return self._dim

    def _vector(self, payload: bytes) -> np.ndarray:
        rng = np.random.default_rng(_seed_from(payload))
        return rng.standard_normal(self._dim)

    def embed_text(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self._vector(b"text:" + t.encode("utf-8")) for t in texts])

    def embed_images(self, images: Sequence[Frame]) -> np.ndarray:
        return np.stack([self._vector(b"image:" + f.payload) for f in images])


class ConstantEmbedder:
    """All inputs embed to the same vector; every score ties."""

    def __init__(self, dim: int = 8) -> None:
        self._dim = dim

    @property
    def dim(self) -> int:
        return self._dim

    def embed_text(self, texts: Sequence[str]) -> np.ndarray:
        return np.ones((len(texts), self._dim))

    def embed_images(self, images: Sequence[Frame]) -> np.ndarray:
        return np.ones((len(images), self._dim))


class ScriptedChatBackend:
    """Replays a fixed list of turn texts; raises once the script runs out."""

    def __init__(self, outputs: Sequence[str]) -> None:
        self._outputs = list(outputs)
        self._cursor = 0
        self.calls: list[tuple[str, tuple[PromptMessage, ...]]] = []
        self._lock = threading.Lock()

    def complete(self, system: str, messages: Sequence[PromptMessage]) -> str:
        with self._lock:
            self.calls.append((system, tuple(messages)))
            if self._cursor >= len(self._outputs):
                raise BackendError("scripted backend exhausted")
            output = self._outputs[self._cursor]
            self._cursor += 1
            return output


class CallableChatBackend:
    """Delegates each turn to a function of (system, messages)."""

    def __init__(self, fn: Callable[[str, Sequence[PromptMessage]], str]) -> None:
        self._fn = fn

    def complete(self, system: str, messages: Sequence[PromptMessage]) -> str:
        return self._fn(system, messages)


class ConstantJudge:
    """Judge stub returning fixed scores."""

    def __init__(self, mc: int = 1, oe: float = 1.0) -> None:
        self._mc = mc
        self._oe = oe

    def judge_mc(
        self, question: str, options: Mapping[str, str], gold: str, answer: str
    ) -> int:
        return self._mc

    def judge_oe(self, question: str, gold: str, answer: str) -> float:
        return self._oe


class _SyntheticDecoder:
    """Locator form: synthetic://{name}:{total_frames}:{fps}."""

    def _parse(self, rest: str) -> tuple[str, int, float]:
        name, total, fps = rest.rsplit(":", 2)
        return name, int(total), float(fps)

    def probe(self, rest: str) -> tuple[int, float]:
        _, total, fps = self._parse(rest)
        return total, fps

    def read(self, rest: str, index: int) -> tuple[bytes, str]:
        name, _, _ = self._parse(rest)
        return f"frame:{name}:{index}".encode("utf-8"), "application/octet-stream"


register_decoder("synthetic", _SyntheticDecoder())


def synthetic_video(total_frames: int, fps: float = 1.0, name: str = "vid") -> VideoRef:
    """An in-memory video whose frame payloads encode their own indices."""
    return open_video(f"synthetic://{name}:{total_frames}:{fps}")


def make_turn(
    thinking: str = "considering the frames",
    *,
    answer: str | None = None,
    uniform: tuple[int, int] | None = None,
    clip: tuple[int, int, str] | None = None,
    trailing: str = "",
) -> str:
    """Raw turn text for scripted backends; exactly one action must be given."""
    actions = [value for value in (answer, uniform, clip) if value is not None]
    if len(actions) != 1:
        raise ValueError("provide exactly one of answer, uniform, clip")
    if answer is not None:
        action = f"<answer>{answer}</answer>"
    elif uniform is not None:
        payload = {
            "name": "uniform_sample",
            "arguments": {"start_frame": uniform[0], "end_frame": uniform[1]},
        }
        action = f"<tool_call>{json.dumps(payload)}</tool_call>"
    else:
        assert clip is not None
        payload = {
            "name": "clip_sample",
            "arguments": {
                "start_frame": clip[0],
                "end_frame": clip[1],
                "prompt": clip[2],
            },
        }
        action = f"<tool_call>{json.dumps(payload)}</tool_call>"
    return f"<thinking>{thinking}</thinking>{action}{trailing}"
