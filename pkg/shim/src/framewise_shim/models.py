"""The served models.

This build ships deterministic in-process models under the ``builtin/``
namespace so the full serving path works on machines with no weights
and no way to download any. Checkpoint-backed models would slot in
behind the same three call surfaces.

The builtin judge's grading rule is a naive lexical containment check
and is explicitly non-normative; real deployments should configure a
model-backed judge.
"""

from __future__ import annotations

import hashlib
import io
import re
from dataclasses import dataclass

import numpy as np
from PIL import Image

EMBED_DIM = 64

# Word anchors for the first three embedding dimensions. Images put
# their mean RGB there, so color words and color content line up.
_COLOR_ANCHORS: dict[str, tuple[float, float, float]] = {
    "red": (1.0, 0.0, 0.0),
    "green": (0.0, 1.0, 0.0),
    "blue": (0.0, 0.0, 1.0),
    "white": (1.0, 1.0, 1.0),
    "black": (0.0, 0.0, 0.0),
    "yellow": (1.0, 1.0, 0.0),
    "orange": (1.0, 0.5, 0.0),
    "purple": (0.5, 0.0, 0.5),
    "pink": (1.0, 0.5, 0.7),
    "brown": (0.6, 0.3, 0.1),
    "gray": (0.5, 0.5, 0.5),
    "grey": (0.5, 0.5, 0.5),
}

_WORD_RE = re.compile(r"[a-z]+")


class ModelLoadError(Exception):
    """A configured model id cannot be resolved."""


class PaletteEmbedder:
    """Deterministic joint text/image embedder.

    Dimensions 0..2 hold color mass (word anchors for text, mean RGB
    for images); the rest hold hashed word buckets for text and a
    coarse luminance histogram for images. Vectors are unit length.
    """

    def __init__(self, model_id: str) -> None:
        self.model_id = model_id
        self.dim = EMBED_DIM

    def embed_text(self, text: str) -> np.ndarray:
        vec = np.zeros(EMBED_DIM, dtype=np.float64)
        words = _WORD_RE.findall(text.lower())
        anchors = [_COLOR_ANCHORS[w] for w in words if w in _COLOR_ANCHORS]
        if anchors:
            vec[:3] = np.mean(np.asarray(anchors, dtype=np.float64), axis=0)
        for word in words:
            digest = hashlib.sha256(word.encode("utf-8")).digest()
            bucket = 3 + digest[0] % (EMBED_DIM - 3)
            sign = 1.0 if digest[1] % 2 == 0 else -1.0
            vec[bucket] += 0.3 * sign
        return _normalized(vec)

    def embed_image(self, payload: bytes) -> np.ndarray:
        try:
            image = Image.open(io.BytesIO(payload))
            image = image.convert("RGB")
        except Exception as exc:
            raise ValueError(f"undecodable image payload: {exc}") from exc
        arr = np.asarray(image.resize((8, 8)), dtype=np.float64) / 255.0
        vec = np.zeros(EMBED_DIM, dtype=np.float64)
        vec[:3] = arr.reshape(-1, 3).mean(axis=0)
        luminance = arr.mean(axis=2).reshape(-1)
        hist, _ = np.histogram(luminance, bins=EMBED_DIM - 3, range=(0.0, 1.0))
        vec[3:] = 0.05 * hist / luminance.size
        return _normalized(vec)


def _normalized(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        # Nothing recognizable; a fixed unit vector keeps the contract.
        out = np.zeros_like(vec)
        out[3] = 1.0
        return out
    return vec / norm


class CaptionChatModel:
    """Describes what arrived instead of understanding it. Deterministic."""

    def __init__(self, model_id: str) -> None:
        self.model_id = model_id

    def complete(self, messages: list[dict]) -> str:
        images = 0
        chars = 0
        for message in messages:
            content = message.get("content", "")
            if isinstance(content, str):
                chars += len(content)
                continue
            for part in content:
                if part.get("type") == "image_url":
                    images += 1
                else:
                    chars += len(part.get("text", ""))
        return (
            f"Received {len(messages)} messages with {images} images "
            f"and {chars} characters of text."
        )


class LexicalJudgeModel:
    """Containment-based grading stand-in. Non-normative by design."""

    def __init__(self, model_id: str) -> None:
        self.model_id = model_id

    def complete(self, messages: list[dict]) -> str:
        text = "\n".join(
            m["content"] for m in messages if isinstance(m.get("content"), str)
        )
        for part_holder in messages:
            content = part_holder.get("content")
            if isinstance(content, list):
                text += "\n" + "\n".join(
                    p.get("text", "") for p in content if p.get("type") == "text"
                )
        answer = _after_label(text, "Model answer:")
        gold = _after_label(text, "Correct option:")
        if gold is not None:
            return "1" if answer is not None and gold.lower() in answer.lower() else "0"
        reference = _after_label(text, "Reference answer:")
        if reference is not None:
            hit = answer is not None and reference.lower() in answer.lower()
            return "1.0" if hit else "0.0"
        return "0"


def _after_label(text: str, label: str) -> str | None:
    idx = text.find(label)
    if idx < 0:
        return None
    line = text[idx + len(label) :].split("\n", 1)[0].strip()
    return line or None


@dataclass(frozen=True)
class LoadedModels:
    embedder: PaletteEmbedder
    chat: CaptionChatModel | None
    judge: LexicalJudgeModel | None

    def chat_like(self, model_id: str | None):
        """Resolve a chat-completions request to the serving model."""
        if self.judge is not None and model_id == self.judge.model_id:
            return self.judge
        if self.chat is not None and (model_id is None or model_id == self.chat.model_id):
            return self.chat
        if self.judge is not None and model_id is None:
            return self.judge
        return None


def load_models(
    embed_model_id: str,
    chat_model_id: str | None = None,
    judge_model_id: str | None = None,
    device: str = "cpu",
) -> LoadedModels:
    """Resolve configured ids; builtin models ignore ``device``."""
    if not embed_model_id.startswith("builtin/"):
        raise ModelLoadError(
            f"unknown embed model {embed_model_id!r}: this build serves builtin/* models only"
        )
    chat = None
    if chat_model_id is not None:
        if not chat_model_id.startswith("builtin/"):
            raise ModelLoadError(
                f"unknown chat model {chat_model_id!r}: this build serves builtin/* models only"
            )
        chat = CaptionChatModel(chat_model_id)
    judge = None
    if judge_model_id is not None:
        if not judge_model_id.startswith("builtin/"):
            raise ModelLoadError(
                f"unknown judge model {judge_model_id!r}: this build serves builtin/* models only"
            )
        judge = LexicalJudgeModel(judge_model_id)
    return LoadedModels(embedder=PaletteEmbedder(embed_model_id), chat=chat, judge=judge)
