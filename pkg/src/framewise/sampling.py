"""The two sampling tools: semantic retrieval over embeddings and uniform spacing.

Semantic sampling embeds a text prompt and a pool of candidate frames into a
shared space, scores candidates by cosine similarity, and returns the top
``n`` frames in temporal order. Uniform sampling is the bin-center rule from
:mod:`framewise.frame_store` applied to the requested interval.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .frame_store import Frame, FrameRangeError, VideoRef, get_frames, uniform_indices

__all__ = [
    "EmbeddingBackend",
    "EmbeddingError",
    "InvalidSegmentError",
    "ScoredFrame",
    "ClipSampleResult",
    "UniformSampleResult",
    "EmbeddingCache",
    "candidate_count",
    "clip_sample",
    "uniform_sample_exec",
]


class EmbeddingError(Exception):
    """The embedding backend returned unusable vectors or failed outright."""


class InvalidSegmentError(Exception):
    """The requested interval cannot supply the requested frame count."""


class EmbeddingBackend(Protocol):
    """Shared text/image embedding space.

    Vectors need not be normalized; the runtime normalizes before scoring.
    """

    @property
    def dim(self) -> int: ...

    def embed_text(self, texts: Sequence[str]) -> np.ndarray: ...

    def embed_images(self, images: Sequence[Frame]) -> np.ndarray: ...


@dataclass(frozen=True)
class ScoredFrame:
    index: int
    score: float


@dataclass(frozen=True)
class ClipSampleResult:
    """Selected frames in ascending index order; ``scored`` aligns with ``frames``."""

    frames: tuple[Frame, ...]
    scored: tuple[ScoredFrame, ...]

    @property
    def indices(self) -> list[int]:
        return [f.index for f in self.frames]


@dataclass(frozen=True)
class UniformSampleResult:
    frames: tuple[Frame, ...]

    @property
    def indices(self) -> list[int]:
        return [f.index for f in self.frames]


def _normalize(vectors: np.ndarray, what: str) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise EmbeddingError(f"{what}: expected a 2-D array, got shape {vectors.shape}")
    if not np.all(np.isfinite(vectors)):
        raise EmbeddingError(f"{what}: embeddings must be finite")
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise EmbeddingError(f"{what}: zero-norm embedding")
    return vectors / norms


class EmbeddingCache:
    """Thread-safe cache of normalized embeddings.

    Frame vectors are keyed by ``(video_id, index)``, text vectors by the
    prompt string. One cache may serve many episodes over the same videos.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._frames: dict[tuple[str, int], np.ndarray] = {}
        self._texts: dict[str, np.ndarray] = {}

    def frame_vectors(
        self, video: VideoRef, indices: list[int], embedder: EmbeddingBackend
    ) -> np.ndarray:
        with self._lock:
            missing = [i for i in indices if (video.id, i) not in self._frames]
        if missing:
            frames = get_frames(video, missing)
            vectors = _normalize(embedder.embed_images(frames), "image embeddings")
            if vectors.shape[0] != len(missing):
                raise EmbeddingError(
                    f"image embeddings: expected {len(missing)} rows, got {vectors.shape[0]}"
                )
            with self._lock:
                for idx, vec in zip(missing, vectors):
                    self._frames[(video.id, idx)] = vec
        with self._lock:
            return np.stack([self._frames[(video.id, i)] for i in indices])

    def text_vector(self, prompt: str, embedder: EmbeddingBackend) -> np.ndarray:
        with self._lock:
            hit = self._texts.get(prompt)
        if hit is not None:
            return hit
        vec = _normalize(embedder.embed_text([prompt]), "text embeddings")[0]
        with self._lock:
            self._texts[prompt] = vec
        return vec


def candidate_count(start: int, end: int) -> int:
    """Size of the candidate pool scored for an interval of length ``end - start``.

    Short intervals are scored exhaustively; longer ones are subsampled to a
    pool of 128, or 256 once the interval reaches 20000 frames.
    """
    length = end - start
    if length < 128:
        return length
    if length < 20000:
        return 128
    return 256


def clip_sample(
    video: VideoRef,
    start: int,
    end: int,
    prompt: str,
    embedder: EmbeddingBackend,
    n: int = 4,
    cache: EmbeddingCache | None = None,
) -> ClipSampleResult:
    """Top-``n`` frames of ``[start, end)`` by cosine similarity to ``prompt``.

    Candidates are the bin centers of the interval (pool size from
    :func:`candidate_count`). Ties break toward the earlier frame; the
    selection is returned in ascending index order. Intervals that cannot
    yield ``n`` distinct frames beyond the pool floor are rejected.
    """
    if not prompt:
        raise ValueError("prompt must be non-empty")
    # Retrieval needs a pool strictly larger than the request.
    if n < 1 or start < 0 or end > video.total_frames or start >= end or end - start <= n:
        raise InvalidSegmentError("Invalid segment")
    pool = uniform_indices(start, end, candidate_count(start, end))
    if cache is None:
        cache = EmbeddingCache()
    frame_vecs = cache.frame_vectors(video, pool, embedder)
    text_vec = cache.text_vector(prompt, embedder)
    scores = frame_vecs @ text_vec
    ranked = sorted(zip(pool, scores), key=lambda pair: (-pair[1], pair[0]))
    chosen = sorted(ranked[: min(n, len(pool))], key=lambda pair: pair[0])
    frames = get_frames(video, [idx for idx, _ in chosen])
    scored = tuple(ScoredFrame(index=idx, score=float(s)) for idx, s in chosen)
    return ClipSampleResult(frames=tuple(frames), scored=scored)


def uniform_sample_exec(
    video: VideoRef, start: int, end: int, n: int = 8
) -> UniformSampleResult:
    """Bin-center uniform frames over ``[start, end)`` within ``video``.

    Intervals narrower than ``n`` return the deduplicated index set rather
    than erroring, so validated tool calls always execute.
    """
    if start < 0 or end > video.total_frames or start >= end:
        raise FrameRangeError(
            f"invalid range [{start}, {end}) for video with {video.total_frames} frames"
        )
    frames = get_frames(video, uniform_indices(start, end, n))
    return UniformSampleResult(frames=tuple(frames))
