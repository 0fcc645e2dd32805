"""Indexed access to video frames from image directories or decoder adapters.

A video is addressed by a locator: either a path to a directory of extracted
frames with a ``meta.json`` sidecar, or a ``scheme://rest`` string naming a
registered decoder adapter. After ``open_video`` the handle is read-only and
safe to share across threads.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

__all__ = [
    "Frame",
    "VideoRef",
    "FrameStoreError",
    "VideoOpenError",
    "FrameRangeError",
    "DecoderAdapter",
    "register_decoder",
    "open_video",
    "get_frames",
    "uniform_indices",
]

IMAGE_EXTENSIONS = {".jpg": "image/jpeg", ".jpeg": "image/jpeg", ".png": "image/png"}


class FrameStoreError(Exception):
    """Base error for frame access problems."""


class VideoOpenError(FrameStoreError):
    """The locator could not be resolved into a readable frame sequence."""


class FrameRangeError(FrameStoreError):
    """A requested frame index or interval is outside the video."""


@dataclass(frozen=True)
class Frame:
    """One frame payload; ``index`` is unique within its video."""

    index: int
    payload: bytes
    media_type: str


class FrameReader(Protocol):
    def read(self, index: int) -> tuple[bytes, str]: ...


@dataclass(frozen=True)
class VideoRef:
    """Handle to an indexed frame sequence.

    ``total_frames`` and ``fps`` come from the sidecar metadata (directory
    sources) or the adapter probe. Every index in ``[0, total_frames)``
    resolves to exactly one frame.
    """

    id: str
    total_frames: int
    fps: float
    source: str
    reader: FrameReader = field(repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.total_frames < 1:
            raise VideoOpenError(f"{self.source}: zero frames")
        if not self.fps > 0:
            raise VideoOpenError(f"{self.source}: fps must be > 0, got {self.fps}")


class DecoderAdapter(Protocol):
    """Plugin contract for non-directory video sources.

    ``probe`` returns ``(total_frames, fps)`` for the locator remainder (the
    part after ``scheme://``); ``read`` returns ``(payload, media_type)``.
    """

    def probe(self, rest: str) -> tuple[int, float]: ...

    def read(self, rest: str, index: int) -> tuple[bytes, str]: ...


_DECODERS: dict[str, DecoderAdapter] = {}
_DECODERS_LOCK = threading.Lock()


def register_decoder(scheme: str, adapter: DecoderAdapter) -> None:
    """Register ``adapter`` for ``scheme://...`` locators, replacing any prior one."""
    with _DECODERS_LOCK:
        _DECODERS[scheme] = adapter


@dataclass(frozen=True)
class _DirectoryReader:
    paths: tuple[Path, ...]

    def read(self, index: int) -> tuple[bytes, str]:
        path = self.paths[index]
        return path.read_bytes(), IMAGE_EXTENSIONS[path.suffix.lower()]


@dataclass(frozen=True)
class _AdapterReader:
    adapter: DecoderAdapter
    rest: str

    def read(self, index: int) -> tuple[bytes, str]:
        return self.adapter.read(self.rest, index)


def _load_meta(meta_path: Path, source: str) -> tuple[int, float]:
    if not meta_path.is_file():
        raise VideoOpenError(f"{source}: missing metadata sidecar {meta_path.name}")
    try:
        meta = json.loads(meta_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise VideoOpenError(f"{source}: unreadable metadata: {exc}") from exc
    total = meta.get("total_frames")
    fps = meta.get("fps")
    if not isinstance(total, int) or isinstance(total, bool):
        raise VideoOpenError(f"{source}: metadata total_frames must be an integer")
    if not isinstance(fps, (int, float)) or isinstance(fps, bool) or not fps > 0:
        raise VideoOpenError(f"{source}: metadata fps must be a positive number")
    return total, float(fps)


def _open_directory(root: Path, source: str) -> VideoRef:
    if not root.is_dir():
        raise VideoOpenError(f"{source}: not a readable directory")
    # Layout: <root>/frames/%08d.jpg with <root>/meta.json beside the frame
    # directory; a flat directory with meta.json inside is accepted too.
    frame_dir = root / "frames"
    if frame_dir.is_dir():
        meta_path = root / "meta.json"
        if not meta_path.is_file() and (frame_dir / "meta.json").is_file():
            meta_path = frame_dir / "meta.json"
    else:
        frame_dir = root
        meta_path = root / "meta.json"

    total, fps = _load_meta(meta_path, source)

    by_index: dict[int, Path] = {}
    for path in frame_dir.iterdir():
        if path.suffix.lower() not in IMAGE_EXTENSIONS:
            continue
        if not re.fullmatch(r"\d+", path.stem):
            continue
        idx = int(path.stem)
        if idx in by_index:
            raise VideoOpenError(f"{source}: duplicate frame index {idx}")
        by_index[idx] = path
    if not by_index:
        raise VideoOpenError(f"{source}: zero frames")
    missing = [i for i in range(len(by_index)) if i not in by_index]
    if missing:
        raise VideoOpenError(
            f"{source}: non-contiguous frame indices (missing {missing[:5]}"
            f"{'...' if len(missing) > 5 else ''})"
        )
    if total != len(by_index):
        raise VideoOpenError(
            f"{source}: metadata total_frames={total} but found {len(by_index)} frames"
        )
    paths = tuple(by_index[i] for i in range(total))
    return VideoRef(
        id=root.name,
        total_frames=total,
        fps=fps,
        source=source,
        reader=_DirectoryReader(paths),
    )


def open_video(source: str | Path) -> VideoRef:
    """Resolve a locator into a :class:`VideoRef`.

    Directory locators must hold frames named by zero-padded index plus a
    ``meta.json`` sidecar with ``total_frames`` and ``fps``. Locators of the
    form ``scheme://rest`` dispatch to the decoder adapter registered for
    ``scheme``.
    """
    locator = str(source)
    if isinstance(source, str) and "://" in source:
        scheme, rest = source.split("://", 1)
        with _DECODERS_LOCK:
            adapter = _DECODERS.get(scheme)
        if adapter is None:
            raise VideoOpenError(f"{locator}: no decoder registered for scheme '{scheme}'")
        total, fps = adapter.probe(rest)
        return VideoRef(
            id=f"{scheme}://{rest}",
            total_frames=total,
            fps=fps,
            source=locator,
            reader=_AdapterReader(adapter, rest),
        )
    return _open_directory(Path(source), locator)


def get_frames(video: VideoRef, indices: list[int]) -> list[Frame]:
    """Fetch frames in the order requested; repeated indices repeat frames."""
    for idx in indices:
        if not 0 <= idx < video.total_frames:
            raise FrameRangeError(
                f"frame index {idx} out of range [0, {video.total_frames}) for {video.id}"
            )
    out = []
    for idx in indices:
        payload, media_type = video.reader.read(idx)
        out.append(Frame(index=idx, payload=payload, media_type=media_type))
    return out


def uniform_indices(start: int, end: int, n: int) -> list[int]:
    """Evenly spaced frame indices over ``[start, end)`` by bin centers.

    The i-th index is ``floor(start + (i + 0.5) * (end - start) / n)``,
    computed in exact integer arithmetic, with order-preserving
    deduplication. When ``end - start >= n`` the result is exactly ``n``
    strictly increasing indices.
    """
    if n < 1:
        raise FrameRangeError(f"frame count must be >= 1, got {n}")
    if start < 0 or start >= end:
        raise FrameRangeError(f"invalid interval [{start}, {end}): need 0 <= start < end")
    width = end - start
    out: list[int] = []
    for i in range(n):
        idx = start + ((2 * i + 1) * width) // (2 * n)
        if not out or idx != out[-1]:
            out.append(idx)
    return out
