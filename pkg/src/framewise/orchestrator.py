"""The iterative episode loop: initial frames, tool rounds, answer, persistence.

An episode starts from evenly spaced initial frames, then alternates model
turns with tool executions until the model answers, rounds run out, or a
backend fails. Execution is lenient where the reward gate is strict:
duplicate or invalid tool calls produce recoverable tool-error turns here and
are only punished at scoring time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Literal, Protocol, Sequence

from .backends import BackendError
from .frame_store import (
    Frame,
    FrameRangeError,
    VideoRef,
    get_frames,
    uniform_indices,
)
from .protocol import (
    TOOL_CLIP,
    TOOL_UNIFORM,
    Answer,
    FORMAT_BLOCK,
    ParsedTurn,
    PromptMessage,
    ToolCall,
    TurnParseError,
    build_initial_prompt,
    build_system_prompt,
    build_turn_prompt,
    is_duplicate_call,
    parse_turn,
)
from .sampling import (
    EmbeddingBackend,
    EmbeddingCache,
    EmbeddingError,
    InvalidSegmentError,
    clip_sample,
    uniform_sample_exec,
)

if TYPE_CHECKING:
    from .evalkit import QAItem

__all__ = [
    "OrchestratorConfig",
    "ChatBackend",
    "ToolResult",
    "TurnRecord",
    "Trajectory",
    "ReplayError",
    "run_episode",
    "replay_episode",
    "trajectory_to_json",
    "append_trajectory",
    "read_trajectories",
]

Terminal = Literal["answered", "exhausted_rounds", "parse_failed", "backend_failed"]

RETRY_TEXT = "Your last reply was not in the required format.\n\n" + FORMAT_BLOCK
FORCED_TEXT = (
    "No further tool calls are available. Answer the question now from the "
    "frames you have already seen, as:\n"
    "<thinking>...</thinking><answer>...</answer>"
)


class ChatBackend(Protocol):
    """Multimodal chat model: system text plus user messages in, turn text out."""

    def complete(self, system: str, messages: Sequence[PromptMessage]) -> str: ...


@dataclass(frozen=True)
class OrchestratorConfig:
    """Episode shape knobs; defaults mirror the reference runtime."""

    n_initial: int = 16
    max_rounds: int = 5
    clip_n: int = 4
    uniform_n: int = 8
    frame_budget: int | None = None

    def __post_init__(self) -> None:
        if self.n_initial < 1:
            raise ValueError("n_initial must be >= 1")
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be >= 0")
        if self.clip_n < 1 or self.uniform_n < 1:
            raise ValueError("clip_n and uniform_n must be >= 1")
        if self.frame_budget is not None and self.frame_budget < self.n_initial:
            raise ValueError("frame_budget must be >= n_initial when set")

    def to_dict(self) -> dict:
        return {
            "n_initial": self.n_initial,
            "max_rounds": self.max_rounds,
            "clip_n": self.clip_n,
            "uniform_n": self.uniform_n,
            "frame_budget": self.frame_budget,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OrchestratorConfig":
        return cls(**{k: data[k] for k in cls().to_dict() if k in data})


@dataclass(frozen=True)
class ToolResult:
    """Outcome of one tool-call turn; only executed calls deliver frames."""

    status: Literal["executed", "rejected_duplicate", "rejected_budget", "error"]
    indices: tuple[int, ...] = ()
    scores: tuple[float, ...] | None = None
    message: str = ""


@dataclass(frozen=True)
class TurnRecord:
    raw_output: str
    parsed: ParsedTurn | None = field(compare=False, default=None)
    parse_error: str | None = None
    tool_result: ToolResult | None = None


@dataclass(frozen=True)
class Trajectory:
    """Complete episode record; serializes to one JSON line."""

    item_id: str
    video_id: str
    total_frames: int
    fps: float
    config: OrchestratorConfig
    initial_indices: tuple[int, ...]
    turns: tuple[TurnRecord, ...]
    final_answer: str | None
    terminal: Terminal
    frames_delivered: int

    @property
    def raw_outputs(self) -> tuple[str, ...]:
        return tuple(turn.raw_output for turn in self.turns)

    @property
    def executed_calls(self) -> tuple[ToolCall, ...]:
        calls = []
        for turn in self.turns:
            if turn.tool_result is not None and turn.tool_result.status == "executed":
                assert isinstance(turn.parsed.action, ToolCall)
                calls.append(turn.parsed.action)
        return tuple(calls)

    @property
    def used_agent(self) -> bool:
        return len(self.executed_calls) >= 1

    def to_record(self) -> dict:
        turns = []
        for turn in self.turns:
            result = None
            if turn.tool_result is not None:
                result = {
                    "status": turn.tool_result.status,
                    "indices": list(turn.tool_result.indices),
                    "scores": None
                    if turn.tool_result.scores is None
                    else list(turn.tool_result.scores),
                    "message": turn.tool_result.message,
                }
            turns.append(
                {
                    "raw_output": turn.raw_output,
                    "parse_error": turn.parse_error,
                    "tool_result": result,
                }
            )
        return {
            "item_id": self.item_id,
            "video": {"id": self.video_id, "total_frames": self.total_frames, "fps": self.fps},
            "config": self.config.to_dict(),
            "initial_indices": list(self.initial_indices),
            "turns": turns,
            "final_answer": self.final_answer,
            "terminal": self.terminal,
            "frames_delivered": self.frames_delivered,
        }


def trajectory_to_json(trajectory: Trajectory) -> str:
    # Canonical encoding so replay equality can be byte equality.
    return json.dumps(trajectory.to_record(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class ReplayError(Exception):
    """A persisted trajectory record is corrupt or inconsistent with the log."""


def _prospective_frame_count(call: ToolCall, config: OrchestratorConfig) -> int:
    if call.name == TOOL_UNIFORM:
        return len(uniform_indices(call.start_frame, call.end_frame, config.uniform_n))
    return config.clip_n


class _ToolExecutor:
    def __init__(
        self,
        video: VideoRef,
        config: OrchestratorConfig,
        embedder: EmbeddingBackend | None,
        cache: EmbeddingCache,
    ) -> None:
        self.video = video
        self.config = config
        self.embedder = embedder
        self.cache = cache

    def check(self, call: ToolCall, executed: list[ToolCall], frames_delivered: int) -> ToolResult | None:
        """Pre-execution gate; returns the rejection, or None when runnable."""
        if is_duplicate_call(call, executed):
            return ToolResult(status="rejected_duplicate", message="duplicate call")
        if call.name == TOOL_CLIP:
            if (
                call.start_frame < 0
                or call.end_frame > self.video.total_frames
                or call.end_frame - call.start_frame <= self.config.clip_n
            ):
                return ToolResult(status="error", message="Invalid segment")
            if self.embedder is None:
                return ToolResult(status="error", message="no embedding backend configured")
        else:
            if call.start_frame < 0 or call.end_frame > self.video.total_frames:
                return ToolResult(
                    status="error",
                    message=f"range [{call.start_frame}, {call.end_frame}) outside video "
                    f"with {self.video.total_frames} frames",
                )
        if self.config.frame_budget is not None:
            prospective = frames_delivered + _prospective_frame_count(call, self.config)
            if prospective > self.config.frame_budget:
                return ToolResult(status="rejected_budget", message="frame budget exceeded")
        return None

    def execute(self, call: ToolCall) -> tuple[ToolResult, list[Frame]]:
        if call.name == TOOL_UNIFORM:
            result = uniform_sample_exec(
                self.video, call.start_frame, call.end_frame, self.config.uniform_n
            )
            return (
                ToolResult(status="executed", indices=tuple(result.indices)),
                list(result.frames),
            )
        assert self.embedder is not None and call.prompt is not None
        clip = clip_sample(
            self.video,
            call.start_frame,
            call.end_frame,
            call.prompt,
            self.embedder,
            n=self.config.clip_n,
            cache=self.cache,
        )
        scores = tuple(s.score for s in clip.scored)
        return (
            ToolResult(status="executed", indices=tuple(clip.indices), scores=scores),
            list(clip.frames),
        )


def _tool_error_message(message: str) -> PromptMessage:
    text = f"Tool error: {message}\n\n{build_turn_prompt([]).text}"
    return PromptMessage(role="user", text=text, images=())


def _with_suffix(message: PromptMessage, suffix: str) -> PromptMessage:
    return PromptMessage(
        role=message.role, text=f"{message.text}\n\n{suffix}", images=message.images
    )


def run_episode(
    item: "QAItem",
    video: VideoRef,
    backend: ChatBackend,
    embedder: EmbeddingBackend | None = None,
    config: OrchestratorConfig = OrchestratorConfig(),
    cache: EmbeddingCache | None = None,
) -> Trajectory:
    """Run one question to completion against ``backend``.

    The loop makes at most ``max_rounds + 2`` model calls: one per tool
    round, one answer opportunity after rounds are exhausted, and one retry
    after a malformed turn. Every tool-call turn consumes a round whether or
    not it executes.
    """
    initial_indices = tuple(uniform_indices(0, video.total_frames, config.n_initial))
    initial_frames = get_frames(video, list(initial_indices))
    executor = _ToolExecutor(video, config, embedder, cache or EmbeddingCache())

    system = build_system_prompt()
    first = build_initial_prompt(item.question, video.total_frames, video.fps, initial_frames)
    forced = config.max_rounds == 0
    if forced:
        first = _with_suffix(first, FORCED_TEXT)
    messages: list[PromptMessage] = [first]

    turns: list[TurnRecord] = []
    executed: list[ToolCall] = []
    frames_delivered = len(initial_indices)
    final_answer: str | None = None
    terminal: Terminal | None = None
    rounds_used = 0
    retried = False

    for _ in range(config.max_rounds + 2):
        try:
            raw = backend.complete(system, messages)
        except BackendError:
            terminal = "backend_failed"
            break
        # Keep the model's own turn in context for the next call.
        messages.append(PromptMessage(role="assistant", text=raw, images=()))

        try:
            parsed = parse_turn(raw)
        except TurnParseError as exc:
            turns.append(TurnRecord(raw_output=raw, parse_error=exc.reason))
            if retried:
                terminal = "parse_failed"
                break
            retried = True
            messages.append(PromptMessage(role="user", text=RETRY_TEXT, images=()))
            continue

        if isinstance(parsed.action, Answer):
            turns.append(TurnRecord(raw_output=raw, parsed=parsed))
            final_answer = parsed.action.text
            terminal = "answered"
            break

        call = parsed.action
        if forced:
            result = ToolResult(status="error", message="tool calls exhausted")
            turns.append(TurnRecord(raw_output=raw, parsed=parsed, tool_result=result))
            terminal = "exhausted_rounds"
            break

        rounds_used += 1
        result = executor.check(call, executed, frames_delivered)
        frames: list[Frame] = []
        if result is None:
            try:
                result, frames = executor.execute(call)
            except (EmbeddingError, BackendError):
                terminal = "backend_failed"
                turns.append(
                    TurnRecord(
                        raw_output=raw,
                        parsed=parsed,
                        tool_result=ToolResult(status="error", message="embedding backend failed"),
                    )
                )
                break
            except (FrameRangeError, InvalidSegmentError) as exc:
                result = ToolResult(status="error", message=str(exc))
        turns.append(TurnRecord(raw_output=raw, parsed=parsed, tool_result=result))

        if result.status == "executed":
            executed.append(call)
            frames_delivered += len(result.indices)
            reply = build_turn_prompt(frames)
        else:
            reply = _tool_error_message(result.message)
        if rounds_used >= config.max_rounds:
            forced = True
            reply = _with_suffix(reply, FORCED_TEXT)
        messages.append(reply)
    else:
        # Loop bound exhausted without a terminal: only reachable when the
        # model kept emitting tool calls; classify as exhausted_rounds.
        terminal = "exhausted_rounds"

    if terminal is None:
        terminal = "exhausted_rounds"

    return Trajectory(
        item_id=item.id,
        video_id=video.id,
        total_frames=video.total_frames,
        fps=video.fps,
        config=config,
        initial_indices=initial_indices,
        turns=tuple(turns),
        final_answer=final_answer,
        terminal=terminal,
        frames_delivered=frames_delivered,
    )


def _require(record: dict, key: str) -> object:
    if key not in record:
        raise ReplayError(f"record missing key {key!r}")
    return record[key]


def replay_episode(record: dict) -> Trajectory:
    """Rebuild a Trajectory from its persisted record, re-deriving everything
    derivable and failing on any inconsistency with the log."""
    if not isinstance(record, dict):
        raise ReplayError("record must be a JSON object")
    item_id = _require(record, "item_id")
    video_info = _require(record, "video")
    config_data = _require(record, "config")
    raw_turns = _require(record, "turns")
    terminal = _require(record, "terminal")
    final_answer = _require(record, "final_answer")
    stored_frames = _require(record, "frames_delivered")
    stored_initial = _require(record, "initial_indices")
    try:
        total_frames = int(video_info["total_frames"])
        fps = float(video_info["fps"])
        video_id = str(video_info["id"])
        config = OrchestratorConfig.from_dict(config_data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ReplayError(f"corrupt record header: {exc}") from exc
    if terminal not in ("answered", "exhausted_rounds", "parse_failed", "backend_failed"):
        raise ReplayError(f"unknown terminal {terminal!r}")

    initial_indices = tuple(uniform_indices(0, total_frames, config.n_initial))
    if list(initial_indices) != list(stored_initial):
        raise ReplayError("initial indices do not replay to the stored values")

    turns: list[TurnRecord] = []
    executed: list[ToolCall] = []
    frames_delivered = len(initial_indices)
    for position, logged in enumerate(raw_turns):
        if not isinstance(logged, dict) or "raw_output" not in logged:
            raise ReplayError(f"turn {position}: corrupt entry")
        raw = logged["raw_output"]
        logged_error = logged.get("parse_error")
        logged_result = logged.get("tool_result")
        try:
            parsed: ParsedTurn | None = parse_turn(raw)
            reason = None
        except TurnParseError as exc:
            parsed = None
            reason = exc.reason
        if reason != logged_error:
            raise ReplayError(
                f"turn {position}: parse outcome {reason!r} does not match logged {logged_error!r}"
            )
        result: ToolResult | None = None
        if logged_result is not None:
            if parsed is None or not isinstance(parsed.action, ToolCall):
                raise ReplayError(f"turn {position}: tool result logged for a non-tool turn")
            try:
                result = ToolResult(
                    status=logged_result["status"],
                    indices=tuple(logged_result["indices"]),
                    scores=None
                    if logged_result.get("scores") is None
                    else tuple(logged_result["scores"]),
                    message=logged_result.get("message", ""),
                )
            except (KeyError, TypeError) as exc:
                raise ReplayError(f"turn {position}: corrupt tool result: {exc}") from exc
            call = parsed.action
            if result.status == "rejected_duplicate" and not is_duplicate_call(call, executed):
                raise ReplayError(f"turn {position}: logged duplicate rejection does not replay")
            if result.status == "executed":
                if is_duplicate_call(call, executed):
                    raise ReplayError(f"turn {position}: executed call replays as duplicate")
                executed.append(call)
                frames_delivered += len(result.indices)
        elif parsed is not None and isinstance(parsed.action, ToolCall):
            raise ReplayError(f"turn {position}: tool turn without logged result")
        turns.append(
            TurnRecord(raw_output=raw, parsed=parsed, parse_error=reason, tool_result=result)
        )

    if frames_delivered != stored_frames:
        raise ReplayError(
            f"frames_delivered replays to {frames_delivered}, record says {stored_frames}"
        )
    if (terminal == "answered") != (final_answer is not None):
        raise ReplayError("terminal/answer mismatch")

    return Trajectory(
        item_id=str(item_id),
        video_id=video_id,
        total_frames=total_frames,
        fps=fps,
        config=config,
        initial_indices=initial_indices,
        turns=tuple(turns),
        final_answer=final_answer,
        terminal=terminal,
        frames_delivered=frames_delivered,
    )


def append_trajectory(path: str | Path, trajectory: Trajectory) -> None:
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(trajectory_to_json(trajectory) + "\n")


def read_trajectories(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ReplayError(f"{path}:{number}: invalid JSON: {exc}") from exc
    return records
