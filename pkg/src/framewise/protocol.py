"""Structured turn grammar: prompt building, output parsing, and the format gate.

A model turn is one ``<thinking>`` block followed by exactly one action,
either a ``<tool_call>`` carrying JSON or an ``<answer>``. Parsing is lenient
enough for inference to proceed (trailing text tolerated, one block
extracted); :func:`validate_trajectory_format` is the strict gate applied to
the raw turn texts when scoring.

The prompt builders are pure and byte-stable; their outputs are pinned by the
golden files under ``prompts/``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Sequence

from .frame_store import Frame

__all__ = [
    "TOOL_UNIFORM",
    "TOOL_CLIP",
    "RULE_ORDER",
    "ToolCall",
    "Answer",
    "ParsedTurn",
    "TurnParseError",
    "FormatVerdict",
    "PromptMessage",
    "parse_turn",
    "render_turn",
    "extract_tool_calls",
    "is_duplicate_call",
    "validate_trajectory_format",
    "build_system_prompt",
    "build_initial_prompt",
    "build_turn_prompt",
]

TOOL_UNIFORM = "uniform_sample"
TOOL_CLIP = "clip_sample"

# Gate rule identifiers in report order.
RULE_ORDER = (
    "tag_mismatch",
    "empty_content",
    "bad_json",
    "bad_schema",
    "range_order",
    "duplicate_uniform",
    "duplicate_clip",
    "count_equation",
)

_TAGS = ("thinking", "tool_call", "answer")
_THINKING_RE = re.compile(r"<thinking>(.*?)</thinking>", re.DOTALL)
_TOOL_RE = re.compile(r"<tool_call>(.*?)</tool_call>", re.DOTALL)
_ANSWER_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)
_BLOCK_RES = {"thinking": _THINKING_RE, "tool_call": _TOOL_RE, "answer": _ANSWER_RE}


class TurnParseError(Exception):
    """A model turn does not reduce to thinking plus one action.

    ``reason`` is a stable code: missing_thinking, empty_thinking,
    missing_action, unclosed_action, ambiguous_turn, empty_tool_call,
    empty_answer, bad_json, bad_schema, range_order.
    """

    def __init__(self, reason: str, message: str) -> None:
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True)
class ToolCall:
    """Validated tool invocation; ``prompt`` only for semantic retrieval."""

    name: str
    start_frame: int
    end_frame: int
    prompt: str | None = None

    def __post_init__(self) -> None:
        if self.name not in (TOOL_UNIFORM, TOOL_CLIP):
            raise ValueError(f"unknown tool {self.name!r}")
        for label, value in (("start_frame", self.start_frame), ("end_frame", self.end_frame)):
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValueError(f"{label} must be an integer, got {value!r}")
        if self.start_frame >= self.end_frame:
            raise ValueError(
                f"start_frame must be < end_frame, got [{self.start_frame}, {self.end_frame})"
            )
        if self.name == TOOL_CLIP:
            if not isinstance(self.prompt, str) or not self.prompt.strip():
                raise ValueError("clip_sample requires a non-empty prompt")
        elif self.prompt is not None:
            raise ValueError("uniform_sample takes no prompt")


@dataclass(frozen=True)
class Answer:
    """Final answer text, stored whitespace-stripped."""

    text: str

    def __post_init__(self) -> None:
        if not self.text or self.text != self.text.strip():
            raise ValueError("answer text must be non-empty and stripped")


@dataclass(frozen=True)
class ParsedTurn:
    """One thinking block plus one action; ``trailing`` is ignored extra text."""

    thinking: str
    action: ToolCall | Answer
    trailing: str = ""


@dataclass(frozen=True)
class FormatVerdict:
    """Outcome of the trajectory-level gate; passes iff no violations."""

    passed: bool
    violations: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.passed != (not self.violations):
            raise ValueError("passed must mirror an empty violation list")


def _tool_call_from_obj(obj: object) -> ToolCall:
    if not isinstance(obj, dict) or set(obj) != {"name", "arguments"}:
        raise TurnParseError("bad_schema", "tool call must have exactly name and arguments")
    name = obj["name"]
    args = obj["arguments"]
    if name not in (TOOL_UNIFORM, TOOL_CLIP):
        raise TurnParseError("bad_schema", f"unknown tool {name!r}")
    expected = {"start_frame", "end_frame"} if name == TOOL_UNIFORM else {
        "start_frame",
        "end_frame",
        "prompt",
    }
    if not isinstance(args, dict) or set(args) != expected:
        raise TurnParseError("bad_schema", f"{name} arguments must be exactly {sorted(expected)}")
    start, end = args["start_frame"], args["end_frame"]
    for label, value in (("start_frame", start), ("end_frame", end)):
        if not isinstance(value, int) or isinstance(value, bool):
            raise TurnParseError("bad_schema", f"{label} must be an integer")
    if name == TOOL_CLIP:
        prompt = args["prompt"]
        if not isinstance(prompt, str) or not prompt.strip():
            raise TurnParseError("bad_schema", "prompt must be a non-empty string")
    if start >= end:
        raise TurnParseError("range_order", f"start_frame {start} must be < end_frame {end}")
    if name == TOOL_UNIFORM:
        return ToolCall(name=name, start_frame=start, end_frame=end)
    return ToolCall(name=name, start_frame=start, end_frame=end, prompt=args["prompt"])


def _parse_tool_block(content: str) -> ToolCall:
    try:
        obj = json.loads(content)
    except json.JSONDecodeError as exc:
        raise TurnParseError("bad_json", f"tool call is not valid JSON: {exc}") from exc
    return _tool_call_from_obj(obj)


def parse_turn(text: str) -> ParsedTurn:
    """Extract thinking plus the single following action from a model turn.

    Text after the action's closing tag is preserved in ``trailing`` but
    otherwise ignored; a turn containing both a tool call and an answer is
    rejected as ambiguous.
    """
    thinking_match = _THINKING_RE.search(text)
    if thinking_match is None:
        raise TurnParseError("missing_thinking", "no <thinking>...</thinking> block found")
    thinking = thinking_match.group(1)
    if not thinking.strip():
        raise TurnParseError("empty_thinking", "<thinking> block is empty")
    rest = text[thinking_match.end():]

    tool_match = _TOOL_RE.search(rest)
    answer_match = _ANSWER_RE.search(rest)
    if tool_match and answer_match:
        raise TurnParseError("ambiguous_turn", "turn contains both <tool_call> and <answer>")
    if tool_match is None and answer_match is None:
        if "<tool_call>" in rest or "<answer>" in rest:
            raise TurnParseError("unclosed_action", "action tag is never closed")
        raise TurnParseError("missing_action", "no <tool_call> or <answer> block found")

    if answer_match is not None:
        answer_text = answer_match.group(1).strip()
        if not answer_text:
            raise TurnParseError("empty_answer", "<answer> block is empty")
        return ParsedTurn(
            thinking=thinking, action=Answer(answer_text), trailing=rest[answer_match.end():]
        )

    assert tool_match is not None
    content = tool_match.group(1)
    if not content.strip():
        raise TurnParseError("empty_tool_call", "<tool_call> block is empty")
    call = _parse_tool_block(content)
    return ParsedTurn(thinking=thinking, action=call, trailing=rest[tool_match.end():])


def render_turn(turn: ParsedTurn) -> str:
    """Canonical text for a parsed turn; ``parse_turn`` inverts it."""
    if isinstance(turn.action, Answer):
        action = f"<answer>{turn.action.text}</answer>"
    else:
        call = turn.action
        args: dict[str, object] = {"start_frame": call.start_frame, "end_frame": call.end_frame}
        if call.name == TOOL_CLIP:
            args["prompt"] = call.prompt
        payload = json.dumps({"name": call.name, "arguments": args})
        action = f"<tool_call>{payload}</tool_call>"
    return f"<thinking>{turn.thinking}</thinking>{action}{turn.trailing}"


def extract_tool_calls(raw_outputs: Sequence[str]) -> list[ToolCall]:
    """All well-formed tool calls across turn texts, in emission order.

    Malformed blocks are skipped here; the gate flags them separately.
    """
    calls: list[ToolCall] = []
    for output in raw_outputs:
        for match in _TOOL_RE.finditer(output):
            content = match.group(1)
            if not content.strip():
                continue
            try:
                calls.append(_parse_tool_block(content))
            except TurnParseError:
                continue
    return calls


def is_duplicate_call(call: ToolCall, history: Sequence[ToolCall]) -> bool:
    """Whether ``call`` repeats any prior call of the same tool.

    Uniform calls repeat when both endpoints are within 1 of a prior call's;
    clip calls repeat when the prompt matches exactly after trimming
    surrounding whitespace, ranges ignored.
    """
    for prior in history:
        if prior.name != call.name:
            continue
        if call.name == TOOL_UNIFORM:
            if (
                abs(call.start_frame - prior.start_frame) <= 1
                and abs(call.end_frame - prior.end_frame) <= 1
            ):
                return True
        else:
            assert call.prompt is not None and prior.prompt is not None
            if call.prompt.strip() == prior.prompt.strip():
                return True
    return False


def validate_trajectory_format(
    raw_outputs: Sequence[str], calls: Sequence[ToolCall] | None = None
) -> FormatVerdict:
    """The strict format gate over a trajectory's raw turn texts.

    Checks, in rule order: balanced open/close counts per tag; non-empty
    block contents; JSON, schema, and range validity of every tool-call
    block; no duplicate calls; and the count equation
    #thinking = #tool_call + #answer over all turns. ``calls`` defaults to
    the calls extracted from ``raw_outputs`` so rejected-at-inference
    duplicates still fail the gate.
    """
    if calls is None:
        calls = extract_tool_calls(raw_outputs)
    violations: set[str] = set()

    opens: dict[str, int] = {}
    for tag in _TAGS:
        opens[tag] = sum(text.count(f"<{tag}>") for text in raw_outputs)
        closes = sum(text.count(f"</{tag}>") for text in raw_outputs)
        if opens[tag] != closes:
            violations.add("tag_mismatch")
    if opens["thinking"] != opens["tool_call"] + opens["answer"]:
        violations.add("count_equation")

    for text in raw_outputs:
        for tag in _TAGS:
            for match in _BLOCK_RES[tag].finditer(text):
                if not match.group(1).strip():
                    violations.add("empty_content")
        for match in _TOOL_RE.finditer(text):
            content = match.group(1)
            if not content.strip():
                continue
            try:
                _parse_tool_block(content)
            except TurnParseError as exc:
                violations.add(exc.reason if exc.reason in RULE_ORDER else "bad_schema")

    for i, call in enumerate(calls):
        if is_duplicate_call(call, calls[:i]):
            violations.add("duplicate_uniform" if call.name == TOOL_UNIFORM else "duplicate_clip")

    ordered = tuple(rule for rule in RULE_ORDER if rule in violations)
    return FormatVerdict(passed=not ordered, violations=ordered)


@dataclass(frozen=True)
class PromptMessage:
    """One chat message: user text carries an ``<image>`` placeholder per frame.

    Assistant messages echo raw model output verbatim and never attach images,
    so the placeholder rule applies to user messages only.
    """

    role: str
    text: str
    images: tuple[Frame, ...]

    def __post_init__(self) -> None:
        if self.role == "user":
            if self.text.count("<image>") != len(self.images):
                raise ValueError("one <image> placeholder required per attached frame")
        elif self.images:
            raise ValueError("only user messages may attach images")


SYSTEM_PROMPT = """You are a helpful assistant to answer video questions.

You will initially see 16 uniformly sampled frames from the video. These initial frames may not be sufficient to answer the question accurately. You can use the provided tools to gather more targeted frames before answering.

# Tools

You can call one or more functions to assist with the user query, especially when the initial frames are insufficient. You are provided with function signatures within <tools></tools> XML tags:

<tools>
[
  {
    "type": "function",
    "function": {
      "name": "uniform_sample",
      "description": "Uniformly sample 8 frames between start_frame and end_frame.",
      "parameters": {
        "type": "object",
        "properties": {
          "start_frame": {
            "type": "integer",
            "description": "First frame index of the range, inclusive."
          },
          "end_frame": {
            "type": "integer",
            "description": "Last frame index of the range, exclusive; must be greater than start_frame."
          }
        },
        "required": ["start_frame", "end_frame"]
      }
    }
  },
  {
    "type": "function",
    "function": {
      "name": "clip_sample",
      "description": "Sample 4 frames within the frame range based on semantic relevance to a text prompt.",
      "parameters": {
        "type": "object",
        "properties": {
          "start_frame": {
            "type": "integer",
            "description": "First frame index of the range, inclusive."
          },
          "end_frame": {
            "type": "integer",
            "description": "Last frame index of the range, exclusive; must be greater than start_frame."
          },
          "prompt": {
            "type": "string",
            "description": "Concise description of the visual content to retrieve."
          }
        },
        "required": ["start_frame", "end_frame", "prompt"]
      }
    }
  }
]
</tools>

# How to call a tool

Return a JSON object with the function name and arguments inside XML tags:

<tool_call>
{"name": "<function-name>", "arguments": { /* params */ }}
</tool_call>

# Instructions
1. When you think there is insufficient information, you can obtain more frames by calling uniform_sample or clip_sample.
2. For problems such as inference, sorting, or summarization, uniform_sample can be considered first.
3. For visual positioning and confirming specific information, clip_sample can be considered as a priority.
4. When using clip_sample, a concise and to-the-point prompt is crucial."""

FORMAT_BLOCK = """Start with <thinking>. Format strictly as:
<thinking>...</thinking><tool_call>...</tool_call>
or
<thinking>...</thinking><answer>...</answer>"""

TURN_HEADER = "Based on sampling, here are the following frames:"


def _frame_lines(frames: Sequence[Frame]) -> str:
    return "\n".join(f"frame {frame.index}: <image>" for frame in frames)


def _fps_text(fps: float) -> str:
    return str(float(fps))


def build_system_prompt() -> str:
    """The fixed system prompt; byte-equal to ``prompts/system_prompt.txt``."""
    return SYSTEM_PROMPT


def build_initial_prompt(
    question: str, total_frames: int, fps: float, frames: Sequence[Frame]
) -> PromptMessage:
    """First user turn: question, video stats, format rules, initial frames."""
    text = (
        f"Question: {question}\n"
        "\n"
        "# Video Information:\n"
        f"- Total frames: {total_frames}\n"
        f"- FPS: {_fps_text(fps)}\n"
        "\n"
        "# Output Format:\n"
        f"{FORMAT_BLOCK}"
    )
    if frames:
        text += "\n\n" + _frame_lines(frames)
    return PromptMessage(role="user", text=text, images=tuple(frames))


def build_turn_prompt(frames: Sequence[Frame]) -> PromptMessage:
    """Follow-up user turn delivering tool results (possibly zero frames)."""
    text = f"{FORMAT_BLOCK}\n\n{TURN_HEADER}"
    if frames:
        text += "\n\n" + _frame_lines(frames)
    return PromptMessage(role="user", text=text, images=tuple(frames))
