"""Dataset loading, benchmark execution, and report emission.

Datasets are JSONL, one QA item per line. A benchmark run drives one episode
per item under bounded parallelism, grades the answers, and aggregates
accuracy plus frame usage into a report that can be emitted as JSON or a
markdown table with an optional delta row against a baseline run.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .frame_store import open_video
from .orchestrator import (
    ChatBackend,
    OrchestratorConfig,
    Trajectory,
    append_trajectory,
    run_episode,
)
from .reward import JudgeBackend, accuracy_reward
from .sampling import EmbeddingBackend, EmbeddingCache

__all__ = [
    "QAItem",
    "DatasetError",
    "Report",
    "BenchmarkResult",
    "load_dataset",
    "run_benchmark",
    "emit_report",
]

QUESTION_CATEGORIES = ("entity", "event", "key-info", "reasoning", "summarization", "temporal")


class DatasetError(Exception):
    """A dataset file violates the JSONL item schema."""


@dataclass(frozen=True)
class QAItem:
    """One question over one video; ``options`` ordered as authored."""

    id: str
    video: str
    question: str
    answer_type: str
    gold: str
    options: tuple[tuple[str, str], ...] | None = None
    category: str | None = None
    question_category: str | None = None
    source: str | None = None

    def __post_init__(self) -> None:
        if self.answer_type not in ("mc", "oe"):
            raise ValueError(f"answer_type must be mc or oe, got {self.answer_type!r}")
        if not self.id or not self.question or not self.gold:
            raise ValueError("id, question, and gold must be non-empty")
        if self.answer_type == "mc":
            if not self.options:
                raise ValueError("mc items require options")
            labels = [label for label, _ in self.options]
            if len(set(labels)) != len(labels):
                raise ValueError("duplicate option labels")
            if self.gold not in labels:
                raise ValueError(f"gold {self.gold!r} is not an option label")

    @property
    def options_map(self) -> dict[str, str]:
        return dict(self.options or ())


def _item_from_obj(obj: object, where: str) -> QAItem:
    if not isinstance(obj, dict):
        raise DatasetError(f"{where}: item must be a JSON object")
    required = {"id": str, "video": str, "question": str, "type": str, "gold": str}
    for key, kind in required.items():
        if key not in obj:
            raise DatasetError(f"{where}: missing required key {key!r}")
        if not isinstance(obj[key], kind):
            raise DatasetError(f"{where}: key {key!r} must be a string")
    options = None
    if obj.get("options") is not None:
        raw = obj["options"]
        if not isinstance(raw, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in raw.items()
        ):
            raise DatasetError(f"{where}: options must map labels to strings")
        options = tuple(raw.items())
    for key in ("category", "question_category", "source"):
        if obj.get(key) is not None and not isinstance(obj[key], str):
            raise DatasetError(f"{where}: key {key!r} must be a string")
    try:
        return QAItem(
            id=obj["id"],
            video=obj["video"],
            question=obj["question"],
            answer_type=obj["type"],
            gold=obj["gold"],
            options=options,
            category=obj.get("category"),
            question_category=obj.get("question_category"),
            source=obj.get("source"),
        )
    except ValueError as exc:
        raise DatasetError(f"{where}: {exc}") from exc


def load_dataset(path: str | Path) -> list[QAItem]:
    """Read and validate a JSONL dataset; errors name the offending line."""
    items: list[QAItem] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{number}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{where}: invalid JSON: {exc}") from exc
            item = _item_from_obj(obj, where)
            if item.id in seen:
                raise DatasetError(
                    f"{where}: duplicate id {item.id!r} (first seen on line {seen[item.id]})"
                )
            seen[item.id] = number
            items.append(item)
    return items


@dataclass(frozen=True)
class Report:
    """Benchmark metrics: accuracy percent, mean frames, optional tag breakdown."""

    accuracy: float
    avg_frames: float
    per_category: tuple[tuple[str, float], ...] = ()
    items: int = 0
    completed: int = 0
    failures: int = 0

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "avg_frames": self.avg_frames,
            "per_category": dict(self.per_category),
            "items": self.items,
            "completed": self.completed,
            "failures": self.failures,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Report":
        return cls(
            accuracy=float(data["accuracy"]),
            avg_frames=float(data["avg_frames"]),
            per_category=tuple(sorted(data.get("per_category", {}).items())),
            items=int(data.get("items", 0)),
            completed=int(data.get("completed", 0)),
            failures=int(data.get("failures", 0)),
        )


@dataclass
class BenchmarkResult:
    report: Report
    trajectories: list[Trajectory] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)


def run_benchmark(
    items: Sequence[QAItem],
    chat_backend: ChatBackend,
    embedder: EmbeddingBackend | None = None,
    config: OrchestratorConfig = OrchestratorConfig(),
    judge: JudgeBackend | None = None,
    *,
    correct_threshold: float = 0.5,
    parallel: int = 4,
    out_dir: str | Path | None = None,
    open_video_fn: Callable = open_video,
) -> BenchmarkResult:
    """Run every item once and aggregate.

    Items whose episode or grading raises are recorded as failures and score
    0; episodes that produced a trajectory before failing still contribute
    their delivered-frame count to the average.
    """
    cache = EmbeddingCache()

    def one(item: QAItem) -> tuple[QAItem, Trajectory | None, bool, str | None]:
        trajectory = None
        try:
            video = open_video_fn(item.video)
            trajectory = run_episode(item, video, chat_backend, embedder, config, cache)
            if trajectory.terminal == "backend_failed":
                return item, trajectory, False, "backend failed"
            if trajectory.final_answer is None:
                return item, trajectory, False, None
            score = accuracy_reward(item, trajectory.final_answer, judge)
            return item, trajectory, score >= correct_threshold, None
        except Exception as exc:
            return item, trajectory, False, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=max(1, parallel)) as pool:
        results = list(pool.map(one, items))

    trajectories = [traj for _, traj, _, _ in results if traj is not None]
    failures = [(item.id, reason) for item, _, _, reason in results if reason is not None]
    correct_count = sum(1 for _, _, correct, _ in results if correct)
    accuracy = 100.0 * correct_count / len(items) if items else 0.0
    avg_frames = (
        sum(t.frames_delivered for t in trajectories) / len(trajectories)
        if trajectories
        else 0.0
    )

    by_tag: dict[str, list[bool]] = {}
    for item, _, correct, _ in results:
        if item.question_category is not None:
            by_tag.setdefault(item.question_category, []).append(correct)
    per_category = tuple(
        (tag, 100.0 * sum(flags) / len(flags)) for tag, flags in sorted(by_tag.items())
    )

    report = Report(
        accuracy=accuracy,
        avg_frames=avg_frames,
        per_category=per_category,
        items=len(items),
        completed=len(items) - len(failures),
        failures=len(failures),
    )

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        trajectory_path = out / "trajectories.jsonl"
        trajectory_path.write_text("", encoding="utf-8")
        for trajectory in trajectories:
            append_trajectory(trajectory_path, trajectory)
        (out / "report.json").write_text(emit_report(report, "json"), encoding="utf-8")

    return BenchmarkResult(report=report, trajectories=trajectories, failures=failures)


def _percent_delta(current: float, baseline: float) -> str:
    # Round half away from zero so -32.5 prints as -33%.  The ratio is
    # quantized first: double noise (e.g. -32.499999999999996 for 21.6/32.0)
    # must not pull an exact half below the threshold.
    ratio = round((current - baseline) / baseline * 100.0, 9)
    magnitude = math.floor(abs(ratio) + 0.5)
    value = magnitude if ratio >= 0 else -magnitude
    return f"{value:+d}%"


def emit_report(report: Report, fmt: str, baseline: Report | None = None) -> str:
    """Render a report as canonical JSON or a markdown table.

    With a baseline, the markdown form appends a delta row: accuracy as a
    signed point difference, frames as a signed percent change.
    """
    if fmt == "json":
        return json.dumps(report.to_dict(), sort_keys=True, separators=(",", ":"))
    if fmt != "markdown":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [
        "| Run | Acc | Frame |",
        "| --- | ---: | ---: |",
        f"| this | {report.accuracy:.1f} | {report.avg_frames:.1f} |",
    ]
    if baseline is not None:
        lines.append(f"| baseline | {baseline.accuracy:.1f} | {baseline.avg_frames:.1f} |")
        acc_delta = report.accuracy - baseline.accuracy
        lines.append(
            f"| Δ vs baseline | {acc_delta:+.1f} | "
            f"{_percent_delta(report.avg_frames, baseline.avg_frames)} |"
        )
    if report.per_category:
        lines.append("")
        lines.append("| Question category | Acc |")
        lines.append("| --- | ---: |")
        for tag, accuracy in report.per_category:
            lines.append(f"| {tag} | {accuracy:.1f} |")
    return "\n".join(lines)
