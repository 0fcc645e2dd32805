"""Dual-model labeling of QA items into Direct, Adaptive, Active, or Anomaly.

A tool-free base run and a tool-enabled teacher run are compared per item:
questions both models answer are Direct, questions only the teacher answers
are Adaptive or Active depending on whether it needed tools, and questions
where even the teacher fails are Active. Items the base model answers but
the teacher misses are anomalies and excluded from every training split.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import json

from .frame_store import VideoRef, open_video
from .orchestrator import ChatBackend, OrchestratorConfig, Trajectory, run_episode
from .reward import JudgeBackend, accuracy_reward
from .sampling import EmbeddingBackend

if TYPE_CHECKING:
    from .evalkit import QAItem

__all__ = [
    "ANOMALY",
    "ModelOutcome",
    "LabeledItem",
    "classify",
    "run_classification",
    "sft_split",
    "rl_split",
    "write_split_manifest",
    "summarize",
    "format_summary",
]

ANOMALY = "Anomaly"


@dataclass(frozen=True)
class ModelOutcome:
    """One model's result on one item; base outcomes never use agents."""

    correct: bool
    used_agent: bool = False
    trajectory_ref: str | None = None


@dataclass(frozen=True)
class LabeledItem:
    item: "QAItem"
    category: str
    base: ModelOutcome
    teacher: ModelOutcome
    base_trajectory: Trajectory | None = None
    teacher_trajectory: Trajectory | None = None


def classify(base: ModelOutcome, teacher: ModelOutcome) -> str:
    """Label one item from the two outcomes; total over all combinations."""
    if base.used_agent:
        raise ValueError("base-model outcomes must not use agents")
    if base.correct:
        return "Direct" if teacher.correct else ANOMALY
    if teacher.correct:
        return "Active" if teacher.used_agent else "Adaptive"
    return "Active"


def _grade(
    item: "QAItem", trajectory: Trajectory, judge: JudgeBackend | None, threshold: float
) -> bool:
    if trajectory.final_answer is None:
        return False
    return accuracy_reward(item, trajectory.final_answer, judge) >= threshold


def run_classification(
    items: Sequence["QAItem"],
    base_backend: ChatBackend,
    teacher_backend: ChatBackend,
    embedder: EmbeddingBackend | None = None,
    config: OrchestratorConfig = OrchestratorConfig(),
    judge: JudgeBackend | None = None,
    *,
    correct_threshold: float = 0.5,
    parallel: int = 4,
    open_video_fn=open_video,
) -> tuple[list[LabeledItem], list[tuple[str, str]]]:
    """Label every item; returns (labeled, excluded) with input order preserved.

    The base model runs with ``max_rounds = 0`` so it sees only the initial
    frames. Items whose backends fail are excluded with a reason instead of
    aborting the batch.
    """
    base_config = replace(config, max_rounds=0)

    def one(item: "QAItem") -> LabeledItem | tuple[str, str]:
        try:
            video: VideoRef = open_video_fn(item.video)
            base_traj = run_episode(item, video, base_backend, None, base_config)
            teacher_traj = run_episode(item, video, teacher_backend, embedder, config)
            if base_traj.terminal == "backend_failed":
                return (item.id, "base backend failed")
            if teacher_traj.terminal == "backend_failed":
                return (item.id, "teacher backend failed")
            base = ModelOutcome(
                correct=_grade(item, base_traj, judge, correct_threshold),
                used_agent=False,
                trajectory_ref=base_traj.item_id,
            )
            teacher = ModelOutcome(
                correct=_grade(item, teacher_traj, judge, correct_threshold),
                used_agent=teacher_traj.used_agent,
                trajectory_ref=teacher_traj.item_id,
            )
        except Exception as exc:
            return (item.id, f"{type(exc).__name__}: {exc}")
        return LabeledItem(
            item=item,
            category=classify(base, teacher),
            base=base,
            teacher=teacher,
            base_trajectory=base_traj,
            teacher_trajectory=teacher_traj,
        )

    with ThreadPoolExecutor(max_workers=max(1, parallel)) as pool:
        results = list(pool.map(one, items))

    labeled = [r for r in results if isinstance(r, LabeledItem)]
    excluded = [r for r in results if not isinstance(r, LabeledItem)]
    return labeled, excluded


def sft_split(labeled: Sequence[LabeledItem]) -> list[LabeledItem]:
    """Warm-start training items: only those where tools may matter, never Direct."""
    return [entry for entry in labeled if entry.category in ("Adaptive", "Active")]


def rl_split(labeled: Sequence[LabeledItem]) -> list[LabeledItem]:
    """Policy-training items: all three categories, anomalies excluded."""
    return [entry for entry in labeled if entry.category != ANOMALY]


def write_split_manifest(path: str | Path, labeled: Sequence[LabeledItem]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for entry in labeled:
            handle.write(json.dumps({"id": entry.item.id}, ensure_ascii=False) + "\n")


def summarize(labeled: Sequence[LabeledItem], excluded: Sequence[tuple[str, str]] = ()) -> dict:
    counts = {"Direct": 0, "Adaptive": 0, "Active": 0, ANOMALY: 0}
    for entry in labeled:
        counts[entry.category] += 1
    kept = counts["Direct"] + counts["Adaptive"] + counts["Active"]
    proportions = {
        name: (100.0 * counts[name] / kept if kept else 0.0)
        for name in ("Direct", "Adaptive", "Active")
    }
    return {
        "counts": counts,
        "proportions": proportions,
        "excluded": len(excluded),
        "total": len(labeled) + len(excluded),
    }


def format_summary(summary: dict) -> str:
    parts = [
        f"{summary['proportions'][name]:.1f}% {name}"
        for name in ("Direct", "Adaptive", "Active")
    ]
    return ", ".join(parts)
