"""Trajectory scoring: format gate, answer grading, and the behavior bonus.

Total reward is gated: a trajectory that fails the format checks scores zero
outright. Passing trajectories earn a fixed format reward of 0.05, an
accuracy term in [0, 1], and a category-conditioned behavior bonus that pays
for answering Direct questions without tools and for invoking tools on
Active ones.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Protocol

from .protocol import validate_trajectory_format

if TYPE_CHECKING:
    from .evalkit import QAItem
    from .orchestrator import Trajectory

__all__ = [
    "CATEGORIES",
    "FORMAT_REWARD",
    "JUDGE_MC_TEMPLATE",
    "JUDGE_OE_TEMPLATE",
    "RewardBreakdown",
    "JudgeBackend",
    "MissingJudgeError",
    "behavior_reward",
    "grade_mc",
    "accuracy_reward",
    "total_reward",
    "render_options",
]

CATEGORIES = ("Direct", "Adaptive", "Active")
FORMAT_REWARD = 0.05


class MissingJudgeError(Exception):
    """An open-ended item was graded without a judge backend configured."""


class JudgeBackend(Protocol):
    """External grader: binary for multiple-choice, [0, 1] for open-ended."""

    def judge_mc(
        self, question: str, options: Mapping[str, str], gold: str, answer: str
    ) -> int: ...

    def judge_oe(self, question: str, gold: str, answer: str) -> float: ...


@dataclass(frozen=True)
class RewardBreakdown:
    """Scored components; ``total`` is 0 whenever the gate fails."""

    format_pass: bool
    r_format: float
    r_accuracy: float
    r_behavior: float
    total: float
    violations: tuple[str, ...]


def behavior_reward(category: str, used_agent: bool, correct: bool) -> float:
    """The category-conditioned bonus.

    Direct pays only for tool-free correct answers; Adaptive pays for any
    correct answer; Active pays for correct answers reached through tools and
    grants 0.2 for tool use even when the answer is wrong.
    """
    if category not in CATEGORIES:
        raise ValueError(f"unknown category {category!r}")
    if category == "Direct":
        return 0.5 if (not used_agent and correct) else 0.0
    if category == "Adaptive":
        return 0.5 if correct else 0.0
    if used_agent and correct:
        return 0.5
    if used_agent and not correct:
        return 0.2
    return 0.0


def render_options(options: Mapping[str, str]) -> str:
    return "\n".join(f"{label}. {text}" for label, text in options.items())


def grade_mc(options: Mapping[str, str], gold: str, answer: str) -> float:
    """Deterministic multiple-choice grading.

    Tries, in order: the answer being exactly an option label, the answer
    being exactly an option's text, and the answer containing exactly one
    distinct option label as a standalone token.
    """
    stripped = answer.strip()
    if stripped in options:
        return 1.0 if stripped == gold else 0.0
    if len(stripped) == len(gold) and stripped.upper() == gold.upper():
        return 1.0
    lowered = stripped.lower().rstrip(".")
    for label, text in options.items():
        if lowered == text.strip().lower().rstrip("."):
            return 1.0 if label == gold else 0.0
    found = {
        label
        for label in options
        if re.search(rf"\b{re.escape(label)}\b", stripped)
    }
    if len(found) == 1:
        return 1.0 if found == {gold} else 0.0
    return 0.0


def accuracy_reward(
    item: "QAItem",
    answer: str,
    judge: JudgeBackend | None = None,
    *,
    use_judge_for_mc: bool = False,
) -> float:
    """Answer correctness in [0, 1]; binary for multiple-choice items."""
    if item.answer_type == "mc":
        if use_judge_for_mc:
            if judge is None:
                raise MissingJudgeError("use_judge_for_mc requires a judge backend")
            return float(judge.judge_mc(item.question, item.options_map, item.gold, answer))
        return grade_mc(item.options_map, item.gold, answer)
    if judge is None:
        raise MissingJudgeError(f"item {item.id}: open-ended grading requires a judge backend")
    score = float(judge.judge_oe(item.question, item.gold, answer))
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"judge returned out-of-range score {score}")
    return score


def total_reward(
    trajectory: "Trajectory",
    item: "QAItem",
    category: str,
    judge: JudgeBackend | None = None,
    *,
    correct_threshold: float = 0.5,
    use_judge_for_mc: bool = False,
) -> RewardBreakdown:
    """Score one trajectory; the gate runs first and zeroes everything on failure."""
    verdict = validate_trajectory_format(trajectory.raw_outputs)
    if not verdict.passed:
        return RewardBreakdown(
            format_pass=False,
            r_format=0.0,
            r_accuracy=0.0,
            r_behavior=0.0,
            total=0.0,
            violations=verdict.violations,
        )
    if trajectory.final_answer is None:
        r_accuracy = 0.0
    else:
        r_accuracy = accuracy_reward(
            item, trajectory.final_answer, judge, use_judge_for_mc=use_judge_for_mc
        )
    correct = r_accuracy >= correct_threshold
    r_behavior = behavior_reward(category, trajectory.used_agent, correct)
    return RewardBreakdown(
        format_pass=True,
        r_format=FORMAT_REWARD,
        r_accuracy=r_accuracy,
        r_behavior=r_behavior,
        total=FORMAT_REWARD + r_accuracy + r_behavior,
        violations=(),
    )


JUDGE_MC_TEMPLATE = """You are grading a multiple-choice answer.

Question: {question}

Options:
{options}

Correct option: {gold}

Model answer: {answer}

Reply with exactly one character: 1 if the model answer selects the correct option, 0 otherwise."""

JUDGE_OE_TEMPLATE = """You are grading an open-ended answer against a reference.

Question: {question}

Reference answer: {gold}

Model answer: {answer}

Score the semantic agreement between the model answer and the reference on a scale from 0 to 1. Reply with only the numeric score."""
