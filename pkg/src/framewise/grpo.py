"""Group-relative advantage utilities and the clipped policy-ratio term.

Rewards for trajectories sharing one prompt form a group; each trajectory's
advantage is its reward standardized against the group's mean and population
standard deviation. These are trainer-side inputs, exported as JSONL; no
gradients or model state live here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "RewardGroup",
    "AdvantageGroup",
    "RLSample",
    "IncompleteGroupError",
    "group_advantages",
    "clipped_term",
    "export_rl_batch",
]


@dataclass(frozen=True)
class RewardGroup:
    """Rewards of all trajectories sampled for one prompt; needs at least two."""

    prompt_id: str
    rewards: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.rewards) < 2:
            raise ValueError(f"group {self.prompt_id!r} needs >= 2 rewards")
        if not all(math.isfinite(r) for r in self.rewards):
            raise ValueError(f"group {self.prompt_id!r} has non-finite rewards")


@dataclass(frozen=True)
class AdvantageGroup:
    prompt_id: str
    advantages: tuple[float, ...]


def group_advantages(group: RewardGroup, eps: float = 1e-6) -> AdvantageGroup:
    """Standardize rewards within the group: (r - mean) / (popstd + eps)."""
    rewards = np.asarray(group.rewards, dtype=np.float64)
    if np.all(rewards == rewards[0]):
        # No signal in a constant group; keep the zeros exact rather than
        # leaking summation noise through the eps denominator.
        return AdvantageGroup(prompt_id=group.prompt_id, advantages=(0.0,) * rewards.size)
    centered = rewards - rewards.mean()
    scale = rewards.std() + eps
    return AdvantageGroup(
        prompt_id=group.prompt_id,
        advantages=tuple(float(a) for a in centered / scale),
    )


def clipped_term(rho: float, advantage: float, clip_eps: float) -> float:
    """min(rho * A, clip(rho, 1 - eps, 1 + eps) * A), the per-sample objective."""
    if not rho > 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    if not 0 < clip_eps < 1:
        raise ValueError(f"clip_eps must be in (0, 1), got {clip_eps}")
    clipped_rho = min(max(rho, 1.0 - clip_eps), 1.0 + clip_eps)
    return min(rho * advantage, clipped_rho * advantage)


@dataclass(frozen=True)
class RLSample:
    """One rewarded trajectory headed for the trainer export."""

    prompt_id: str
    category: str
    trajectory: dict
    reward: float | None


class IncompleteGroupError(Exception):
    """Some prompt groups cannot be exported; names them."""

    def __init__(self, prompt_ids: Sequence[str]) -> None:
        self.prompt_ids = tuple(prompt_ids)
        super().__init__(f"incomplete groups: {', '.join(self.prompt_ids)}")


def export_rl_batch(
    samples: Sequence[RLSample],
    path: str | Path,
    *,
    eps: float = 1e-6,
    min_group: int = 2,
) -> int:
    """Write trainer-ready JSONL grouped by prompt; returns records written.

    Every sample in a group must carry a reward and groups must reach
    ``min_group`` members, otherwise the whole export is rejected with the
    offending prompt ids.
    """
    order: list[str] = []
    groups: dict[str, list[RLSample]] = {}
    for sample in samples:
        if sample.prompt_id not in groups:
            order.append(sample.prompt_id)
            groups[sample.prompt_id] = []
        groups[sample.prompt_id].append(sample)

    bad = [
        prompt_id
        for prompt_id in order
        if len(groups[prompt_id]) < min_group
        or any(s.reward is None for s in groups[prompt_id])
    ]
    if bad:
        raise IncompleteGroupError(bad)

    written = 0
    with open(path, "w", encoding="utf-8") as handle:
        for prompt_id in order:
            members = groups[prompt_id]
            rewards = tuple(float(s.reward) for s in members)  # type: ignore[arg-type]
            advantages = group_advantages(RewardGroup(prompt_id, rewards), eps=eps).advantages
            for sample, reward, advantage in zip(members, rewards, advantages):
                record = {
                    "prompt_id": prompt_id,
                    "category": sample.category,
                    "trajectory": sample.trajectory,
                    "reward": reward,
                    "advantage": advantage,
                    "group_advantages": list(advantages),
                }
                handle.write(
                    json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
                    + "\n"
                )
                written += 1
    return written
