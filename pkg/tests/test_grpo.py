from __future__ import annotations

import json
import math
import random

import numpy as np
import pytest

from framewise.grpo import (
    AdvantageGroup,
    IncompleteGroupError,
    RewardGroup,
    RLSample,
    clipped_term,
    export_rl_batch,
    group_advantages,
)


class TestRewardGroup:
    def test_requires_two(self):
        with pytest.raises(ValueError, match=">= 2"):
            RewardGroup("p", (1.0,))

    def test_requires_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            RewardGroup("p", (1.0, float("nan")))


class TestGroupAdvantages:
    def test_hand_value_zero_one(self):
        # rewards [0, 1]: mean 0.5, popstd 0.5 -> |A| = 0.5 / (0.5 + 1e-6).
        result = group_advantages(RewardGroup("p", (0.0, 1.0)))
        expected = 0.5 / (0.5 + 1e-6)
        assert result.advantages[0] == pytest.approx(-expected, abs=1e-12)
        assert result.advantages[1] == pytest.approx(expected, abs=1e-12)
        assert result.advantages[1] == pytest.approx(0.999998000004, abs=1e-11)

    def test_identical_rewards_zero_advantage(self):
        result = group_advantages(RewardGroup("p", (0.7, 0.7, 0.7)))
        assert result.advantages == (0.0, 0.0, 0.0)

    def test_mean_zero_property(self):
        rng = random.Random(5)
        for _ in range(300):
            size = rng.randrange(2, 9)
            rewards = tuple(rng.uniform(0.0, 1.55) for _ in range(size))
            advantages = group_advantages(RewardGroup("p", rewards)).advantages
            assert sum(advantages) == pytest.approx(0.0, abs=1e-9)

    def test_order_preserving_and_monotone(self):
        rng = random.Random(6)
        for _ in range(200):
            size = rng.randrange(2, 9)
            rewards = tuple(rng.uniform(0.0, 1.55) for _ in range(size))
            advantages = group_advantages(RewardGroup("p", rewards)).advantages
            for i in range(size):
                for j in range(size):
                    if rewards[i] < rewards[j]:
                        assert advantages[i] < advantages[j]
                    elif rewards[i] == rewards[j]:
                        assert advantages[i] == advantages[j]

    def test_scale_bounded_by_unit_std(self):
        # popstd / (popstd + eps) < 1, so standardized values stay just under
        # the eps-free standardization.
        rewards = (0.2, 0.8, 1.4)
        advantages = np.array(group_advantages(RewardGroup("p", rewards)).advantages)
        exact = (np.array(rewards) - np.mean(rewards)) / np.std(rewards)
        assert np.all(np.abs(advantages) < np.abs(exact) + 1e-15)
        assert np.allclose(advantages, exact, atol=1e-5)

    def test_returns_advantage_group(self):
        result = group_advantages(RewardGroup("prompt-9", (0.0, 1.0)))
        assert isinstance(result, AdvantageGroup)
        assert result.prompt_id == "prompt-9"


class TestClippedTerm:
    def test_hand_values(self):
        assert clipped_term(1.5, 1.0, 0.2) == pytest.approx(1.2)
        assert clipped_term(0.5, -1.0, 0.2) == pytest.approx(-0.8)

    def test_inside_window_unclipped(self):
        assert clipped_term(1.1, 2.0, 0.2) == pytest.approx(2.2)
        assert clipped_term(0.9, -2.0, 0.2) == pytest.approx(-1.8)

    def test_validations(self):
        with pytest.raises(ValueError):
            clipped_term(0.0, 1.0, 0.2)
        with pytest.raises(ValueError):
            clipped_term(-1.0, 1.0, 0.2)
        with pytest.raises(ValueError):
            clipped_term(1.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            clipped_term(1.0, 1.0, 1.0)

    def test_pessimism_property(self):
        # The term never exceeds either the raw or the clipped objective.
        rng = random.Random(11)
        for _ in range(500):
            rho = math.exp(rng.uniform(-2, 2))
            advantage = rng.uniform(-3, 3)
            eps = rng.uniform(0.05, 0.5)
            value = clipped_term(rho, advantage, eps)
            clipped_rho = min(max(rho, 1 - eps), 1 + eps)
            assert value <= rho * advantage + 1e-12
            assert value <= clipped_rho * advantage + 1e-12
            assert value == pytest.approx(min(rho * advantage, clipped_rho * advantage))


def sample(prompt_id: str, reward: float | None, tag: str = "t") -> RLSample:
    return RLSample(
        prompt_id=prompt_id,
        category="Active",
        trajectory={"item_id": prompt_id, "tag": tag},
        reward=reward,
    )


class TestExport:
    def test_export_and_reload(self, tmp_path):
        path = tmp_path / "batch.jsonl"
        samples = [
            sample("p1", 1.55),
            sample("p1", 0.25),
            sample("p2", 0.0),
            sample("p1", 1.05),
            sample("p2", 1.0),
        ]
        count = export_rl_batch(samples, path)
        assert count == 5
        records = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
        # Groups emit contiguously in first-seen order.
        assert [r["prompt_id"] for r in records] == ["p1", "p1", "p1", "p2", "p2"]
        p1 = [r for r in records if r["prompt_id"] == "p1"]
        rewards = tuple(r["reward"] for r in p1)
        expected = group_advantages(RewardGroup("p1", rewards)).advantages
        assert [r["advantage"] for r in p1] == pytest.approx(list(expected))
        assert all(r["group_advantages"] == [rec["advantage"] for rec in p1] for r in p1)

    def test_undersized_group_rejected(self, tmp_path):
        with pytest.raises(IncompleteGroupError) as info:
            export_rl_batch([sample("p1", 1.0), sample("p2", 1.0), sample("p2", 0.5)], tmp_path / "x.jsonl")
        assert info.value.prompt_ids == ("p1",)

    def test_missing_reward_rejected(self, tmp_path):
        with pytest.raises(IncompleteGroupError) as info:
            export_rl_batch([sample("p1", 1.0), sample("p1", None)], tmp_path / "x.jsonl")
        assert info.value.prompt_ids == ("p1",)

    def test_all_bad_groups_reported_in_order(self, tmp_path):
        samples = [
            sample("p1", None),
            sample("p1", 1.0),
            sample("p2", 0.5),
            sample("p2", 0.6),
            sample("p3", 0.1),
        ]
        with pytest.raises(IncompleteGroupError) as info:
            export_rl_batch(samples, tmp_path / "x.jsonl")
        assert info.value.prompt_ids == ("p1", "p3")
        assert "p1" in str(info.value) and "p3" in str(info.value)

    def test_failed_export_writes_nothing(self, tmp_path):
        path = tmp_path / "batch.jsonl"
        with pytest.raises(IncompleteGroupError):
            export_rl_batch([sample("p1", 1.0)], path)
        assert not path.exists()

    def test_lines_are_canonical_json(self, tmp_path):
        path = tmp_path / "batch.jsonl"
        export_rl_batch([sample("p1", 1.0), sample("p1", 0.0)], path)
        for line in path.read_text(encoding="utf-8").splitlines():
            assert (
                json.dumps(json.loads(line), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
                == line
            )

    def test_min_group_override(self, tmp_path):
        path = tmp_path / "batch.jsonl"
        samples = [sample("p1", 1.0), sample("p1", 0.5), sample("p1", 0.2)]
        assert export_rl_batch(samples, path, min_group=3) == 3
        with pytest.raises(IncompleteGroupError):
            export_rl_batch(samples[:2], path, min_group=3)
