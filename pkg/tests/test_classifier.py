from __future__ import annotations

import json

import pytest

from framewise.backends import BackendError
from framewise.classifier import (
    ANOMALY,
    LabeledItem,
    ModelOutcome,
    classify,
    format_summary,
    rl_split,
    run_classification,
    sft_split,
    summarize,
    write_split_manifest,
)
from framewise.evalkit import QAItem
from framewise.testing import CallableChatBackend, HashEmbedder, make_turn


def outcome(correct: bool, used_agent: bool = False) -> ModelOutcome:
    return ModelOutcome(correct=correct, used_agent=used_agent)


class TestClassify:
    # (base_correct, teacher_correct, teacher_used_agent) -> label
    @pytest.mark.parametrize(
        "base_correct,teacher_correct,teacher_agent,expected",
        [
            (True, True, False, "Direct"),
            (True, True, True, "Direct"),
            (True, False, False, ANOMALY),
            (True, False, True, ANOMALY),
            (False, True, False, "Adaptive"),
            (False, True, True, "Active"),
            (False, False, False, "Active"),
            (False, False, True, "Active"),
        ],
    )
    def test_all_combinations(self, base_correct, teacher_correct, teacher_agent, expected):
        assert classify(outcome(base_correct), outcome(teacher_correct, teacher_agent)) == expected

    def test_base_with_agent_rejected(self):
        with pytest.raises(ValueError):
            classify(outcome(True, used_agent=True), outcome(True))


def combo_item(marker: str) -> QAItem:
    return QAItem(
        id=f"item-{marker}",
        video="synthetic://testvid:1000:23.97",
        question=f"[{marker}] What happens at the door?",
        answer_type="mc",
        gold="A",
        options=(("A", "it opens"), ("B", "it closes")),
    )


def marker_of(messages) -> str:
    text = messages[0].text
    start = text.index("[") + 1
    return text[start : text.index("]")]


def base_backend() -> CallableChatBackend:
    def fn(system, messages):
        marker = marker_of(messages)
        return make_turn(answer="A" if marker[0] == "T" else "B")

    return CallableChatBackend(fn)


def teacher_backend() -> CallableChatBackend:
    def fn(system, messages):
        marker = marker_of(messages)
        if marker == "FAIL":
            raise BackendError("scripted teacher outage")
        wants_agent = marker[2] == "T"
        already_called = sum(1 for m in messages if m.role == "assistant")
        if wants_agent and already_called == 0:
            return make_turn(uniform=(0, 500))
        return make_turn(answer="A" if marker[1] == "T" else "B")

    return CallableChatBackend(fn)


ALL_COMBOS = ["TTF", "TTT", "TFF", "TFT", "FTF", "FTT", "FFF", "FFT"]
EXPECTED = {
    "TTF": "Direct",
    "TTT": "Direct",
    "TFF": ANOMALY,
    "TFT": ANOMALY,
    "FTF": "Adaptive",
    "FTT": "Active",
    "FFF": "Active",
    "FFT": "Active",
}


class TestRunClassification:
    def test_eight_combo_battery(self):
        items = [combo_item(marker) for marker in ALL_COMBOS]
        labeled, excluded = run_classification(
            items, base_backend(), teacher_backend(), HashEmbedder(), parallel=4
        )
        assert excluded == []
        assert [entry.item.id for entry in labeled] == [i.id for i in items]
        for entry, marker in zip(labeled, ALL_COMBOS):
            assert entry.category == EXPECTED[marker], marker
            assert entry.base.used_agent is False
            assert entry.teacher.used_agent == (marker[2] == "T")
            # Base episodes never consume tool rounds.
            assert entry.base_trajectory.executed_calls == ()
            assert entry.base_trajectory.frames_delivered == 16

    def test_backend_failure_excludes_item(self):
        items = [combo_item("TTF"), combo_item("FAIL"), combo_item("FTT")]
        labeled, excluded = run_classification(
            items, base_backend(), teacher_backend(), HashEmbedder()
        )
        assert [entry.item.id for entry in labeled] == ["item-TTF", "item-FTT"]
        assert excluded == [("item-FAIL", "teacher backend failed")]

    def test_unopenable_video_excludes_item(self):
        bad = QAItem(
            id="bad-video",
            video="nosuchscheme://x",
            question="[TTF] q?",
            answer_type="mc",
            gold="A",
            options=(("A", "x"), ("B", "y")),
        )
        labeled, excluded = run_classification(
            [bad, combo_item("TTF")], base_backend(), teacher_backend(), HashEmbedder()
        )
        assert len(labeled) == 1
        assert excluded[0][0] == "bad-video"

    def test_serial_matches_parallel(self):
        items = [combo_item(marker) for marker in ALL_COMBOS]
        serial, _ = run_classification(
            items, base_backend(), teacher_backend(), HashEmbedder(), parallel=1
        )
        concurrent, _ = run_classification(
            items, base_backend(), teacher_backend(), HashEmbedder(), parallel=8
        )
        assert [e.category for e in serial] == [e.category for e in concurrent]


def labeled_battery() -> list[LabeledItem]:
    items = [combo_item(marker) for marker in ALL_COMBOS]
    labeled, _ = run_classification(
        items, base_backend(), teacher_backend(), HashEmbedder()
    )
    return labeled


class TestSplits:
    def test_sft_is_adaptive_and_active(self):
        labeled = labeled_battery()
        split = sft_split(labeled)
        assert {entry.category for entry in split} == {"Adaptive", "Active"}
        assert len(split) == 4

    def test_rl_excludes_only_anomalies(self):
        labeled = labeled_battery()
        split = rl_split(labeled)
        assert len(split) == 6
        assert all(entry.category != ANOMALY for entry in split)

    def test_manifest_round_trip(self, tmp_path):
        labeled = labeled_battery()
        path = tmp_path / "sft_split.jsonl"
        write_split_manifest(path, sft_split(labeled))
        lines = path.read_text(encoding="utf-8").splitlines()
        ids = [json.loads(line)["id"] for line in lines]
        assert ids == ["item-FTF", "item-FTT", "item-FFF", "item-FFT"]


class TestSummary:
    def test_counts_and_proportions(self):
        labeled = labeled_battery()
        summary = summarize(labeled, excluded=[("x", "reason")])
        assert summary["counts"] == {"Direct": 2, "Adaptive": 1, "Active": 3, ANOMALY: 2}
        assert summary["proportions"]["Direct"] == pytest.approx(100.0 * 2 / 6)
        assert summary["proportions"]["Adaptive"] == pytest.approx(100.0 * 1 / 6)
        assert summary["proportions"]["Active"] == pytest.approx(100.0 * 3 / 6)
        assert summary["excluded"] == 1
        assert summary["total"] == 9

    def test_empty(self):
        summary = summarize([])
        assert summary["proportions"] == {"Direct": 0.0, "Adaptive": 0.0, "Active": 0.0}

    def test_format_summary(self):
        labeled = labeled_battery()
        text = format_summary(summarize(labeled))
        assert text == "33.3% Direct, 16.7% Adaptive, 50.0% Active"
