from __future__ import annotations

import json

import pytest

import framewise.testing  # noqa: F401  (registers the synthetic decoder)
from fake_server import FakeOpenAIServer
from framewise.cli import ENV_CHAT, ENV_EMBED, ENV_KEY, main
from framewise.evalkit import QAItem
from framewise.orchestrator import append_trajectory, run_episode
from framewise.testing import ScriptedChatBackend, make_turn

VIDEO = "synthetic://clivid:1000:23.97"


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in (ENV_CHAT, ENV_EMBED, ENV_KEY):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def server():
    srv = FakeOpenAIServer(dim=16)
    yield srv
    srv.close()


def dataset_row(item_id: str, gold: str = "A") -> dict:
    return {
        "id": item_id,
        "video": VIDEO,
        "question": f"({item_id}) what happens?",
        "type": "mc",
        "gold": gold,
        "options": {"A": "yes", "B": "no"},
    }


def write_dataset(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")


def answer_turn(label: str = "A") -> str:
    return make_turn(answer=label)


class TestSample:
    def test_uniform(self, capsys):
        rc = main(
            [
                "sample",
                "--video",
                "synthetic://v:16:1.0",
                "--mode",
                "uniform",
                "--start",
                "0",
                "--end",
                "16",
                "--n",
                "8",
            ]
        )
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out == {"indices": [1, 3, 5, 7, 9, 11, 13, 15]}

    def test_clip(self, server, capsys):
        rc = main(
            [
                "sample",
                "--video",
                VIDEO,
                "--mode",
                "clip",
                "--start",
                "0",
                "--end",
                "300",
                "--prompt",
                "door opening",
                "--embed-endpoint",
                server.base_url,
            ]
        )
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert len(out["indices"]) == 4
        assert len(out["scores"]) == 4
        assert all(0 <= i < 300 for i in out["indices"])
        assert out["indices"] == sorted(out["indices"])

    def test_clip_model_name_on_wire(self, server, capsys):
        # Single-model servers reject unknown ids, so the flag must
        # reach the request body.
        rc = main(
            [
                "sample",
                "--video",
                VIDEO,
                "--mode",
                "clip",
                "--start",
                "0",
                "--end",
                "300",
                "--prompt",
                "door opening",
                "--embed-endpoint",
                server.base_url,
                "--embed-model",
                "my-clip",
            ]
        )
        assert rc == 0
        capsys.readouterr()
        embed_payloads = [p for path, p in server.requests if path.endswith("/embeddings")]
        assert embed_payloads and all(p["model"] == "my-clip" for p in embed_payloads)

    def test_clip_requires_prompt(self, server):
        with pytest.raises(SystemExit, match="requires --prompt"):
            main(
                [
                    "sample",
                    "--video",
                    VIDEO,
                    "--mode",
                    "clip",
                    "--start",
                    "0",
                    "--end",
                    "300",
                    "--embed-endpoint",
                    server.base_url,
                ]
            )

    def test_clip_requires_embed_endpoint(self):
        with pytest.raises(SystemExit, match="clip mode needs an embedding endpoint"):
            main(
                [
                    "sample",
                    "--video",
                    VIDEO,
                    "--mode",
                    "clip",
                    "--start",
                    "0",
                    "--end",
                    "300",
                    "--prompt",
                    "x",
                ]
            )

    def test_embed_env_var_used(self, monkeypatch, server, capsys):
        monkeypatch.setenv(ENV_EMBED, server.base_url)
        rc = main(
            ["sample", "--video", VIDEO, "--mode", "clip", "--start", "0", "--end", "300", "--prompt", "x"]
        )
        assert rc == 0
        assert len(json.loads(capsys.readouterr().out)["indices"]) == 4


def make_item(item_id: str) -> QAItem:
    return QAItem(
        id=item_id,
        video=VIDEO,
        question=f"({item_id}) what happens?",
        answer_type="mc",
        gold="A",
        options=(("A", "yes"), ("B", "no")),
    )


def write_trajectories(path, specs):
    """specs: list of scripted turn lists, one episode per entry."""
    for item_id, turns in specs:
        video = framewise.testing.synthetic_video(1000, 23.97, "clivid")
        trajectory = run_episode(make_item(item_id), video, ScriptedChatBackend(turns))
        append_trajectory(path, trajectory)


class TestReplayCommand:
    def test_ok(self, tmp_path, capsys):
        path = tmp_path / "trajectories.jsonl"
        write_trajectories(
            path,
            [
                ("q1", [answer_turn()]),
                ("q2", [make_turn(uniform=(0, 500)), answer_turn()]),
            ],
        )
        rc = main(["replay", "--trajectory", str(path)])
        captured = capsys.readouterr()
        assert rc == 0
        assert "record 0: OK" in captured.out
        assert "record 1: OK" in captured.out
        assert "replayed 2/2 records" in captured.out

    def test_tampered_record_fails(self, tmp_path, capsys):
        path = tmp_path / "trajectories.jsonl"
        write_trajectories(path, [("q1", [answer_turn()])])
        record = json.loads(path.read_text(encoding="utf-8"))
        record["frames_delivered"] = 999
        path.write_text(json.dumps(record) + "\n", encoding="utf-8")
        rc = main(["replay", "--trajectory", str(path)])
        captured = capsys.readouterr()
        assert rc == 1
        assert "replay failed" in captured.err
        assert "replayed 0/1 records" in captured.out


class TestRewardCommand:
    def test_breakdowns_written(self, tmp_path):
        trajectories = tmp_path / "trajectories.jsonl"
        write_trajectories(
            trajectories,
            [
                ("direct", [answer_turn("A")]),
                ("active", [make_turn(uniform=(0, 500)), answer_turn("B")]),
            ],
        )
        dataset = tmp_path / "data.jsonl"
        write_dataset(dataset, [dataset_row("direct"), dataset_row("active")])
        categories = tmp_path / "categories.jsonl"
        categories.write_text(
            json.dumps({"id": "direct", "category": "Direct"})
            + "\n"
            + json.dumps({"id": "active", "category": "Active"})
            + "\n",
            encoding="utf-8",
        )
        out = tmp_path / "rewards.jsonl"
        rc = main(
            [
                "reward",
                "--trajectories",
                str(trajectories),
                "--categories",
                str(categories),
                "--dataset",
                str(dataset),
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        rows = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
        by_id = {row["item_id"]: row for row in rows}
        assert by_id["direct"]["total"] == pytest.approx(1.55)
        assert by_id["direct"]["format_pass"] is True
        assert by_id["active"]["total"] == pytest.approx(0.25)
        assert by_id["active"]["r_behavior"] == pytest.approx(0.2)

    def test_unknown_item_rejected(self, tmp_path):
        trajectories = tmp_path / "trajectories.jsonl"
        write_trajectories(trajectories, [("ghost", [answer_turn()])])
        dataset = tmp_path / "data.jsonl"
        write_dataset(dataset, [dataset_row("other")])
        categories = tmp_path / "categories.jsonl"
        categories.write_text(json.dumps({"id": "ghost", "category": "Direct"}) + "\n", encoding="utf-8")
        with pytest.raises(SystemExit, match="not in dataset"):
            main(
                [
                    "reward",
                    "--trajectories",
                    str(trajectories),
                    "--categories",
                    str(categories),
                    "--dataset",
                    str(dataset),
                ]
            )


class TestEvalCommand:
    def test_end_to_end(self, tmp_path, server, capsys):
        dataset = tmp_path / "data.jsonl"
        write_dataset(dataset, [dataset_row("q1"), dataset_row("q2")])
        server.chat_script.extend([answer_turn(), answer_turn()])
        out = tmp_path / "run"
        rc = main(
            [
                "eval",
                "--dataset",
                str(dataset),
                "--chat-endpoint",
                server.base_url,
                "--out",
                str(out),
                "--parallel",
                "1",
            ]
        )
        captured = capsys.readouterr()
        assert rc == 0
        assert "| this | 100.0 | 16.0 |" in captured.out
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert report["accuracy"] == 100.0
        assert (out / "trajectories.jsonl").exists()

    def test_baseline_delta_row(self, tmp_path, server, capsys):
        dataset = tmp_path / "data.jsonl"
        write_dataset(dataset, [dataset_row("q1")])
        server.chat_script.append(answer_turn())
        baseline = tmp_path / "baseline.json"
        baseline.write_text(
            json.dumps({"accuracy": 91.0, "avg_frames": 24.0}), encoding="utf-8"
        )
        rc = main(
            [
                "eval",
                "--dataset",
                str(dataset),
                "--chat-endpoint",
                server.base_url,
                "--out",
                str(tmp_path / "run"),
                "--parallel",
                "1",
                "--baseline",
                str(baseline),
            ]
        )
        captured = capsys.readouterr()
        assert rc == 0
        assert "| Δ vs baseline | +9.0 | -33% |" in captured.out

    def test_failures_go_to_stderr(self, tmp_path, server, capsys):
        dataset = tmp_path / "data.jsonl"
        write_dataset(dataset, [dataset_row("q1")])
        server.fail_status = 500
        rc = main(
            [
                "eval",
                "--dataset",
                str(dataset),
                "--chat-endpoint",
                server.base_url,
                "--out",
                str(tmp_path / "run"),
                "--parallel",
                "1",
            ]
        )
        captured = capsys.readouterr()
        assert rc == 0
        assert "failed q1: backend failed" in captured.err
        assert "| this | 0.0 |" in captured.out

    def test_env_overrides_flag(self, tmp_path, server, monkeypatch, capsys):
        dataset = tmp_path / "data.jsonl"
        write_dataset(dataset, [dataset_row("q1")])
        server.chat_script.append(answer_turn())
        monkeypatch.setenv(ENV_CHAT, server.base_url)
        rc = main(
            [
                "eval",
                "--dataset",
                str(dataset),
                "--chat-endpoint",
                "http://127.0.0.1:9",  # dead; env must win
                "--out",
                str(tmp_path / "run"),
                "--parallel",
                "1",
            ]
        )
        assert rc == 0
        assert "| this | 100.0 |" in capsys.readouterr().out

    def test_config_file_supplies_endpoint_and_shape(self, tmp_path, server, capsys):
        dataset = tmp_path / "data.jsonl"
        write_dataset(dataset, [dataset_row("q1")])
        server.chat_script.append(answer_turn())
        config = tmp_path / "config.json"
        config.write_text(
            json.dumps({"chat_endpoint": server.base_url, "n_initial": 4}), encoding="utf-8"
        )
        rc = main(
            [
                "eval",
                "--dataset",
                str(dataset),
                "--config",
                str(config),
                "--out",
                str(tmp_path / "run"),
                "--parallel",
                "1",
            ]
        )
        captured = capsys.readouterr()
        assert rc == 0
        assert "| this | 100.0 | 4.0 |" in captured.out

    def test_missing_endpoint_exits(self, tmp_path):
        dataset = tmp_path / "data.jsonl"
        write_dataset(dataset, [dataset_row("q1")])
        with pytest.raises(SystemExit, match="no chat endpoint"):
            main(["eval", "--dataset", str(dataset), "--out", str(tmp_path / "run")])


class TestClassifyCommand:
    def test_end_to_end(self, tmp_path, capsys):
        base_srv = FakeOpenAIServer()
        teacher_srv = FakeOpenAIServer()
        try:
            dataset = tmp_path / "data.jsonl"
            write_dataset(dataset, [dataset_row("q1"), dataset_row("q2")])
            # q1: both right without tools -> Direct.
            # q2: base wrong, teacher right after a tool call -> Active.
            base_srv.chat_script.extend([answer_turn("A"), answer_turn("B")])
            teacher_srv.chat_script.extend(
                [answer_turn("A"), make_turn(uniform=(0, 500)), answer_turn("A")]
            )
            out = tmp_path / "labels"
            rc = main(
                [
                    "classify",
                    "--dataset",
                    str(dataset),
                    "--base",
                    base_srv.base_url,
                    "--teacher",
                    teacher_srv.base_url,
                    "--out",
                    str(out),
                    "--parallel",
                    "1",
                ]
            )
            captured = capsys.readouterr()
            assert rc == 0
            assert captured.out.strip() == "50.0% Direct, 0.0% Adaptive, 50.0% Active"
            labels = [
                json.loads(line)
                for line in (out / "labels.jsonl").read_text(encoding="utf-8").splitlines()
            ]
            assert labels == [
                {
                    "id": "q1",
                    "category": "Direct",
                    "base_correct": True,
                    "teacher_correct": True,
                    "teacher_used_agent": False,
                },
                {
                    "id": "q2",
                    "category": "Active",
                    "base_correct": False,
                    "teacher_correct": True,
                    "teacher_used_agent": True,
                },
            ]
            sft = [
                json.loads(line)["id"]
                for line in (out / "sft_split.jsonl").read_text(encoding="utf-8").splitlines()
            ]
            assert sft == ["q2"]
            rl = [
                json.loads(line)["id"]
                for line in (out / "rl_split.jsonl").read_text(encoding="utf-8").splitlines()
            ]
            assert rl == ["q1", "q2"]
            summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
            assert summary["counts"]["Direct"] == 1
            assert summary["counts"]["Active"] == 1
            teacher_records = (out / "teacher_trajectories.jsonl").read_text(
                encoding="utf-8"
            ).splitlines()
            assert len(teacher_records) == 2
        finally:
            base_srv.close()
            teacher_srv.close()
