"""Command-line entry points.

Endpoint resolution order everywhere: environment variables
``FRAMEWISE_CHAT_URL`` / ``FRAMEWISE_EMBED_URL`` / ``FRAMEWISE_API_KEY``
override flags, flags override the config file, the config file overrides
defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .backends import OpenAIChatClient, OpenAIEmbeddingClient, RemoteJudge
from .classifier import (
    format_summary,
    rl_split,
    run_classification,
    sft_split,
    summarize,
    write_split_manifest,
)
from .evalkit import Report, emit_report, load_dataset, run_benchmark
from .frame_store import open_video
from .orchestrator import (
    OrchestratorConfig,
    append_trajectory,
    read_trajectories,
    replay_episode,
    trajectory_to_json,
)
from .reward import total_reward
from .sampling import clip_sample, uniform_sample_exec

ENV_CHAT = "FRAMEWISE_CHAT_URL"
ENV_EMBED = "FRAMEWISE_EMBED_URL"
ENV_KEY = "FRAMEWISE_API_KEY"


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SystemExit(f"cannot read config {path}: {exc}")
    if not isinstance(data, dict):
        raise SystemExit(f"config {path} must hold a JSON object")
    return data


def _resolve(env_name: str | None, flag_value, config: dict, key: str, default=None):
    if env_name is not None:
        env_value = os.environ.get(env_name)
        if env_value:
            return env_value
    if flag_value is not None:
        return flag_value
    if config.get(key) is not None:
        return config[key]
    return default


def _orchestrator_config(config: dict, frame_budget: int | None = None) -> OrchestratorConfig:
    kwargs = {
        key: config[key]
        for key in ("n_initial", "max_rounds", "clip_n", "uniform_n", "frame_budget")
        if key in config
    }
    if frame_budget is not None:
        kwargs["frame_budget"] = frame_budget
    return OrchestratorConfig(**kwargs)


def _model_name(args, config: dict, key: str) -> str:
    return _resolve(None, getattr(args, key, None), config, key, "default")


def _chat_client(args, config: dict, flag: str = "chat_endpoint") -> OpenAIChatClient:
    url = _resolve(ENV_CHAT, getattr(args, flag, None), config, "chat_endpoint")
    if url is None:
        raise SystemExit(f"no chat endpoint: set --chat-endpoint or {ENV_CHAT}")
    key = _resolve(ENV_KEY, getattr(args, "api_key", None), config, "api_key")
    return OpenAIChatClient(url, api_key=key, model=_model_name(args, config, "chat_model"))


def _embed_client(args, config: dict) -> OpenAIEmbeddingClient | None:
    url = _resolve(ENV_EMBED, getattr(args, "embed_endpoint", None), config, "embed_endpoint")
    if url is None:
        return None
    key = _resolve(ENV_KEY, getattr(args, "api_key", None), config, "api_key")
    return OpenAIEmbeddingClient(url, api_key=key, model=_model_name(args, config, "embed_model"))


def _judge(args, config: dict) -> RemoteJudge | None:
    url = _resolve(None, getattr(args, "judge_endpoint", None), config, "judge_endpoint")
    if url is None:
        return None
    key = _resolve(ENV_KEY, getattr(args, "api_key", None), config, "api_key")
    chat = OpenAIChatClient(url, api_key=key, model=_model_name(args, config, "judge_model"))
    return RemoteJudge(chat)


def _cmd_eval(args) -> int:
    config = _load_config_file(args.config)
    items = load_dataset(args.dataset)
    chat = _chat_client(args, config)
    embedder = _embed_client(args, config)
    judge = _judge(args, config)
    run_config = _orchestrator_config(config, args.frame_budget)
    result = run_benchmark(
        items,
        chat,
        embedder,
        run_config,
        judge,
        parallel=args.parallel or int(config.get("parallel", 4)),
        out_dir=args.out,
    )
    baseline = None
    if args.baseline:
        baseline = Report.from_dict(json.loads(Path(args.baseline).read_text(encoding="utf-8")))
    print(emit_report(result.report, "markdown", baseline))
    for item_id, reason in result.failures:
        print(f"failed {item_id}: {reason}", file=sys.stderr)
    return 0


def _cmd_classify(args) -> int:
    config = _load_config_file(args.config)
    items = load_dataset(args.dataset)
    base = OpenAIChatClient(
        os.environ.get(ENV_CHAT) or args.base,
        api_key=_resolve(ENV_KEY, args.api_key, config, "api_key"),
        model=config.get("base_model", "default"),
    )
    teacher = OpenAIChatClient(
        args.teacher,
        api_key=_resolve(ENV_KEY, args.api_key, config, "api_key"),
        model=config.get("teacher_model", "default"),
    )
    embedder = _embed_client(args, config)
    judge = _judge(args, config)
    run_config = _orchestrator_config(config)
    labeled, excluded = run_classification(
        items,
        base,
        teacher,
        embedder,
        run_config,
        judge,
        parallel=args.parallel or int(config.get("parallel", 4)),
    )
    summary = summarize(labeled, excluded)
    print(format_summary(summary))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_split_manifest(out / "sft_split.jsonl", sft_split(labeled))
        write_split_manifest(out / "rl_split.jsonl", rl_split(labeled))
        with open(out / "labels.jsonl", "w", encoding="utf-8") as handle:
            for entry in labeled:
                handle.write(
                    json.dumps(
                        {
                            "id": entry.item.id,
                            "category": entry.category,
                            "base_correct": entry.base.correct,
                            "teacher_correct": entry.teacher.correct,
                            "teacher_used_agent": entry.teacher.used_agent,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
        (out / "summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8"
        )
        for entry in labeled:
            if entry.teacher_trajectory is not None:
                append_trajectory(out / "teacher_trajectories.jsonl", entry.teacher_trajectory)
    for item_id, reason in excluded:
        print(f"excluded {item_id}: {reason}", file=sys.stderr)
    return 0


def _read_categories(path: str) -> dict[str, str]:
    categories: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "id" not in obj or "category" not in obj:
                raise SystemExit(f"{path}:{number}: need id and category")
            categories[obj["id"]] = obj["category"]
    return categories


def _cmd_reward(args) -> int:
    config = _load_config_file(args.config)
    items = {item.id: item for item in load_dataset(args.dataset)}
    categories = _read_categories(args.categories)
    judge = _judge(args, config)
    records = read_trajectories(args.trajectories)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for record in records:
            trajectory = replay_episode(record)
            item = items.get(trajectory.item_id)
            if item is None:
                raise SystemExit(f"trajectory {trajectory.item_id!r} not in dataset")
            category = categories.get(trajectory.item_id)
            if category is None:
                raise SystemExit(f"trajectory {trajectory.item_id!r} not in categories file")
            breakdown = total_reward(trajectory, item, category, judge)
            out.write(
                json.dumps(
                    {
                        "item_id": trajectory.item_id,
                        "category": category,
                        "format_pass": breakdown.format_pass,
                        "r_format": breakdown.r_format,
                        "r_accuracy": breakdown.r_accuracy,
                        "r_behavior": breakdown.r_behavior,
                        "total": breakdown.total,
                        "violations": list(breakdown.violations),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_replay(args) -> int:
    records = read_trajectories(args.trajectory)
    failures = 0
    for position, record in enumerate(records):
        canonical = json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        try:
            replayed = trajectory_to_json(replay_episode(record))
        except Exception as exc:
            print(f"record {position}: replay failed: {exc}", file=sys.stderr)
            failures += 1
            continue
        if replayed != canonical:
            print(f"record {position}: replay differs from stored record", file=sys.stderr)
            failures += 1
        else:
            print(f"record {position}: OK")
    print(f"replayed {len(records) - failures}/{len(records)} records")
    return 1 if failures else 0


def _cmd_sample(args) -> int:
    config = _load_config_file(args.config)
    video = open_video(args.video)
    if args.mode == "uniform":
        result = uniform_sample_exec(video, args.start, args.end, args.n or 8)
        print(json.dumps({"indices": result.indices}))
        return 0
    if not args.prompt:
        raise SystemExit("clip mode requires --prompt")
    embedder = _embed_client(args, config)
    if embedder is None:
        raise SystemExit(f"clip mode needs an embedding endpoint: --embed-endpoint or {ENV_EMBED}")
    result = clip_sample(video, args.start, args.end, args.prompt, embedder, n=args.n or 4)
    print(
        json.dumps(
            {
                "indices": result.indices,
                "scores": [scored.score for scored in result.scored],
            }
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="framewise")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="run a benchmark dataset")
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--config")
    p_eval.add_argument("--chat-endpoint", dest="chat_endpoint")
    p_eval.add_argument("--embed-endpoint", dest="embed_endpoint")
    p_eval.add_argument("--judge-endpoint", dest="judge_endpoint")
    p_eval.add_argument("--chat-model", dest="chat_model")
    p_eval.add_argument("--embed-model", dest="embed_model")
    p_eval.add_argument("--judge-model", dest="judge_model")
    p_eval.add_argument("--api-key", dest="api_key")
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--parallel", type=int)
    p_eval.add_argument("--frame-budget", dest="frame_budget", type=int)
    p_eval.add_argument("--baseline")
    p_eval.set_defaults(fn=_cmd_eval)

    p_classify = sub.add_parser("classify", help="label items via base/teacher runs")
    p_classify.add_argument("--dataset", required=True)
    p_classify.add_argument("--base", required=True)
    p_classify.add_argument("--teacher", required=True)
    p_classify.add_argument("--embed-endpoint", dest="embed_endpoint")
    p_classify.add_argument("--judge-endpoint", dest="judge_endpoint")
    p_classify.add_argument("--embed-model", dest="embed_model")
    p_classify.add_argument("--judge-model", dest="judge_model")
    p_classify.add_argument("--api-key", dest="api_key")
    p_classify.add_argument("--config")
    p_classify.add_argument("--out")
    p_classify.add_argument("--parallel", type=int)
    p_classify.set_defaults(fn=_cmd_classify)

    p_reward = sub.add_parser("reward", help="score logged trajectories")
    p_reward.add_argument("--trajectories", required=True)
    p_reward.add_argument("--categories", required=True)
    p_reward.add_argument("--dataset", required=True)
    p_reward.add_argument("--judge-endpoint", dest="judge_endpoint")
    p_reward.add_argument("--judge-model", dest="judge_model")
    p_reward.add_argument("--api-key", dest="api_key")
    p_reward.add_argument("--config")
    p_reward.add_argument("--out")
    p_reward.set_defaults(fn=_cmd_reward)

    p_replay = sub.add_parser("replay", help="verify logged trajectories replay exactly")
    p_replay.add_argument("--trajectory", required=True)
    p_replay.set_defaults(fn=_cmd_replay)

    p_sample = sub.add_parser("sample", help="run one sampling tool directly")
    p_sample.add_argument("--video", required=True)
    p_sample.add_argument("--mode", choices=("clip", "uniform"), required=True)
    p_sample.add_argument("--start", type=int, required=True)
    p_sample.add_argument("--end", type=int, required=True)
    p_sample.add_argument("--prompt")
    p_sample.add_argument("--n", type=int)
    p_sample.add_argument("--embed-endpoint", dest="embed_endpoint")
    p_sample.add_argument("--embed-model", dest="embed_model")
    p_sample.add_argument("--api-key", dest="api_key")
    p_sample.add_argument("--config")
    p_sample.set_defaults(fn=_cmd_sample)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
