"""Agentic video frame sampling runtime.

A vision-language model iteratively decides whether the frames it has seen
answer a question; when they do not, it calls one of two sampling tools,
semantic retrieval or uniform temporal sampling, and reasons again over the
returned frames. This package provides the episode loop, the structured turn
protocol and its strict format gate, trajectory scoring with behavior-aware
bonuses, the dual-model item classifier, group-relative advantage utilities,
and benchmark tooling, all behind pluggable chat/embedding/judge backends.
"""

from .backends import (
    BackendError,
    OpenAIChatClient,
    OpenAIEmbeddingClient,
    RemoteJudge,
)
from .classifier import (
    ANOMALY,
    LabeledItem,
    ModelOutcome,
    classify,
    rl_split,
    run_classification,
    sft_split,
)
from .evalkit import (
    DatasetError,
    QAItem,
    Report,
    emit_report,
    load_dataset,
    run_benchmark,
)
from .frame_store import (
    Frame,
    FrameRangeError,
    FrameStoreError,
    VideoOpenError,
    VideoRef,
    get_frames,
    open_video,
    register_decoder,
    uniform_indices,
)
from .grpo import (
    AdvantageGroup,
    IncompleteGroupError,
    RewardGroup,
    RLSample,
    clipped_term,
    export_rl_batch,
    group_advantages,
)
from .orchestrator import (
    OrchestratorConfig,
    ReplayError,
    Trajectory,
    append_trajectory,
    read_trajectories,
    replay_episode,
    run_episode,
    trajectory_to_json,
)
from .protocol import (
    Answer,
    FormatVerdict,
    ParsedTurn,
    PromptMessage,
    ToolCall,
    TurnParseError,
    build_initial_prompt,
    build_system_prompt,
    build_turn_prompt,
    is_duplicate_call,
    parse_turn,
    validate_trajectory_format,
)
from .reward import (
    RewardBreakdown,
    MissingJudgeError,
    accuracy_reward,
    behavior_reward,
    total_reward,
)
from .sampling import (
    ClipSampleResult,
    EmbeddingCache,
    EmbeddingError,
    InvalidSegmentError,
    ScoredFrame,
    candidate_count,
    clip_sample,
    uniform_sample_exec,
)

__version__ = "0.1.0"

__all__ = [
    "ANOMALY",
    "AdvantageGroup",
    "Answer",
    "BackendError",
    "ClipSampleResult",
    "DatasetError",
    "EmbeddingCache",
    "EmbeddingError",
    "FormatVerdict",
    "Frame",
    "FrameRangeError",
    "FrameStoreError",
    "IncompleteGroupError",
    "InvalidSegmentError",
    "LabeledItem",
    "MissingJudgeError",
    "ModelOutcome",
    "OpenAIChatClient",
    "OpenAIEmbeddingClient",
    "OrchestratorConfig",
    "ParsedTurn",
    "PromptMessage",
    "QAItem",
    "RemoteJudge",
    "ReplayError",
    "Report",
    "RewardBreakdown",
    "RewardGroup",
    "RLSample",
    "ScoredFrame",
    "ToolCall",
    "Trajectory",
    "TurnParseError",
    "VideoOpenError",
    "VideoRef",
    "accuracy_reward",
    "append_trajectory",
    "behavior_reward",
    "build_initial_prompt",
    "build_system_prompt",
    "build_turn_prompt",
    "candidate_count",
    "classify",
    "clip_sample",
    "clipped_term",
    "emit_report",
    "export_rl_batch",
    "get_frames",
    "group_advantages",
    "is_duplicate_call",
    "load_dataset",
    "open_video",
    "parse_turn",
    "read_trajectories",
    "register_decoder",
    "replay_episode",
    "rl_split",
    "run_benchmark",
    "run_classification",
    "run_episode",
    "sft_split",
    "total_reward",
    "trajectory_to_json",
    "uniform_indices",
    "uniform_sample_exec",
    "validate_trajectory_format",
]
