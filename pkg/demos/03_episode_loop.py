"""Run one orchestrated episode against a scripted model.

The loop feeds the model an initial uniform spread of frames, executes
whatever tool calls it makes, and stops at an answer or after the round
cap. A scripted backend stands in for the model so the episode is fully
deterministic; the trajectory log replays to the byte.
"""

import json

from framewise.evalkit import QAItem
from framewise.orchestrator import (
    replay_episode,
    run_episode,
    trajectory_to_json,
)
from framewise.testing import HashEmbedder, ScriptedChatBackend, make_turn, synthetic_video

item = QAItem(
    id="demo-1",
    video="synthetic://kitchen:2400:24.0",
    question="What does the cook add after the onions?",
    answer_type="mc",
    gold="B",
    options=(("A", "salt"), ("B", "garlic"), ("C", "stock")),
)
video = synthetic_video(2400, 24.0, "kitchen")

# The script below zooms into the middle, retrieves frames for a text
# cue, then answers. One duplicate call is included to show the loop
# rejecting it without spending frames.
backend = ScriptedChatBackend(
    [
        make_turn(thinking="Start is calm, look at the middle.", uniform=(800, 1600)),
        make_turn(thinking="Same range again.", uniform=(801, 1601)),
        make_turn(thinking="Find the garlic moment.", clip=(900, 1500, "hand adding garlic")),
        make_turn(thinking="Frame 1142 shows garlic.", answer="B"),
    ]
)

trajectory = run_episode(item, video, backend, HashEmbedder())

print(f"terminal: {trajectory.terminal}")
print(f"final answer: {trajectory.final_answer}")
print(f"frames delivered: {trajectory.frames_delivered} (16 initial + 8 uniform + 4 clip)")
print("\ntool calls as the loop saw them:")
for record in trajectory.turns:
    if record.tool_result is None:
        continue
    call = record.parsed.action
    print(f"  {call.name}({call.start_frame}, {call.end_frame}) -> {record.tool_result.status}")

# The log line is canonical JSON; replaying it re-executes every step
# and must reproduce the record exactly.
line = trajectory_to_json(trajectory)
record = json.loads(line)
print(f"\nlog line is {len(line)} bytes")
print("replay is byte-identical:", trajectory_to_json(replay_episode(record)) == line)
