"""The reward stack: format gate, accuracy, and the behavior bonus.

Total reward is gate * (0.05 + accuracy + behavior). The behavior term
pays each question category for the tool usage appropriate to it, so a
model cannot farm the bonus by always calling tools or never calling
them.
"""

from framewise.evalkit import QAItem
from framewise.reward import behavior_reward, total_reward
from framewise.testing import ScriptedChatBackend, make_turn, synthetic_video
from framewise.orchestrator import run_episode

print("behavior bonus by (category, used_agent, correct):")
for category in ("Direct", "Adaptive", "Active"):
    for used_agent in (False, True):
        for correct in (False, True):
            bonus = behavior_reward(category, used_agent, correct)
            mark = f"{bonus:+.1f}" if bonus else "  0 "
            print(f"  {category:8s} agent={used_agent!s:5s} correct={correct!s:5s} -> {mark}")

item = QAItem(
    id="r1",
    video="synthetic://testvid:1000:23.97",
    question="What happens at the door?",
    answer_type="mc",
    gold="A",
    options=(("A", "a delivery"), ("B", "nothing")),
)
video = synthetic_video(1000, 23.97, "testvid")


def episode(turns):
    return run_episode(item, video, ScriptedChatBackend(turns))


# Ceiling: a Direct question answered correctly with no tool calls.
best = total_reward(episode([make_turn(answer="A")]), item, "Direct")
print(f"\ndirect hit: format {best.r_format} + acc {best.r_accuracy} "
      f"+ behavior {best.r_behavior} = {best.total}")

# An Active question answered wrong, but the model at least explored.
probe = total_reward(
    episode([make_turn(uniform=(0, 500)), make_turn(answer="B")]), item, "Active"
)
print(f"wrong but exploring: total {probe.total} (behavior {probe.r_behavior})")

# Same wrong answer without exploring earns only the format float.
lazy = total_reward(episode([make_turn(answer="B")]), item, "Active")
print(f"wrong and lazy: total {lazy.total}")

# The gate zeroes everything, even a correct answer.
broken = episode([make_turn(answer="A", trailing="</answer>")])
gated = total_reward(broken, item, "Direct")
print(f"\nmalformed output: passed={gated.format_pass} "
      f"violations={list(gated.violations)} total={gated.total}")
