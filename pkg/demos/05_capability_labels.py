"""Label questions by comparing a frozen base model with a tool-using teacher.

Direct means the base model already answers from the initial frames.
Adaptive means only the teacher answers, without touching tools. Active
means tools were either needed or the question stays hard. Items the
base gets right but the teacher gets wrong are anomalies and leave the
pool entirely.
"""

from framewise.classifier import (
    format_summary,
    rl_split,
    run_classification,
    sft_split,
    summarize,
)
from framewise.evalkit import QAItem
from framewise.testing import CallableChatBackend, HashEmbedder, make_turn

# Question ids carry a three-letter script: base verdict, teacher
# verdict, teacher tool usage. The scripted backends read it back out,
# which gives us one item per interesting combination.
SCRIPTS = ["TTF", "TFT", "FTF", "FTT", "FFF", "FFT", "TTT", "FTT"]

items = [
    QAItem(
        id=f"q{i}-{script}",
        video="synthetic://survey:1200:25.0",
        question=f"[{script}] question {i}?",
        answer_type="mc",
        gold="A",
        options=(("A", "yes"), ("B", "no")),
    )
    for i, script in enumerate(SCRIPTS)
]


def script_of(messages):
    text = messages[0].text
    return text[text.index("[") + 1 : text.index("]")]


def base_model(system, messages):
    return make_turn(answer="A" if script_of(messages)[0] == "T" else "B")


def teacher_model(system, messages):
    script = script_of(messages)
    already_spoke = sum(1 for m in messages if m.role == "assistant")
    if script[2] == "T" and already_spoke == 0:
        return make_turn(uniform=(0, 600))
    return make_turn(answer="A" if script[1] == "T" else "B")


labeled, excluded = run_classification(
    items,
    CallableChatBackend(base_model),
    CallableChatBackend(teacher_model),
    HashEmbedder(),
)

print("per-item labels:")
for entry in labeled:
    print(f"  {entry.item.id:10s} -> {entry.category}")
print(f"excluded: {excluded}")

summary = summarize(labeled, excluded)
print("\n" + format_summary(summary))

sft = sft_split(labeled)
rl = rl_split(labeled)
print(f"\nSFT split ({len(sft)} items, no Direct):", [e.item.id for e in sft])
print(f"RL split ({len(rl)} items, anomalies dropped):", [e.item.id for e in rl])
