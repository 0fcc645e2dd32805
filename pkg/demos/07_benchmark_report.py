"""Benchmark a scripted policy and render the comparison report.

run_benchmark drives one episode per dataset item, grades the answers,
and averages delivered frames. With a baseline report, the markdown
table adds a delta row: accuracy as signed points, frames as a signed
percent.
"""

from framewise.evalkit import QAItem, Report, emit_report, run_benchmark
from framewise.testing import CallableChatBackend, make_turn

# Even items answer right away; odd items sample once first and the
# ones divisible by three answer wrong.
items = [
    QAItem(
        id=f"bench-{i}",
        video="synthetic://bench:1000:25.0",
        question=f"({i}) what is shown?",
        answer_type="mc",
        gold="A",
        options=(("A", "a crane"), ("B", "a truck")),
        question_category="counting" if i % 2 else "existence",
    )
    for i in range(8)
]


def policy(system, messages):
    text = messages[0].text
    n = int(text[text.index("(") + 1 : text.index(")")])
    prior = sum(1 for m in messages if m.role == "assistant")
    if n % 2 and prior == 0:
        return make_turn(uniform=(n * 100, n * 100 + 400))
    return make_turn(answer="B" if n % 3 == 0 else "A")


result = run_benchmark(items, CallableChatBackend(policy), parallel=4)
print(f"accuracy {result.report.accuracy}%  avg frames {result.report.avg_frames}")
print(f"completed {result.report.completed}/{result.report.items}, "
      f"failures {result.report.failures}")

print("\nmarkdown report against a weaker baseline:")
baseline = Report(accuracy=50.0, avg_frames=32.0)
print(emit_report(result.report, "markdown", baseline))

print("json form:")
print(emit_report(result.report, "json"))
