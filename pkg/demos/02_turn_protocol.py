"""Model turns on the wire: tags, tool-call JSON, and the format gate."""

from framewise.protocol import (
    Answer,
    ParsedTurn,
    ToolCall,
    is_duplicate_call,
    parse_turn,
    render_turn,
    validate_trajectory_format,
)

# A well-formed tool turn is a thinking block followed by one JSON call.
raw = (
    "<thinking>The question is about the ending, sample the last part.</thinking>"
    '<tool_call>{"name": "uniform_sample", '
    '"arguments": {"start_frame": 800, "end_frame": 1000}}</tool_call>'
)
turn = parse_turn(raw)
print("parsed action:", turn.action)
print("round trips:", parse_turn(render_turn(turn)) == turn)

answer = ParsedTurn(thinking="Seen enough.", action=Answer(text="B"))
print("rendered answer turn:", render_turn(answer))

# Near-identical ranges count as duplicates (within one frame on both
# ends); clip calls repeat only when the prompt text repeats.
prior = [ToolCall(name="uniform_sample", start_frame=100, end_frame=200)]
probe = ToolCall(name="uniform_sample", start_frame=101, end_frame=199)
print("\nshifted-by-one range is a duplicate:", is_duplicate_call(probe, prior))
fresh = ToolCall(name="uniform_sample", start_frame=300, end_frame=400)
print("disjoint range is a duplicate:", is_duplicate_call(fresh, prior))

# The gate checks a whole trajectory's raw outputs and names each
# violated rule once, in a fixed order.
good = [raw, render_turn(answer)]
verdict = validate_trajectory_format(good)
print("\nclean trajectory passes:", verdict.passed)

bad = [
    "<thinking>no closing tag<tool_call>{}</tool_call>",
    '<thinking>t</thinking><tool_call>{"name": "uniform_sample"}</tool_call>',
    "<thinking>t</thinking><answer></answer>",
]
verdict = validate_trajectory_format(bad)
print("broken trajectory passes:", verdict.passed)
for rule in verdict.violations:
    print("  violated:", rule)

# Every thinking block needs a matching action block somewhere in the
# trajectory; a bare monologue breaks the count equation.
monologue = [raw, "<thinking>still not sure what to do</thinking>"]
print("bare thinking turn:", validate_trajectory_format(monologue).violations)
