"""Group-standardized advantages and the trainer export file."""

import json
import tempfile
from pathlib import Path

from framewise.grpo import (
    IncompleteGroupError,
    RLSample,
    RewardGroup,
    clipped_term,
    export_rl_batch,
    group_advantages,
)

# Rewards standardize within their prompt group: subtract the mean,
# divide by population std plus a small eps. Better-than-group-average
# rollouts get positive advantage regardless of the absolute scale.
group = RewardGroup("prompt-7", (1.55, 0.25, 0.8, 0.05))
adv = group_advantages(group)
for reward, a in zip(group.rewards, adv.advantages):
    print(f"  reward {reward:5.2f} -> advantage {a:+.4f}")
print(f"  sum of advantages: {sum(adv.advantages):+.2e}")

# A group with no spread carries no training signal.
flat = group_advantages(RewardGroup("prompt-8", (0.8, 0.8, 0.8)))
print(f"constant group advantages: {flat.advantages}")

# The per-sample surrogate clips the probability ratio before taking
# the pessimistic minimum.
print(f"\nclipped_term(rho=1.5, A=+1.0, eps=0.2) = {clipped_term(1.5, 1.0, 0.2)}")
print(f"clipped_term(rho=0.5, A=-1.0, eps=0.2) = {clipped_term(0.5, -1.0, 0.2)}")

# The export groups samples by prompt, recomputes advantages, and
# writes one canonical JSON line per sample.
samples = [
    RLSample("p1", "Active", {"id": "t1"}, 1.2),
    RLSample("p1", "Active", {"id": "t2"}, 0.3),
    RLSample("p2", "Adaptive", {"id": "t3"}, 0.55),
    RLSample("p2", "Adaptive", {"id": "t4"}, 1.0),
]
out = Path(tempfile.mkdtemp()) / "batch.jsonl"
written = export_rl_batch(samples, out)
print(f"\nwrote {written} records to {out.name}:")
for line in out.read_text(encoding="utf-8").splitlines():
    record = json.loads(line)
    print(f"  {record['prompt_id']} {record['trajectory']['id']} "
          f"adv {record['advantage']:+.4f}")

# Undersized or reward-less groups abort the export before anything is
# written.
try:
    export_rl_batch([RLSample("solo", "Active", {"id": "t9"}, 0.9)], out)
except IncompleteGroupError as exc:
    print(f"\nexport refused: {exc}")
