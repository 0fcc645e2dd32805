"""Walk through the two frame samplers on a synthetic video.

The uniform sampler picks bin centers over a frame interval. The clip
sampler embeds a candidate pool and a text prompt, then keeps the top
scoring frames. Everything here runs offline against the hash embedder
from framewise.testing, so the numbers are reproducible.
"""

from framewise.frame_store import get_frames, uniform_indices
from framewise.sampling import (
    InvalidSegmentError,
    candidate_count,
    clip_sample,
    uniform_sample_exec,
)
from framewise.testing import HashEmbedder, synthetic_video

video = synthetic_video(1000, 23.97, "demo")
print(f"video: {video.id} ({video.total_frames} frames at {video.fps} fps)")

# Bin centers of [0, 16) with 8 bins land on the odd indices.
print("\nuniform bin centers over [0, 16), n=8:")
print(" ", uniform_indices(0, 16, 8))

result = uniform_sample_exec(video, 0, 1000, n=8)
print("uniform_sample_exec over the whole video:")
print(" ", result.indices)

# Narrow intervals collapse to fewer frames instead of erroring.
narrow = uniform_sample_exec(video, 5, 8, n=8)
print(f"narrow interval [5, 8) gives {narrow.indices} (duplicates removed)")

# The clip sampler scores a candidate pool against a prompt. Pool size
# depends only on interval width: everything below 128 frames is taken
# whole, long videos cap at 256.
for width in (60, 128, 5000, 20000):
    print(f"candidate pool for a {width}-frame interval: {candidate_count(0, width)}")

embedder = HashEmbedder()
picked = clip_sample(video, 0, 1000, "a red coat near the door", embedder, n=4)
print("\nclip_sample top 4 for 'a red coat near the door':")
for scored in picked.scored:
    print(f"  frame {scored.index:4d}  score {scored.score:+.4f}")

# A different prompt reranks the same pool.
other = clip_sample(video, 0, 1000, "crane lifting cargo", embedder, n=4)
print(f"different prompt picks {other.indices}")

# Segments must leave room for n distinct frames; the error message is
# part of the wire contract with the model.
try:
    clip_sample(video, 100, 103, "anything", embedder, n=4)
except InvalidSegmentError as exc:
    print(f"\nsegment [100, 103) with n=4 is rejected: {exc}")

frames = get_frames(video, picked.indices)
print(f"fetched {len(frames)} frames, first payload: {frames[0].payload[:20]!r}")
