# %% [markdown]
# # Streaming read/write decisions
#
# Speech generation may start as soon as the running hidden state looks
# like a sentence boundary. Similarity to a trigger embedding must exceed
# a threshold and peak inside a centered window of 5 positions.

# %%
import numpy as np

from echoxkit.streamer import TriggerConfig, latency_report, similarity_series, stream_segment

rng = np.random.default_rng(3)
d = 16
period = rng.normal(size=d)

# %% [markdown]
# A fake response of 60 positions with a boundary-like state every 12 or so.

# %%
H = rng.normal(size=(60, d))
H -= np.outer(H @ period / (period @ period), period) * 1.2
for t in (11, 23, 37, 50):
    H[t] = period + rng.normal(0, 0.3, d)

config = TriggerConfig(period, threshold=0.1, window=5)
s = similarity_series(H, config)
print(np.round(s[:14], 2))

# %%
decisions, segments = stream_segment(H, config)
print("writes at:", [d.position for d in decisions if d.action == "WRITE"])
print("segments:", [(r.start, r.stop) for r in segments])

stream = latency_report(decisions, config.window)
offline = latency_report(decisions, config.window, offline=True)
print("tokens before speech starts: streaming", stream["latency"], "offline", offline["latency"])
