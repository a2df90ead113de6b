# %% [markdown]
# # From frames to unit-language tokens
#
# Continuous frames are quantized against a k-means codebook, adjacent
# repeats are collapsed, and a span-count model groups the units into
# longer tokens by dynamic programming.

# %%
import numpy as np

from echoxkit import assign, dedup_adjacent, segment, train_codebook, train_span_model
from echoxkit.segmenter import TokenVocabulary, compression_report
from echoxkit.synthetic import motif_corpus

rng = np.random.default_rng(0)

# %% [markdown]
# Frames from a few planted "phones". Each phone lasts several frames, the
# way a speech encoder emits 20 ms features.

# %%
phones = rng.normal(0, 4, size=(8, 6))
script = rng.integers(0, 8, size=40)
frames = np.concatenate([phones[p] + rng.normal(0, 0.2, (int(rng.integers(2, 5)), 6)) for p in script])
codebook = train_codebook(frames, k=8, seed=0)
units = assign(frames, codebook, id="demo")
print(len(units), "frames ->", len(dedup_adjacent(units)), "deduplicated units")
print("inertia per iteration:", np.round(codebook.inertia_history, 2))

# %% [markdown]
# On a larger synthetic corpus built from recurring motifs the segmenter
# learns to emit the motifs as single tokens.

# %%
corpus = [dedup_adjacent(s) for s in motif_corpus(seed=1)]
model = train_span_model(corpus, K=4, alpha=0.01)
seg = segment(corpus[0], model)
print("units :", list(corpus[0].units)[:24])
print("tokens:", [list(t) for t in seg.tokens][:8])

report = compression_report(corpus, model)
print(f"mean units {report['mean_units']:.2f}, mean tokens {report['mean_tokens']:.2f}, "
      f"ratio {report['ratio']:.3f}")

# %% [markdown]
# Tokens get integer IDs from a vocabulary; spans that never made it into
# the table are split back into known pieces.

# %%
vocab = TokenVocabulary.build([segment(s, model) for s in corpus], corpus[0].vocab_size, size=80)
ids = vocab.encode(seg.tokens)
assert vocab.decode(ids) == list(corpus[0].units)
print(len(vocab), "token types; first utterance as IDs:", ids[:10])
