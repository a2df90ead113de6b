# %% [markdown]
# # Transcript filtering and corpus statistics
#
# Synthesized speech is transcribed again by a recognizer and kept only
# when the word error rate stays strictly below 5%.

# %%
from echoxkit.dataqc import TranscriptPair, corpus_stats, filter_corpus, format_stats, wer

print(wer("the cat sat", "the bat sat"))

pairs = [
    TranscriptPair.from_text("Turn left at the next light.", "turn left at the next light", "a"),
    TranscriptPair.from_text("The cat sat on the mat", "the cat sat on a mat", "b"),
    TranscriptPair.from_text(" ".join(["go"] * 20), " ".join(["go"] * 19 + ["no"]), "c"),
]
kept, report = filter_corpus(pairs, threshold=0.05)
print([p.id for p in kept], report["histogram"])

# %% [markdown]
# Per-task totals for a training manifest.

# %%
rows = [
    ("librispeech", "ASR", 281241, 960), ("mls", "ASR", 723636, 3000),
    ("audioqa-1m", "TTS", 178576, 989), ("speechinstruct", "TTS", 31563, 84),
    ("hh-rlhf-speech", "TTS", 124945, 656), ("sharechatx", "SQA", 43223, 178),
    ("magpie-pro-speech-plus", "SQA", 117000, 327),
]
stats = corpus_stats({"id": i, "task": t, "size": n, "duration_hours": h} for i, t, n, h in rows)
print(format_stats(stats))
