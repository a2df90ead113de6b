# %% [markdown]
# # Echo training on toy decoders
#
# A speech-to-text model transcribes each turn greedily. A frozen
# text-to-codec model turns that transcript into speech-token pseudo-labels,
# and an echo decoder initialized from it learns to predict them from the
# adapted hidden states.

# %%
import numpy as np

from echoxkit.pipeline import ToySystem, greedy_decode

system = ToySystem.build(seed=0)
print("echo decoder starts as a copy of the codec model:",
      system.echo.checksum() == system.t2c.checksum())

# %%
frozen = system.t2c.checksum()
for step, batch, losses in system.run(20):
    if step % 5 == 0:
        print(step, "X'", batch.x_prime[:6], "Y'", batch.y_prime[:6],
              {k: round(v, 3) for k, v in losses.to_dict().items()})
print("frozen codec model untouched:", system.t2c.checksum() == frozen)

# %% [markdown]
# The pseudo-labels are reproducible from the transcript alone.

# %%
again = greedy_decode(system.t2c, np.asarray(batch.x_prime), 48, eos=0)
print(again[: len(batch.y_prime)] == batch.y_prime)
