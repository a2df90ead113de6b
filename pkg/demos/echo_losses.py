# %% [markdown]
# # Loss kernels and their gradients
#
# Cross-entropy scores the echo decoder and the speech-to-text head. A
# cosine loss pulls adapted hidden states toward text embeddings. All
# three combine into one weighted objective.

# %%
import numpy as np

from echoxkit.losses import AdapterParams, combined_loss, cross_entropy, denoising_loss, echo_loss, grad_check

rng = np.random.default_rng(0)

# %%
logits = np.zeros((3, 4))
print("uniform over 4 classes, 3 steps:", echo_loss(logits, [0, 1, 2]), "=", 3 * np.log(4))

# %% [markdown]
# The denoising adapter is a one-hidden-layer tanh network. Its loss is
# the summed `1 - cos` between adapter outputs and embeddings.

# %%
H = rng.normal(size=(4, 6))
E = rng.normal(size=(4, 5))
adapter = AdapterParams.init(6, 5, hidden=8, seed=1)
loss, grad = denoising_loss(H, adapter, E)
print("denoising loss:", round(loss, 4), "(bounded by", 2 * len(H), ")")


def as_flat(flat):
    value, g = denoising_loss(H, adapter.with_flat(flat), E)
    return value, g.flatten()


print("max relative gradient error:", grad_check(as_flat, adapter.flatten(), step=1e-5))

# %% [markdown]
# A few plain gradient steps on the adapter alone.

# %%
for step in range(5):
    loss, grad = denoising_loss(H, adapter, E)
    adapter = adapter.with_flat(adapter.flatten() - 0.05 * grad.flatten())
    print(step, round(loss, 4))

# %%
targets = rng.integers(0, 7, 5)
print(combined_loss(echo_loss(rng.normal(size=(5, 7)), targets), loss,
                    cross_entropy(rng.normal(size=(5, 7)), targets)).to_json())
