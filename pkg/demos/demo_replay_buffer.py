"""Attentive replay sampling: how similarity ranking changes batch composition."""

import numpy as np

from planarpush.replay import ReplayBuffer, Transition, cosine_similarity

rng = np.random.default_rng(0)
buf = ReplayBuffer(capacity=2000, obs_dim=49)

# two "regimes" of states: near-goal (positive pattern) and far (noise)
for i in range(2000):
    if i % 4 == 0:
        obs = np.abs(rng.normal(size=49)).astype(np.float32)   # near-goal cluster
    else:
        obs = rng.normal(size=49).astype(np.float32)
    buf.push(Transition(obs=obs, action=np.zeros(3, np.float32), reward=0.0,
                        next_obs=obs, done=False))

query = np.abs(np.random.default_rng(1).normal(size=49))  # agent sits near the goal

uni_sims, aer_sims = [], []
for draw in range(300):
    uni = buf.sample_uniform(64, rng_seed=draw)
    aer = buf.sample_attentive(query, bs=64, k=4, rng_seed=draw)
    uni_sims.append(np.mean([cosine_similarity(buf.obs[i], query) for i in uni]))
    aer_sims.append(np.mean([cosine_similarity(buf.obs[i], query) for i in aer]))

print("== batch similarity to the current state (300 draws, bs=64, k=4) ==")
print(f"  uniform  : mean {np.mean(uni_sims):+.4f}  sd {np.std(uni_sims):.4f}")
print(f"  attentive: mean {np.mean(aer_sims):+.4f}  sd {np.std(aer_sims):.4f}")
print(f"  uplift   : {np.mean(aer_sims) - np.mean(uni_sims):+.4f}")

print("\n== snapshot round trip ==")
import tempfile, pathlib

with tempfile.TemporaryDirectory() as d:
    path = pathlib.Path(d) / "buffer.bin"
    buf.save(path)
    loaded = ReplayBuffer.load(path)
    same = (loaded.count == buf.count
            and np.array_equal(loaded.obs[:buf.count], buf.obs[:buf.count]))
    print(f"  wrote {path.stat().st_size/1e6:.1f} MB, loaded back identical: {same}")
