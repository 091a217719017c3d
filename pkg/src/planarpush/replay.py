"""Transition storage with attentive (similarity-ranked) replay sampling."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientEntries, LengthMismatch

OBS_DIM = 49
ACTION_DIM = 3

DEFAULT_CAPACITY = 1_000_000
DEFAULT_BATCH_SIZE = 512
DEFAULT_PRESAMPLE_FACTOR = 4

_SNAPSHOT_MAGIC = b"AERB"
_SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool


def cosine_similarity(a, b) -> float:
    """a.b / (|a||b|); zero-norm inputs score 0 by convention."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch(f"vector lengths differ: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b) / (na * nb)


class ReplayBuffer:
    """FIFO ring of transitions with top-k cosine-similarity batch selection."""

    def __init__(self, capacity: int = DEFAULT_CAPACITY,
                 obs_dim: int = OBS_DIM, action_dim: int = ACTION_DIM):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.actions = np.zeros((capacity, action_dim), dtype=np.float32)
        self.rewards = np.zeros(capacity, dtype=np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.dones = np.zeros(capacity, dtype=np.uint8)
        self.write_index = 0
        self.count = 0

    def __len__(self) -> int:
        return self.count

    def push(self, t: Transition) -> None:
        i = self.write_index
        self.obs[i] = t.obs
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_obs[i] = t.next_obs
        self.dones[i] = 1 if t.done else 0
        self.write_index = (i + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)

    def get(self, i: int) -> Transition:
        return Transition(obs=self.obs[i].copy(), action=self.actions[i].copy(),
                          reward=float(self.rewards[i]), next_obs=self.next_obs[i].copy(),
                          done=bool(self.dones[i]))

    def sample_uniform(self, bs: int, rng_seed: int) -> np.ndarray:
        """Uniform without-replacement index sample."""
        if self.count < bs:
            raise InsufficientEntries(f"buffer holds {self.count} < bs={bs}")
        rng = np.random.default_rng(rng_seed)
        return np.sort(rng.choice(self.count, size=bs, replace=False))

    def sample_attentive(self, current_state, bs: int = DEFAULT_BATCH_SIZE,
                         k: int = DEFAULT_PRESAMPLE_FACTOR,
                         rng_seed: int = 0) -> np.ndarray:
        """Indices of the bs pre-sampled entries most similar to current_state.

        Uniformly pre-samples min(k*bs, count) entries without replacement,
        ranks them by cosine similarity between their stored observation and
        the query state, and keeps the top bs (ties resolved by ascending
        buffer index).
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if self.count < bs:
            raise InsufficientEntries(f"buffer holds {self.count} < bs={bs}")
        rng = np.random.default_rng(rng_seed)
        m = min(k * bs, self.count)
        pre = np.sort(rng.choice(self.count, size=m, replace=False))
        query = np.asarray(current_state, dtype=float)
        if query.shape != (self.obs_dim,):
            raise LengthMismatch(f"query must have {self.obs_dim} entries")
        sims = np.array([cosine_similarity(self.obs[i], query) for i in pre])
        order = np.lexsort((pre, -sims))
        return pre[order[:bs]]

    def batch(self, idx: np.ndarray) -> dict:
        return {
            "obs": self.obs[idx].copy(),
            "actions": self.actions[idx].copy(),
            "rewards": self.rewards[idx].copy(),
            "next_obs": self.next_obs[idx].copy(),
            "dones": self.dones[idx].copy(),
        }

    def save(self, path) -> None:
        """Little-endian flat binary snapshot for training resumption."""
        header = struct.pack("<4sIQQQII", _SNAPSHOT_MAGIC, _SNAPSHOT_VERSION,
                             self.capacity, self.count, self.write_index,
                             self.obs_dim, self.action_dim)
        n = self.count
        with open(path, "wb") as f:
            f.write(header)
            f.write(self.obs[:n].astype("<f4").tobytes())
            f.write(self.actions[:n].astype("<f4").tobytes())
            f.write(self.rewards[:n].astype("<f4").tobytes())
            f.write(self.next_obs[:n].astype("<f4").tobytes())
            f.write(self.dones[:n].astype("<u1").tobytes())

    @classmethod
    def load(cls, path) -> "ReplayBuffer":
        with open(path, "rb") as f:
            raw = f.read()
        head = struct.calcsize("<4sIQQQII")
        if len(raw) < head or raw[:4] != _SNAPSHOT_MAGIC:
            raise ValueError("not a replay buffer snapshot")
        magic, version, capacity, count, write_index, obs_dim, action_dim = \
            struct.unpack("<4sIQQQII", raw[:head])
        if version != _SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        buf = cls(capacity=capacity, obs_dim=obs_dim, action_dim=action_dim)
        buf.count = count
        buf.write_index = write_index
        off = head
        for arr, dt in ((buf.obs, "<f4"), (buf.actions, "<f4"), (buf.rewards, "<f4"),
                        (buf.next_obs, "<f4"), (buf.dones, "<u1")):
            width = arr.shape[1] if arr.ndim == 2 else 1
            nbytes = count * width * np.dtype(dt).itemsize
            flat = np.frombuffer(raw[off:off + nbytes], dtype=dt)
            arr[:count] = flat.reshape(count, width) if arr.ndim == 2 else flat
            off += nbytes
        return buf


def push_transition(buffer: ReplayBuffer, t: Transition) -> None:
    buffer.push(t)


def sample_aer(buffer: ReplayBuffer, current_state, bs: int, k: int,
               rng_seed: int) -> list[Transition]:
    idx = buffer.sample_attentive(current_state, bs=bs, k=k, rng_seed=rng_seed)
    return [buffer.get(int(i)) for i in idx]
