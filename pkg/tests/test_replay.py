import numpy as np
import pytest
from scipy import stats as scipy_stats

from planarpush.errors import InsufficientEntries, LengthMismatch
from planarpush.replay import (DEFAULT_BATCH_SIZE, DEFAULT_CAPACITY,
                               DEFAULT_PRESAMPLE_FACTOR, ReplayBuffer, Transition,
                               cosine_similarity, push_transition, sample_aer)


def _t(obs_head, reward=0.0, done=False):
    obs = np.zeros(49, dtype=np.float32)
    obs[:len(obs_head)] = obs_head
    return Transition(obs=obs, action=np.zeros(3, dtype=np.float32), reward=reward,
                      next_obs=obs.copy(), done=done)


def test_defaults_match_declared_values():
    assert DEFAULT_CAPACITY == 1_000_000
    assert DEFAULT_BATCH_SIZE == 512
    assert DEFAULT_PRESAMPLE_FACTOR == 4
    buf = ReplayBuffer()
    assert buf.capacity == 1_000_000


class TestCosineSimilarity:
    def test_parallel(self):
        assert cosine_similarity([1, 0], [1, 0]) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]) == 0.0

    def test_zero_vector_convention(self):
        assert cosine_similarity([0, 0], [1, 1]) == 0.0

    def test_antiparallel(self):
        assert cosine_similarity([2, 0], [-1, 0]) == pytest.approx(-1.0)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            cosine_similarity([1, 0], [1, 0, 0])


class TestRing:
    def test_fifo_overwrite(self):
        buf = ReplayBuffer(capacity=2, obs_dim=49)
        for r in (1.0, 2.0, 3.0):
            push_transition(buf, _t([r], reward=r))
        assert buf.count == 2
        rewards = sorted(float(buf.get(i).reward) for i in range(2))
        assert rewards == [2.0, 3.0]

    def test_count_grows_until_capacity(self):
        buf = ReplayBuffer(capacity=5, obs_dim=49)
        push_transition(buf, _t([1.0]))
        assert buf.count == 1

    def test_every_slot_replaced_exactly_once(self):
        n = 7
        buf = ReplayBuffer(capacity=n, obs_dim=49)
        for i in range(n):
            push_transition(buf, _t([float(i)], reward=float(i)))
        first = [float(buf.get(i).reward) for i in range(n)]
        assert first == [float(i) for i in range(n)]
        for i in range(n):
            push_transition(buf, _t([float(100 + i)], reward=float(100 + i)))
        second = [float(buf.get(i).reward) for i in range(n)]
        assert second == [float(100 + i) for i in range(n)]


class TestAttentiveSampling:
    def _mixed_buffer(self, n=200, seed=0):
        rng = np.random.default_rng(seed)
        buf = ReplayBuffer(capacity=n, obs_dim=49)
        for i in range(n):
            obs = rng.normal(size=49).astype(np.float32)
            buf.push(Transition(obs=obs, action=np.zeros(3, np.float32),
                                reward=float(i), next_obs=obs, done=False))
        return buf

    def test_k1_equals_uniform_presample(self):
        buf = self._mixed_buffer()
        query = np.ones(49)
        got = buf.sample_attentive(query, bs=32, k=1, rng_seed=77)
        uniform = buf.sample_uniform(32, rng_seed=77)
        assert sorted(got.tolist()) == sorted(uniform.tolist())

    def test_picks_most_similar(self):
        buf = ReplayBuffer(capacity=4, obs_dim=49)
        buf.push(_t([1.0, 0.0]))
        buf.push(_t([0.0, 1.0]))
        query = np.zeros(49)
        query[0] = 1.0
        idx = buf.sample_attentive(query, bs=1, k=2, rng_seed=0)
        assert idx.tolist() == [0]

    def test_batch_subset_of_presample_and_monotone(self):
        buf = self._mixed_buffer(300, seed=3)
        query = np.random.default_rng(9).normal(size=49)
        bs, k = 16, 4
        rng = np.random.default_rng(55)
        pre = np.sort(rng.choice(buf.count, size=k * bs, replace=False))
        got = buf.sample_attentive(query, bs=bs, k=k, rng_seed=55)
        assert set(got.tolist()) <= set(pre.tolist())
        sims = {int(i): cosine_similarity(buf.obs[i], query) for i in pre}
        worst_kept = min(sims[int(i)] for i in got)
        best_left = max((sims[int(i)] for i in pre if int(i) not in set(got.tolist())),
                        default=-np.inf)
        assert worst_kept >= best_left - 1e-12

    def test_tie_break_by_buffer_index(self):
        buf = ReplayBuffer(capacity=8, obs_dim=49)
        for _ in range(6):
            buf.push(_t([1.0, 0.0]))  # identical, so all similarities tie
        query = np.zeros(49)
        query[0] = 1.0
        idx = buf.sample_attentive(query, bs=3, k=2, rng_seed=4)
        rng = np.random.default_rng(4)
        pre = np.sort(rng.choice(6, size=6, replace=False))
        assert idx.tolist() == sorted(pre.tolist())[:3]

    def test_deterministic_given_seed(self):
        buf = self._mixed_buffer(256, seed=1)
        query = np.ones(49)
        a = buf.sample_attentive(query, bs=32, k=4, rng_seed=123)
        b = buf.sample_attentive(query, bs=32, k=4, rng_seed=123)
        assert np.array_equal(a, b)

    def test_insufficient_entries(self):
        buf = self._mixed_buffer(10)
        with pytest.raises(InsufficientEntries):
            buf.sample_attentive(np.ones(49), bs=16, k=4, rng_seed=0)

    def test_presample_is_whole_buffer_when_small(self):
        buf = self._mixed_buffer(20, seed=2)
        got = buf.sample_attentive(np.ones(49), bs=16, k=4, rng_seed=0)
        assert len(got) == 16  # pre-sample = all 20 entries, top 16 kept

    def test_aer_similarity_beats_uniform(self):
        # 1000 draws: mean cosine similarity of attentive batches must beat
        # uniform batches (one-sided paired t-test, p < 0.01)
        buf = self._mixed_buffer(400, seed=8)
        query = np.random.default_rng(17).normal(size=49)
        diffs = []
        for draw in range(1000):
            aer_idx = buf.sample_attentive(query, bs=32, k=4, rng_seed=draw)
            uni_idx = buf.sample_uniform(32, rng_seed=10_000 + draw)
            aer_mean = np.mean([cosine_similarity(buf.obs[i], query) for i in aer_idx])
            uni_mean = np.mean([cosine_similarity(buf.obs[i], query) for i in uni_idx])
            diffs.append(aer_mean - uni_mean)
        t, p_two = scipy_stats.ttest_1samp(diffs, 0.0)
        p_one = p_two / 2.0 if t > 0 else 1.0 - p_two / 2.0
        assert p_one < 0.01

    def test_sample_aer_returns_transitions(self):
        buf = self._mixed_buffer(100, seed=5)
        batch = sample_aer(buf, np.ones(49), bs=8, k=4, rng_seed=3)
        assert len(batch) == 8
        assert all(isinstance(t, Transition) for t in batch)


class TestSnapshot:
    def test_round_trip(self, tmp_path):
        buf = ReplayBuffer(capacity=50, obs_dim=49)
        rng = np.random.default_rng(0)
        for i in range(30):
            obs = rng.normal(size=49).astype(np.float32)
            buf.push(Transition(obs=obs, action=rng.normal(size=3).astype(np.float32),
                                reward=float(i), next_obs=obs, done=bool(i % 2)))
        p = tmp_path / "buf.bin"
        buf.save(p)
        loaded = ReplayBuffer.load(p)
        assert loaded.capacity == 50
        assert loaded.count == 30
        assert loaded.write_index == buf.write_index
        assert np.array_equal(loaded.obs[:30], buf.obs[:30])
        assert np.array_equal(loaded.actions[:30], buf.actions[:30])
        assert np.array_equal(loaded.rewards[:30], buf.rewards[:30])
        assert np.array_equal(loaded.dones[:30], buf.dones[:30])

    def test_rejects_garbage(self, tmp_path):
        p = tmp_path / "junk.bin"
        p.write_bytes(b"not a snapshot at all")
        with pytest.raises(ValueError):
            ReplayBuffer.load(p)


class TestConformanceFixtures:
    """The shared fixture file must match the library's own semantics."""

    def _doc(self):
        import json
        import pathlib

        path = pathlib.Path(__file__).parent / "fixtures" / "aer_conformance.json"
        return json.loads(path.read_text())

    def test_cosine_cases(self):
        for case in self._doc()["cosine_cases"]:
            got = cosine_similarity(case["a"], case["b"])
            assert got == pytest.approx(case["expected"], abs=1e-12)

    def test_selection_cases(self):
        for case in self._doc()["selection_cases"]:
            obs = np.asarray(case["obs_matrix"], dtype=np.float32)
            buf = ReplayBuffer(capacity=len(obs), obs_dim=49)
            for row in obs:
                buf.push(Transition(obs=row, action=np.zeros(3, np.float32),
                                    reward=0.0, next_obs=row, done=False))
            pre = np.asarray(case["presample"])
            sims = np.array([cosine_similarity(buf.obs[i], case["query"]) for i in pre])
            order = np.lexsort((pre, -sims))
            got = [int(pre[i]) for i in order[:case["bs"]]]
            assert got == case["expected"]
