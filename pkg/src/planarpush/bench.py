"""Benchmark runner: episodes, metrics (success/contact/collision/SPL), exports."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import stats as scipy_stats

from .baseline import BaselineController, ControllerParams
from .dynamics import ActionDelta
from .env import EpisodeConfig, PushEnv, episode_config_from_dict, episode_config_to_dict
from .errors import EmptyInput, IoFailure, LengthMismatch
from .protocol import PolicyAgentClient
from .world import scenario_suite


@dataclass
class EpisodeRecord:
    episode: int
    seed: int
    suite_id: str
    success: bool
    steps: int
    contact_steps_after_first_touch: int
    steps_after_first_touch: int
    collision_steps: int
    initial_shortest_path: float
    object_path_length: float
    ee_path_length: float
    ee_trace: list
    object_trace: list
    actions: list
    config: dict

    @property
    def contact_rate(self) -> float:
        if self.steps_after_first_touch == 0:
            return 0.0
        return self.contact_steps_after_first_touch / self.steps_after_first_touch

    @property
    def collision_rate(self) -> float:
        if self.steps == 0:
            return 0.0
        return self.collision_steps / self.steps


@dataclass
class MetricsTable:
    success_rate: float
    contact_rate_mean: float
    contact_rate_sd: float
    collision_rate_mean: float
    collision_rate_sd: float
    spl: float
    path_length_mean: float
    path_length_sd: float
    n_episodes: int


class NoopPolicy:
    def reset(self, env, obs=None):
        pass

    def act(self, env, obs=None) -> ActionDelta:
        return ActionDelta(0.0, 0.0, 0.0)


class GreedyPolicy:
    """Scripted straight-at-the-contact-point pusher (no costmap, no orbiting)."""

    def reset(self, env, obs=None):
        pass

    def act(self, env, obs=None) -> ActionDelta:
        world = env.world
        p = world.pushee.pose.xy
        g = world.goal.xy
        to_goal = g - p
        n = float(np.linalg.norm(to_goal))
        if n < 1e-9:
            return ActionDelta(0.0, 0.0, 0.0)
        push_dir = to_goal / n
        target = p - push_dir * (0.5 * world.pushee.shape.inradius)
        v = target - world.ee.pose.xy
        m = max(abs(v[0]), abs(v[1]))
        if m > 0.01:
            v = v * (0.01 / m)
        return ActionDelta(float(v[0]), float(v[1]), 0.0)


class AgentPolicy:
    """Forwards observations to an external protocol agent."""

    def __init__(self, host: str, port: int, deadline: float = 10.0):
        self.client = PolicyAgentClient(host, port, deadline)
        self._pending = None

    def reset(self, env, obs=None):
        self._pending = self.client.reset(obs)

    def act(self, env, obs=None) -> ActionDelta:
        if self._pending is not None:
            action, self._pending = self._pending, None
            return action
        return self.client.act(obs)


def make_policy(name: str, baseline_params: ControllerParams | None = None):
    if name == "baseline":
        return BaselineController(baseline_params)
    if name == "noop":
        return NoopPolicy()
    if name == "greedy":
        return GreedyPolicy()
    if name.startswith("agent:"):
        _, host, port = name.split(":")
        return AgentPolicy(host, int(port))
    raise ValueError(f"unknown policy {name!r}")


def run_episode(policy, config: EpisodeConfig, episode: int = 0) -> EpisodeRecord:
    """Roll one episode and fold the per-step flags into a record."""
    env = PushEnv()
    obs = env.reset(config)
    policy.reset(env, obs)
    p0 = env.world.pushee.pose
    e0 = env.world.ee.pose
    object_trace = [(p0.x, p0.y)]
    ee_trace = [(e0.x, e0.y)]
    actions = []
    first_touch = None
    contact_after = 0
    collisions = 0
    initial_path = env._initial_path_length
    done = False
    info = {"goal_reached": False}
    while not done:
        action = policy.act(env, obs)
        obs, _reward, done, info = env.step(action)
        actions.append((action.dx, action.dy, action.dtheta))
        object_trace.append(info["pushee_pose"][:2])
        ee_trace.append(info["ee_pose"][:2])
        if info["contact"] and first_touch is None:
            first_touch = env.steps
        if first_touch is not None and info["contact"]:
            contact_after += 1
        if info["collision"]:
            collisions += 1
    steps_after = env.steps - first_touch + 1 if first_touch is not None else 0
    obj = np.asarray(object_trace)
    ee = np.asarray(ee_trace)
    return EpisodeRecord(
        episode=episode,
        seed=config.seed,
        suite_id=config.scenario.suite_id,
        success=bool(info["goal_reached"]),
        steps=env.steps,
        contact_steps_after_first_touch=contact_after,
        steps_after_first_touch=steps_after,
        collision_steps=collisions,
        initial_shortest_path=initial_path,
        object_path_length=float(np.sum(np.linalg.norm(np.diff(obj, axis=0), axis=1))),
        ee_path_length=float(np.sum(np.linalg.norm(np.diff(ee, axis=0), axis=1))),
        ee_trace=[list(p) for p in ee_trace],
        object_trace=[list(p) for p in object_trace],
        actions=[list(a) for a in actions],
        config=episode_config_to_dict(config),
    )


def run_suite(suite_id: str, policy_name: str, episodes: int, seed: int,
              d_min: float = 0.2, d_max: float = 0.6, max_steps: int = 500,
              baseline_params: ControllerParams | None = None,
              pushee: str = "small_cube") -> list[EpisodeRecord]:
    specs = scenario_suite(suite_id, count=episodes, base_seed=seed, pushee=pushee)
    records = []
    for i, spec in enumerate(specs):
        policy = make_policy(policy_name, baseline_params)
        config = EpisodeConfig(scenario=spec, seed=seed + i, d_min=d_min, d_max=d_max,
                               max_steps=max_steps)
        records.append(run_episode(policy, config, episode=i))
    return records


def compute_spl(records: list[EpisodeRecord]) -> float:
    """Mean of S * l / max(p, l) over episodes (l = initial shortest path)."""
    if not records:
        raise EmptyInput("no episode records")
    total = 0.0
    for r in records:
        if r.initial_shortest_path <= 0.0:
            raise ValueError("initial_shortest_path must be positive")
        if r.success:
            total += r.initial_shortest_path / max(r.object_path_length,
                                                   r.initial_shortest_path)
    return total / len(records)


def _mean_sd(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return 0.0, 0.0
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd


def aggregate_metrics(records: list[EpisodeRecord],
                      include=None) -> MetricsTable:
    """Suite-level table; `include` restricts the success-conditioned metrics.

    Success rate and SPL always cover all records; contact/collision/path
    statistics cover the `include` subset (all records when None), mirroring
    an evaluation restricted to episodes both methods solved.
    """
    if not records:
        raise EmptyInput("no episode records")
    subset = records if include is None else [r for r, keep in zip(records, include) if keep]
    contact_mean, contact_sd = _mean_sd([r.contact_rate for r in subset])
    collision_mean, collision_sd = _mean_sd([r.collision_rate for r in subset])
    path_mean, path_sd = _mean_sd([r.object_path_length for r in subset])
    return MetricsTable(
        success_rate=sum(r.success for r in records) / len(records),
        contact_rate_mean=contact_mean,
        contact_rate_sd=contact_sd,
        collision_rate_mean=collision_mean,
        collision_rate_sd=collision_sd,
        spl=compute_spl(records),
        path_length_mean=path_mean,
        path_length_sd=path_sd,
        n_episodes=len(records),
    )


@dataclass
class TTestResult:
    t: float
    p_value: float
    significant: bool
    degenerate: bool


def paired_t_test(a, b, alpha: float = 0.05) -> TTestResult:
    """Classical paired t statistic with a two-sided significance decision."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch(f"paired samples differ in length: {a.shape} vs {b.shape}")
    n = a.size
    if n < 2:
        raise LengthMismatch("need at least two pairs")
    d = a - b
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        # all differences identical: zero-mean gives t = 0, anything else
        # has no defined statistic; either way the variance is degenerate
        t = 0.0 if d.mean() == 0.0 else math.copysign(math.inf, d.mean())
        return TTestResult(t=t, p_value=math.nan, significant=False, degenerate=True)
    t = float(d.mean()) / (sd / math.sqrt(n))
    p = 2.0 * float(scipy_stats.t.sf(abs(t), n - 1))
    return TTestResult(t=t, p_value=p, significant=p < alpha, degenerate=False)


EPISODE_CSV_HEADER = ("episode,seed,suite,success,steps,"
                      "contact_steps_after_first_touch,steps_after_first_touch,"
                      "contact_rate,collision_steps,collision_rate,"
                      "initial_shortest_path,object_path_length,ee_path_length")

METRICS_CSV_HEADER = ("success_rate,contact_rate_mean,contact_rate_sd,"
                      "collision_rate_mean,collision_rate_sd,spl,"
                      "path_length_mean,path_length_sd,n_episodes")


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def export_results(records: list[EpisodeRecord], table: MetricsTable, out_dir) -> dict:
    """Write episodes.csv, metrics.csv and traces.json; byte-stable output."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        episodes_path = os.path.join(out_dir, "episodes.csv")
        with open(episodes_path, "w") as f:
            f.write(EPISODE_CSV_HEADER + "\n")
            for r in records:
                row = [r.episode, r.seed, r.suite_id, r.success, r.steps,
                       r.contact_steps_after_first_touch, r.steps_after_first_touch,
                       float(r.contact_rate), r.collision_steps, float(r.collision_rate),
                       float(r.initial_shortest_path), float(r.object_path_length),
                       float(r.ee_path_length)]
                f.write(",".join(_fmt(v) for v in row) + "\n")
        metrics_path = os.path.join(out_dir, "metrics.csv")
        with open(metrics_path, "w") as f:
            f.write(METRICS_CSV_HEADER + "\n")
            row = [table.success_rate, table.contact_rate_mean, table.contact_rate_sd,
                   table.collision_rate_mean, table.collision_rate_sd, table.spl,
                   table.path_length_mean, table.path_length_sd, table.n_episodes]
            f.write(",".join(_fmt(v) for v in row) + "\n")
        traces_path = os.path.join(out_dir, "traces.json")
        payload = [{
            "episode": r.episode,
            "seed": r.seed,
            "suite_id": r.suite_id,
            "success": r.success,
            "config": r.config,
            "initial_shortest_path": r.initial_shortest_path,
            "actions": r.actions,
            "ee_trace": r.ee_trace,
            "object_trace": r.object_trace,
        } for r in records]
        with open(traces_path, "w") as f:
            json.dump(payload, f, indent=1)
            f.write("\n")
    except OSError as e:
        raise IoFailure(str(e)) from e
    return {"episodes": episodes_path, "metrics": metrics_path, "traces": traces_path}


def load_traces(path) -> list[dict]:
    with open(path) as f:
        return json.load(f)


def replay_trace_entry(entry: dict) -> EpisodeRecord:
    """Re-execute a recorded action sequence under the recorded config."""
    config = episode_config_from_dict(entry["config"])
    policy = _ActionListPolicy([ActionDelta(*a) for a in entry["actions"]])
    return run_episode(policy, config, episode=entry["episode"])


class _ActionListPolicy:
    def __init__(self, actions):
        self.actions = actions
        self.i = 0

    def reset(self, env, obs=None):
        self.i = 0

    def act(self, env, obs=None) -> ActionDelta:
        if self.i >= len(self.actions):
            return ActionDelta(0.0, 0.0, 0.0)
        a = self.actions[self.i]
        self.i += 1
        return a


def record_baseline_buffer(out_path, suite_id: str = "env_a", episodes: int = 50,
                           seed: int = 0, d_min: float = 0.035, d_max: float = 0.06,
                           max_steps: int = 120, start_theta: float | None = None) -> dict:
    """Run baseline episodes and save the transitions as a replay snapshot.

    Actions are normalized by the per-axis caps (the convention learning
    clients use); time-limit truncations are stored as non-terminal so
    off-policy learners bootstrap through them. Meant to seed external
    trainers with demonstrations via the shared snapshot format.
    """
    from .dynamics import DTHETA_MAX, DXY_MAX
    from .replay import ReplayBuffer, Transition

    caps = np.array([DXY_MAX, DXY_MAX, DTHETA_MAX])
    buf = ReplayBuffer(capacity=max(episodes * max_steps, 1))
    successes = 0
    for i in range(episodes):
        spec = scenario_suite(suite_id, count=episodes, base_seed=seed)[i]
        config = EpisodeConfig(scenario=spec, seed=seed + i, d_min=d_min, d_max=d_max,
                               max_steps=max_steps, start_theta=start_theta)
        env = PushEnv()
        obs = env.reset(config)
        policy = BaselineController()
        policy.reset(env, obs)
        done = False
        while not done:
            action = policy.act(env, obs)
            next_obs, reward, done, info = env.step(action)
            terminal = done and (info["goal_reached"] or info["oob"])
            buf.push(Transition(
                obs=obs.astype(np.float32),
                action=(np.array([action.dx, action.dy, action.dtheta]) / caps
                        ).astype(np.float32),
                reward=reward.r_total,
                next_obs=next_obs.astype(np.float32),
                done=terminal,
            ))
            obs = next_obs
        successes += bool(info["goal_reached"])
    buf.save(out_path)
    return {"episodes": episodes, "successes": successes, "transitions": buf.count}
