"""Episodic pushing environment: reset/step, observation assembly and reward."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .dynamics import (CONTACT_EPSILON, LimitSurfaceParams, ActionDelta, step_ee)
from .encoding import EncoderSpec, builtin_encoder, encode_window
from .errors import (EpisodeFinished, GoalOccupied, NoPath, NoValidPlacement,
                     ResetFailed, StartOccupied)
from .geometry import Pose2D, separation, wrap_angle
from .perception import (BODY_HEIGHTS, IMAGE_SIZE, LocalWindow, OccupancyGrid,
                         egocentric_window, inflate, paint_body, render_depth,
                         window_from_masked)
from .planning import SUBGOAL_LAG, Path, plan_path, sample_subgoals
from .replay import OBS_DIM
from .world import EE_RADIUS, ScenarioSpec, WorldState, make_scenario, sample_start_goal
from . import world as world_mod

# Observation layout (49 values)
LATENT_SLICE = slice(0, 32)
EE_POSE_SLICE = slice(32, 37)      # x, y, yaw, pitch, roll in the pushee frame
JOINTS_SLICE = slice(37, 43)       # six joint slots, zero-filled by default
SG_NOW_SLICE = slice(43, 45)
SG_LAGGED_SLICE = slice(45, 47)
CONTACT_INDEX = 47
GOAL_DISTANCE_INDEX = 48

GOAL_REWARD = 50.0
OOB_PENALTY = -10.0
COLLISION_PENALTY = -5.0

CURRICULUM_DMAX = (0.06, 0.12, 0.2, 0.3, 0.45, 0.6)
CURRICULUM_SUCCESS_THRESHOLD = 0.8
CURRICULUM_MIN_EPISODES = 50

EE_RING_MIN = 0.05
EE_RING_MAX = 0.10
EE_PLACEMENT_ATTEMPTS = 10_000


@dataclass(frozen=True)
class RewardBreakdown:
    r_dist: float
    r_collision: float
    r_touch: float
    r_total: float


def compute_reward(goal_reached: bool, out_of_bounds: bool, collision: bool,
                   contact: bool, g_ratio: float, o_ratio: float) -> RewardBreakdown:
    """Score one step from the normalized distance ratios and event flags.

    g_ratio and o_ratio are the current global path length and EE-object
    distance divided by their episode-initial values, clamped to [0, 1].
    """
    if goal_reached:
        r_dist = GOAL_REWARD
    else:
        r_dist = -g_ratio - o_ratio
    if out_of_bounds:
        r_collision = OOB_PENALTY
    elif collision:
        r_collision = COLLISION_PENALTY
    else:
        r_collision = 0.0
    r_touch = o_ratio if contact else 0.0
    return RewardBreakdown(r_dist=r_dist, r_collision=r_collision, r_touch=r_touch,
                           r_total=r_dist + r_collision + r_touch)


def curriculum_advance(stage: int, success_rate: float, n_episodes: int) -> int:
    """Next curriculum stage; advances on a rolling success rate, never regresses."""
    if (n_episodes >= CURRICULUM_MIN_EPISODES
            and success_rate >= CURRICULUM_SUCCESS_THRESHOLD):
        return min(stage + 1, len(CURRICULUM_DMAX) - 1)
    return stage


@dataclass
class EpisodeConfig:
    scenario: ScenarioSpec
    max_steps: int = 500
    goal_tolerance: float = 0.03
    curriculum_stage: int | None = None
    d_min: float = 0.2
    d_max: float = 0.6
    seed: int = 0
    subgoal_lag: int = SUBGOAL_LAG
    goal_orientation_tolerance: float | None = None  # off by default
    arm_joints: bool = False
    start_theta: float | None = None  # pin the pushee's initial yaw (training aid)

    def __post_init__(self):
        if self.curriculum_stage is not None:
            stage = max(0, min(int(self.curriculum_stage), len(CURRICULUM_DMAX) - 1))
            self.d_max = CURRICULUM_DMAX[stage]
            self.d_min = min(self.d_min, self.d_max)
        if not (0.0 < self.d_min <= self.d_max <= 0.6):
            raise ValueError("need 0 < d_min <= d_max <= 0.6")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")


def episode_config_to_dict(config: EpisodeConfig) -> dict:
    return {
        "scenario": world_mod.scenario_to_dict(config.scenario),
        "max_steps": config.max_steps,
        "goal_tolerance": config.goal_tolerance,
        "curriculum_stage": config.curriculum_stage,
        "d_min": config.d_min,
        "d_max": config.d_max,
        "seed": config.seed,
        "subgoal_lag": config.subgoal_lag,
        "start_theta": config.start_theta,
    }


def episode_config_from_dict(d: dict) -> EpisodeConfig:
    return EpisodeConfig(
        scenario=world_mod.scenario_from_dict(d["scenario"]),
        max_steps=int(d.get("max_steps", 500)),
        goal_tolerance=float(d.get("goal_tolerance", 0.03)),
        curriculum_stage=d.get("curriculum_stage"),
        d_min=float(d.get("d_min", 0.2)),
        d_max=float(d.get("d_max", 0.6)),
        seed=int(d.get("seed", 0)),
        subgoal_lag=int(d.get("subgoal_lag", SUBGOAL_LAG)),
        start_theta=d.get("start_theta"),
    )


def _arm_joint_slots(world: WorldState) -> np.ndarray:
    """Planar 3-link arm angles for the EE pose (toy model, 3 of 6 slots)."""
    base = np.array([world.bounds.min_x - 0.2,
                     world.bounds.min_y + 0.5 * world.bounds.extent_y])
    l1 = l2 = 0.7
    target = world.ee.pose.xy - base
    d = float(np.linalg.norm(target))
    d = min(d, l1 + l2 - 1e-9)
    cos_q2 = (d * d - l1 * l1 - l2 * l2) / (2 * l1 * l2)
    q2 = math.acos(max(-1.0, min(1.0, cos_q2)))
    q1 = math.atan2(target[1], target[0]) - math.atan2(l2 * math.sin(q2),
                                                       l1 + l2 * math.cos(q2))
    q3 = wrap_angle(world.ee.pose.theta - q1 - q2)
    return np.array([q1, q2, q3, 0.0, 0.0, 0.0])


def build_observation(world: WorldState, path_now: Path, path_history, encoder: EncoderSpec,
                      initial_goal_distance: float, contact: bool,
                      lag: int = SUBGOAL_LAG, arm_joints: bool = False,
                      window: LocalWindow | None = None) -> np.ndarray:
    """Assemble the 49-value observation; every positional entry is relative."""
    pushee = world.pushee
    ee = world.ee
    if window is None:
        depth = render_depth(world)
        window = egocentric_window(depth, pushee, ee)
    latent = encode_window(window, encoder)

    obs = np.zeros(OBS_DIM)
    obs[LATENT_SLICE] = latent
    rel = pushee.pose.inverse_transform(ee.pose.xy)
    obs[EE_POSE_SLICE] = [rel[0], rel[1], wrap_angle(ee.pose.theta - pushee.pose.theta),
                          0.0, 0.0]
    if arm_joints:
        obs[JOINTS_SLICE] = _arm_joint_slots(world)
    subgoals = sample_subgoals(path_now, path_history, lag, pushee.pose)
    obs[SG_NOW_SLICE] = subgoals.sg_now
    obs[SG_LAGGED_SLICE] = subgoals.sg_lagged
    obs[CONTACT_INDEX] = 1.0 if contact else 0.0
    dist = float(np.linalg.norm(pushee.pose.xy - world.goal.xy))
    obs[GOAL_DISTANCE_INDEX] = dist / initial_goal_distance
    if not np.all(np.isfinite(obs)):
        raise ValueError("observation contains non-finite values")
    return obs


class PushEnv:
    """One episodic environment instance (single owner, no internal locking)."""

    def __init__(self, encoder: EncoderSpec | None = None,
                 params: LimitSurfaceParams | None = None):
        self.encoder = encoder if encoder is not None else builtin_encoder()
        self.params = params if params is not None else LimitSurfaceParams()
        self.config: EpisodeConfig | None = None
        self.world: WorldState | None = None
        self.done = True
        self.steps = 0

    def _plan_from_pushee(self):
        grid = self._planning_grid()
        p = self.world.pushee.pose
        g = self.world.goal
        return plan_path(grid, (p.x, p.y), (g.x, g.y))

    # The obstacle raster is constant within an episode (obstacles are
    # static), so cache it at reset and only re-derive the planning grid when
    # the pushee/EE footprints actually overlap obstacle pixels. The results
    # are identical to running the public perception pipeline each step.

    def _refresh_static(self) -> None:
        w = self.world
        res = w.bounds.extent_x / IMAGE_SIZE
        origin = (w.bounds.min_x, w.bounds.min_y)
        depth = np.zeros((IMAGE_SIZE, IMAGE_SIZE))
        for obs in w.obstacles:
            paint_body(depth, obs, BODY_HEIGHTS[obs.role], res, origin)
        self._static_depth = depth
        self._static_res = res
        self._static_origin = origin
        self._static_occ = depth > 0.0
        base = OccupancyGrid(cells=self._static_occ, resolution=res, origin=origin)
        self._static_inflated = inflate(base, w.pushee.shape.circumradius)

    def _own_mask(self) -> np.ndarray:
        helper = np.zeros((IMAGE_SIZE, IMAGE_SIZE))
        paint_body(helper, self.world.pushee, 1.0, self._static_res, self._static_origin)
        paint_body(helper, self.world.ee, 1.0, self._static_res, self._static_origin)
        return helper > 0.0

    def _planning_grid(self) -> OccupancyGrid:
        own = self._own_mask()
        if not (own & self._static_occ).any():
            return self._static_inflated
        base = OccupancyGrid(cells=self._static_occ & ~own,
                             resolution=self._static_res, origin=self._static_origin)
        return inflate(base, self.world.pushee.shape.circumradius)

    def _current_window(self) -> LocalWindow:
        masked = self._static_depth.copy()
        masked[self._own_mask()] = 0.0
        return window_from_masked(masked, self._static_res, self._static_origin,
                                  self.world.pushee.pose)

    def reset(self, config: EpisodeConfig) -> np.ndarray:
        seeds = np.random.SeedSequence(config.seed).generate_state(2)
        params = config.scenario.obstacle_params
        try:
            world = make_scenario(config.scenario)
            if "start_pose" in params and "goal_pose" in params:
                # pinned episode (regression scenarios); skips sampling
                start = Pose2D(*params["start_pose"])
                goal = Pose2D(*params["goal_pose"])
            else:
                start, goal = sample_start_goal(world, config.d_min, config.d_max,
                                                int(seeds[0]))
        except (NoValidPlacement, NoPath, StartOccupied, GoalOccupied) as e:
            raise ResetFailed(str(e)) from e
        if config.start_theta is not None:
            start = Pose2D(start.x, start.y, config.start_theta)
        world = world.with_body_pose(world_mod.ROLE_PUSHEE, start)
        world.goal = goal

        rng = np.random.default_rng(int(seeds[1]))
        ee_pose = None
        pushee = world.pushee
        for _ in range(EE_PLACEMENT_ATTEMPTS):
            r = rng.uniform(EE_RING_MIN, EE_RING_MAX)
            ang = rng.uniform(-math.pi, math.pi)
            cand = Pose2D(start.x + r * math.cos(ang), start.y + r * math.sin(ang),
                          wrap_angle(ang + math.pi))
            if not world.bounds.contains(cand.x, cand.y, margin=EE_RADIUS):
                continue
            ee_shape = world.ee.shape
            if separation(ee_shape, cand, pushee.shape, pushee.pose) <= CONTACT_EPSILON:
                continue
            if any(separation(ee_shape, cand, o.shape, o.pose) <= CONTACT_EPSILON
                   for o in world.obstacles):
                continue
            ee_pose = cand
            break
        if ee_pose is None:
            raise ResetFailed("no collision-free EE pose on the sampling ring")
        world = world.with_body_pose(world_mod.ROLE_EE, ee_pose)

        self.config = config
        self.world = world
        self.steps = 0
        self.done = False
        self._history = deque(maxlen=config.subgoal_lag)
        self._refresh_static()
        try:
            path = self._plan_from_pushee()
        except (NoPath, StartOccupied, GoalOccupied) as e:
            raise ResetFailed(str(e)) from e
        self._path = path
        self._initial_path_length = max(path.length, 1e-12)
        self._initial_ee_distance = max(
            float(np.linalg.norm(ee_pose.xy - start.xy)), 1e-12)
        self._initial_goal_distance = max(
            float(np.linalg.norm(start.xy - goal.xy)), 1e-12)
        self._g_ratio = 1.0
        obs = build_observation(world, self._path, self._history, self.encoder,
                                self._initial_goal_distance, contact=False,
                                lag=config.subgoal_lag, arm_joints=config.arm_joints,
                                window=self._current_window())
        return obs

    def _goal_reached(self) -> bool:
        p = self.world.pushee.pose
        g = self.world.goal
        if float(np.linalg.norm(p.xy - g.xy)) > self.config.goal_tolerance:
            return False
        tol = self.config.goal_orientation_tolerance
        if tol is not None and abs(wrap_angle(p.theta - g.theta)) > tol:
            return False
        return True

    def step(self, action: ActionDelta):
        """Apply one EE increment; returns (obs, reward, done, info)."""
        if self.done or self.world is None:
            raise EpisodeFinished("call reset() before stepping")
        outcome = step_ee(self.world, action, self.params)
        self.world = outcome.world
        self.steps += 1

        goal_reached = self._goal_reached()
        oob = outcome.out_of_bounds
        prev_path = self._path
        if not oob:
            try:
                path = self._plan_from_pushee()
                self._path = path
                self._g_ratio = min(1.0, max(0.0, path.length / self._initial_path_length))
            except (NoPath, StartOccupied, GoalOccupied):
                # wedged in the inflation ring: keep the last ratio and path
                pass
        ee_dist = float(np.linalg.norm(self.world.ee.pose.xy - self.world.pushee.pose.xy))
        o_ratio = min(1.0, max(0.0, ee_dist / self._initial_ee_distance))
        collision = outcome.object_obstacle_collision or outcome.ee_obstacle_collision
        reward = compute_reward(goal_reached, oob, collision,
                                outcome.ee_object_contact, self._g_ratio, o_ratio)
        assert reward.r_total == reward.r_dist + reward.r_collision + reward.r_touch

        self.done = goal_reached or oob or self.steps >= self.config.max_steps
        self._history.append(prev_path)
        obs = build_observation(self.world, self._path, self._history, self.encoder,
                                self._initial_goal_distance,
                                contact=outcome.ee_object_contact,
                                lag=self.config.subgoal_lag,
                                arm_joints=self.config.arm_joints,
                                window=self._current_window())
        info = {
            "contact": outcome.ee_object_contact,
            "collision": collision,
            "oob": oob,
            "path_len": self._path.length,
            "goal_reached": goal_reached,
            "steps": self.steps,
            "object_obstacle_collision": outcome.object_obstacle_collision,
            "ee_obstacle_collision": outcome.ee_obstacle_collision,
            "pushee_pose": (self.world.pushee.pose.x, self.world.pushee.pose.y,
                            self.world.pushee.pose.theta),
            "ee_pose": (self.world.ee.pose.x, self.world.ee.pose.y,
                        self.world.ee.pose.theta),
        }
        return obs, reward, self.done, info

    def local_window(self) -> LocalWindow:
        """Current egocentric window (protocol extension for dataset collection)."""
        return self._current_window()
