"""World model: workspace, bodies, scenario suites and start/goal sampling."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidScenario, NoPath, NoValidPlacement, StartOccupied, UnknownSuite
from .geometry import Pose2D, ShapeSpec, box, convex_polygon, disk, separation

ROLE_PUSHEE = "pushee"
ROLE_OBSTACLE = "obstacle"
ROLE_EE = "end_effector"

EE_RADIUS = 0.01  # two-finger gripper tip approximated as a disk

# Pushee catalogue. The sizes are declared constants of this artifact.
PUSHEE_SHAPES = {
    "small_cube": box(0.025, 0.025),
    "large_cube": box(0.04, 0.04),
    "small_cylinder": disk(0.025),
    "fragment": convex_polygon(
        [(0.035 * math.cos(a), 0.035 * math.sin(a))
         for a in (0.17, 1.13, 2.27, 3.14, 4.28, 5.24)]
    ),
}

SUITE_IDS = ("free_space", "env_a", "env_b", "env_c", "env_d", "env_e",
             "complex_1", "complex_2", "custom")

# Wall-pair gap sampling bands (meters) for the gap suites.
GAP_BANDS = {"env_c": (0.18, 0.20), "env_d": (0.13, 0.17), "env_e": (0.10, 0.12)}

PLACEMENT_ATTEMPTS = 1000
START_GOAL_ATTEMPTS = 10_000


@dataclass(frozen=True)
class Bounds:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    @property
    def extent_x(self) -> float:
        return self.max_x - self.min_x

    @property
    def extent_y(self) -> float:
        return self.max_y - self.min_y

    def contains(self, x: float, y: float, margin: float = 0.0) -> bool:
        return (self.min_x + margin <= x <= self.max_x - margin
                and self.min_y + margin <= y <= self.max_y - margin)


DEFAULT_BOUNDS = Bounds(0.0, 0.0, 1.0, 1.0)


@dataclass(frozen=True)
class BodyState:
    pose: Pose2D
    shape: ShapeSpec
    role: str


@dataclass
class WorldState:
    """Single source of truth for one simulation step."""

    bodies: list[BodyState]
    bounds: Bounds
    goal: Pose2D
    time_step_index: int = 0

    @property
    def pushee(self) -> BodyState:
        return next(b for b in self.bodies if b.role == ROLE_PUSHEE)

    @property
    def ee(self) -> BodyState:
        return next(b for b in self.bodies if b.role == ROLE_EE)

    @property
    def obstacles(self) -> list[BodyState]:
        return [b for b in self.bodies if b.role == ROLE_OBSTACLE]

    def with_body_pose(self, role: str, pose: Pose2D) -> "WorldState":
        bodies = [replace(b, pose=pose) if b.role == role else b for b in self.bodies]
        return WorldState(bodies=bodies, bounds=self.bounds, goal=self.goal,
                          time_step_index=self.time_step_index)

    def validate(self) -> None:
        roles = [b.role for b in self.bodies]
        if roles.count(ROLE_PUSHEE) != 1 or roles.count(ROLE_EE) != 1:
            raise InvalidScenario("world needs exactly one pushee and one end effector")
        p = self.pushee
        clr = p.shape.circumradius
        if not self.bounds.contains(p.pose.x, p.pose.y, margin=clr):
            raise InvalidScenario("pushee not inside bounds with circumradius clearance")
        obs = self.obstacles
        for i in range(len(obs)):
            if separation(p.shape, p.pose, obs[i].shape, obs[i].pose) < 0.0:
                raise InvalidScenario("pushee overlaps an obstacle")
            for j in range(i + 1, len(obs)):
                if separation(obs[i].shape, obs[i].pose, obs[j].shape, obs[j].pose) < 0.0:
                    raise InvalidScenario("two obstacles overlap")


@dataclass(frozen=True)
class ScenarioSpec:
    """Deterministic recipe for one world; serializes field-for-field to JSON."""

    suite_id: str
    obstacle_params: dict = field(default_factory=dict)
    pushee_shape: ShapeSpec = PUSHEE_SHAPES["small_cube"]
    rng_seed: int = 0

    def __post_init__(self):
        if self.suite_id not in SUITE_IDS:
            raise UnknownSuite(f"unknown suite {self.suite_id!r}")
        gap = self.obstacle_params.get("gap")
        if self.suite_id in GAP_BANDS and gap is not None and not 0.10 <= gap <= 0.20:
            raise InvalidScenario("inter-obstacle gap must lie in [0.10, 0.20] m")


def shape_to_dict(shape: ShapeSpec) -> dict:
    if shape.kind == "disk":
        return {"kind": "disk", "radius": shape.radius}
    if shape.kind == "box":
        return {"kind": "box", "half_extents": list(shape.half_extents)}
    return {"kind": "convex-polygon", "vertices": [list(v) for v in shape.vertices]}


def shape_from_dict(d: dict) -> ShapeSpec:
    kind = d["kind"]
    if kind == "disk":
        return disk(d["radius"])
    if kind == "box":
        return box(*d["half_extents"])
    return convex_polygon(d["vertices"])


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    return {
        "suite_id": spec.suite_id,
        "obstacle_params": spec.obstacle_params,
        "pushee_shape": shape_to_dict(spec.pushee_shape),
        "rng_seed": spec.rng_seed,
    }


def scenario_from_dict(d: dict) -> ScenarioSpec:
    return ScenarioSpec(
        suite_id=d["suite_id"],
        obstacle_params=d.get("obstacle_params", {}),
        pushee_shape=shape_from_dict(d["pushee_shape"]),
        rng_seed=int(d["rng_seed"]),
    )


def save_scenario(spec: ScenarioSpec, path) -> None:
    with open(path, "w") as f:
        json.dump(scenario_to_dict(spec), f, indent=2)
        f.write("\n")


def load_scenario(path) -> ScenarioSpec:
    with open(path) as f:
        return scenario_from_dict(json.load(f))


def _pair_walls(gap: float, bounds: Bounds) -> list[BodyState]:
    cx = bounds.min_x + 0.5 * bounds.extent_x
    cy = bounds.min_y + 0.5 * bounds.extent_y
    half_len = 0.10
    seg = box(0.025, half_len)
    dy = half_len + 0.5 * gap
    return [
        BodyState(Pose2D(cx, cy + dy, 0.0), seg, ROLE_OBSTACLE),
        BodyState(Pose2D(cx, cy - dy, 0.0), seg, ROLE_OBSTACLE),
    ]


def _fixed_layout(offsets_shapes, bounds: Bounds) -> list[BodyState]:
    out = []
    for (ox, oy, yaw), shape in offsets_shapes:
        pose = Pose2D(bounds.min_x + ox * bounds.extent_x,
                      bounds.min_y + oy * bounds.extent_y, yaw)
        out.append(BodyState(pose, shape, ROLE_OBSTACLE))
    return out


# Fixed complex layouts (workspace-relative coordinates). Corridor widths are
# kept >= 1.2x the largest catalogue pushee diameter used with these suites.
COMPLEX_1 = [
    ((0.30, 0.70, 0.0), box(0.02, 0.18)),
    ((0.50, 0.30, 0.0), box(0.02, 0.18)),
    ((0.70, 0.70, 0.0), box(0.02, 0.18)),
    ((0.30, 0.25, 0.0), disk(0.04)),
    ((0.70, 0.25, 0.0), disk(0.04)),
]

COMPLEX_2 = [
    ((0.35, 0.35, 0.0), box(0.18, 0.02)),
    ((0.65, 0.65, 0.0), box(0.18, 0.02)),
    ((0.15, 0.65, 0.0), disk(0.05)),
    ((0.85, 0.35, 0.0), disk(0.05)),
    ((0.50, 0.13, 0.0), box(0.03, 0.03)),
    ((0.50, 0.87, 0.0), box(0.03, 0.03)),
]


def _sample_single_obstacle(rng, params, nominal_half, bounds: Bounds) -> list[BodyState]:
    yaw = params.get("yaw")
    scale = params.get("scale")
    jitter = params.get("jitter", 0.05)
    cx = bounds.min_x + 0.5 * bounds.extent_x + rng.uniform(-jitter, jitter)
    cy = bounds.min_y + 0.5 * bounds.extent_y + rng.uniform(-jitter, jitter)
    if yaw is None:
        yaw = rng.uniform(-math.pi, math.pi)
    if scale is None:
        scale = rng.uniform(0.8, 1.2)
    shape = box(nominal_half[0] * scale, nominal_half[1] * scale)
    return [BodyState(Pose2D(cx, cy, yaw), shape, ROLE_OBSTACLE)]


def _build_obstacles(spec: ScenarioSpec, rng, bounds: Bounds) -> list[BodyState]:
    suite = spec.suite_id
    params = spec.obstacle_params
    if suite == "free_space":
        return []
    if suite == "env_a":
        return _sample_single_obstacle(rng, params, (0.06, 0.03), bounds)
    if suite == "env_b":
        return _sample_single_obstacle(rng, params, (0.10, 0.025), bounds)
    if suite in GAP_BANDS:
        gap = params.get("gap")
        if gap is None:
            lo, hi = GAP_BANDS[suite]
            gap = rng.uniform(lo, hi)
        return _pair_walls(gap, bounds)
    if suite == "complex_1":
        return _fixed_layout(COMPLEX_1, bounds)
    if suite == "complex_2":
        return _fixed_layout(COMPLEX_2, bounds)
    if suite == "custom":
        return [BodyState(Pose2D(*o["pose"]), shape_from_dict(o["shape"]), ROLE_OBSTACLE)
                for o in params.get("obstacles", [])]
    raise UnknownSuite(suite)


def _parking_pose(bounds: Bounds) -> Pose2D:
    return Pose2D(bounds.min_x + 0.15 * bounds.extent_x,
                  bounds.min_y + 0.15 * bounds.extent_y, 0.0)


def make_scenario(spec: ScenarioSpec) -> WorldState:
    """Build the deterministic world for a scenario spec.

    The pushee starts at a parking pose (moved later by start/goal
    sampling); the EE parks on a nearby collision-free spot.
    """
    params = spec.obstacle_params
    if "bounds" in params:
        bounds = Bounds(*params["bounds"])
    else:
        bounds = DEFAULT_BOUNDS
    rng = np.random.default_rng(spec.rng_seed)
    pushee_pose = (Pose2D(*params["pushee_pose"]) if "pushee_pose" in params
                   else _parking_pose(bounds))
    pushee = BodyState(pushee_pose, spec.pushee_shape, ROLE_PUSHEE)

    obstacles = None
    for _ in range(PLACEMENT_ATTEMPTS):
        candidate = _build_obstacles(spec, rng, bounds)
        ok = all(separation(pushee.shape, pushee.pose, o.shape, o.pose) > 0.0
                 for o in candidate)
        for i in range(len(candidate)):
            for j in range(i + 1, len(candidate)):
                a, b = candidate[i], candidate[j]
                ok = ok and separation(a.shape, a.pose, b.shape, b.pose) > 0.0
        if ok:
            obstacles = candidate
            break
    if obstacles is None:
        raise InvalidScenario(f"no valid obstacle placement for suite {spec.suite_id!r}")

    ee = None
    for k in range(PLACEMENT_ATTEMPTS):
        ang = math.pi * (1.25 + 0.25 * k)
        r = pushee.shape.circumradius + EE_RADIUS + 0.03
        cand = Pose2D(pushee_pose.x + r * math.cos(ang), pushee_pose.y + r * math.sin(ang), 0.0)
        ee_shape = disk(EE_RADIUS)
        inside = bounds.contains(cand.x, cand.y, margin=EE_RADIUS)
        clear = all(separation(ee_shape, cand, o.shape, o.pose) > 0.0 for o in obstacles)
        if inside and clear:
            ee = BodyState(cand, ee_shape, ROLE_EE)
            break
    if ee is None:
        raise InvalidScenario("no collision-free EE parking pose")

    world = WorldState(bodies=[pushee, ee, *obstacles], bounds=bounds,
                       goal=pushee_pose, time_step_index=0)
    world.validate()
    return world


def scenario_suite(suite_id: str, count: int = 1, base_seed: int = 0,
                   pushee: str | ShapeSpec = "small_cube") -> list[ScenarioSpec]:
    """Scenario specs for a suite; per-spec randomness comes from rng_seed."""
    if suite_id not in SUITE_IDS:
        raise UnknownSuite(f"unknown suite {suite_id!r}")
    shape = PUSHEE_SHAPES[pushee] if isinstance(pushee, str) else pushee
    return [ScenarioSpec(suite_id=suite_id, obstacle_params={},
                         pushee_shape=shape, rng_seed=base_seed + i)
            for i in range(count)]


def free_positions_grid(world: WorldState):
    """Inflated planning grid for placement checks (obstacles only)."""
    from .perception import occupancy_from_world, inflate

    grid = occupancy_from_world(world)
    return inflate(grid, world.pushee.shape.circumradius)


def sample_start_goal(world: WorldState, d_min: float, d_max: float,
                      rng_seed: int) -> tuple[Pose2D, Pose2D]:
    """Sample a pushee start pose and goal with distance in [d_min, d_max].

    Both positions are free on the half-diameter-inflated grid and a grid
    path must exist between them.
    """
    from .planning import plan_path

    if d_min > d_max:
        raise ValueError("d_min must be <= d_max")
    rng = np.random.default_rng(rng_seed)
    b = world.bounds
    clr = world.pushee.shape.circumradius
    grid = free_positions_grid(world)

    for _ in range(START_GOAL_ATTEMPTS):
        sx = rng.uniform(b.min_x + clr, b.max_x - clr)
        sy = rng.uniform(b.min_y + clr, b.max_y - clr)
        d = rng.uniform(d_min, d_max)
        phi = rng.uniform(-math.pi, math.pi)
        theta = rng.uniform(-math.pi, math.pi)
        gx = sx + d * math.cos(phi)
        gy = sy + d * math.sin(phi)
        if not b.contains(gx, gy, margin=clr):
            continue
        if grid.occupied_at(sx, sy) or grid.occupied_at(gx, gy):
            continue
        try:
            plan_path(grid, (sx, sy), (gx, gy))
        except (NoPath, StartOccupied):
            continue
        return Pose2D(sx, sy, theta), Pose2D(gx, gy, 0.0)
    raise NoValidPlacement(
        f"no start/goal pair with distance in [{d_min}, {d_max}] after "
        f"{START_GOAL_ATTEMPTS} attempts")
