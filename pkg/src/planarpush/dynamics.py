"""Quasi-static planar pushing dynamics.

The EE is a position-controlled disk. Its commanded increment is clamped,
split into sub-steps no longer than half the EE radius, and any EE-pushee
overlap created by a sub-step is resolved through a single-point ellipsoidal
limit-surface contact model (frictionless probe: only the normal component
of the EE motion pushes). Pushee-obstacle overlap is resolved by minimum
translation; obstacles never move. If a sub-step cannot be resolved (the
pushee is squeezed between the EE and an obstacle) the EE stalls there and
the remaining command is dropped, keeping the penetration bound intact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateContact
from .geometry import Pose2D, disk_contact, minimum_translation, separation, wrap_angle
from .world import BodyState, WorldState

DXY_MAX = 0.01                  # meters per step, per axis
DTHETA_MAX = math.radians(5.0)  # radians per step
CONTACT_EPSILON = 1e-3          # separation at or below this counts as contact
PENETRATION_TOL = 1e-4          # spec bound on post-step penetration
RESOLVE_TOL = 1e-6              # internal resolution target
MAX_RESOLVE_ITERS = 80


@dataclass(frozen=True)
class ActionDelta:
    dx: float
    dy: float
    dtheta: float


@dataclass(frozen=True)
class LimitSurfaceParams:
    """c is the max-friction-torque to max-friction-force ratio (meters)."""

    c: float = 0.05
    ee_radius: float = 0.01

    def __post_init__(self):
        if self.c <= 0.0 or self.ee_radius <= 0.0:
            raise ValueError("limit-surface parameters must be positive")


@dataclass
class StepOutcome:
    world: WorldState
    ee_object_contact: bool
    object_obstacle_collision: bool
    ee_obstacle_collision: bool
    out_of_bounds: bool


@dataclass
class ContactReport:
    ee_object: bool
    object_obstacle: bool
    ee_obstacle: bool
    min_separation: float


def clamp_action(action: ActionDelta, dxy_max: float = DXY_MAX,
                 dtheta_max: float = DTHETA_MAX) -> ActionDelta:
    return ActionDelta(
        dx=min(dxy_max, max(-dxy_max, action.dx)),
        dy=min(dxy_max, max(-dxy_max, action.dy)),
        dtheta=min(dtheta_max, max(-dtheta_max, action.dtheta)),
    )


def resolve_push_contact(pushee: BodyState, contact_point, contact_normal,
                         ee_displacement, params: LimitSurfaceParams) -> Pose2D:
    """Pushee pose increment for a point push.

    The twist is the limit-surface image of a force along the contact
    normal, scaled so the contact point advances by the normal component of
    the EE displacement: v = t*n, omega = t*(r x n)/c^2 with
    t = d_n / (1 + (r x n)^2 / c^2).
    """
    n = np.asarray(contact_normal, dtype=float)
    norm = float(np.linalg.norm(n))
    if norm < 1e-12:
        raise DegenerateContact("contact normal has zero length")
    n = n / norm
    d = np.asarray(ee_displacement, dtype=float)
    d_n = float(d @ n)
    if d_n <= 0.0:
        return Pose2D(0.0, 0.0, 0.0)
    r = np.asarray(contact_point, dtype=float) - pushee.pose.xy
    rxn = float(r[0] * n[1] - r[1] * n[0])
    c2 = params.c * params.c
    t = d_n / (1.0 + rxn * rxn / c2)
    return Pose2D(t * n[0], t * n[1], t * rxn / c2)


def _apply_increment(pose: Pose2D, inc: Pose2D) -> Pose2D:
    return Pose2D(pose.x + inc.x, pose.y + inc.y, wrap_angle(pose.theta + inc.theta))


def _resolve_substep(ee_center: np.ndarray, ee_disp: np.ndarray,
                     pushee: BodyState, obstacles, params: LimitSurfaceParams):
    """Resolve contacts after the EE moved by ee_disp to ee_center.

    Returns (pushee_pose, ok). Alternates EE-pushee limit-surface pushes
    with pushee-obstacle minimum-translation projections; near head-on
    squeezes make no progress and report a stall.
    """
    pose = pushee.pose
    shape = pushee.shape
    prev_pen = math.inf
    for _ in range(MAX_RESOLVE_ITERS):
        sep, cp, n = disk_contact(shape, pose, ee_center, params.ee_radius)
        pen = -sep
        moved = False
        if pen > RESOLVE_TOL:
            if pen > 0.9 * prev_pen and pen > 10.0 * RESOLVE_TOL:
                return pushee.pose, False  # jammed: no geometric progress
            inc = resolve_push_contact(BodyState(pose, shape, pushee.role),
                                       cp, n, n * pen, params)
            pose = _apply_increment(pose, inc)
            moved = True
            prev_pen = pen
        else:
            prev_pen = math.inf
        for obs in obstacles:
            mt = minimum_translation(shape, pose, obs.shape, obs.pose)
            if mt is not None and mt[0] > RESOLVE_TOL:
                depth, direction = mt
                pose = Pose2D(pose.x + depth * direction[0],
                              pose.y + depth * direction[1], pose.theta)
                moved = True
        if not moved:
            return pose, True
    # iteration budget exhausted: accept only if within the spec bound
    worst = max(0.0, -disk_contact(shape, pose, ee_center, params.ee_radius)[0])
    for obs in obstacles:
        worst = max(worst, -separation(shape, pose, obs.shape, obs.pose))
    if worst <= 0.5 * PENETRATION_TOL:
        return pose, True
    return pushee.pose, False


def step_ee(world: WorldState, action: ActionDelta, params: LimitSurfaceParams,
            max_substep: float | None = None) -> StepOutcome:
    """Advance the world one step by the clamped EE increment.

    The default sub-step is 0.1x the EE radius (the spec bound is 0.5x);
    the projection integrator is first-order, and the smaller default keeps
    long pushing episodes within the declared convergence tolerance.
    """
    act = clamp_action(action)
    ee = world.ee
    pushee = world.pushee
    obstacles = world.obstacles
    move = np.array([act.dx, act.dy])
    dist = float(np.linalg.norm(move))
    cap = max_substep if max_substep is not None else 0.1 * params.ee_radius
    n_sub = max(1, int(math.ceil(dist / cap)))
    sub = move / n_sub
    sub_theta = act.dtheta / n_sub

    ee_pose = ee.pose
    p_state = pushee
    for _ in range(n_sub):
        cand = Pose2D(ee_pose.x + sub[0], ee_pose.y + sub[1],
                      wrap_angle(ee_pose.theta + sub_theta))
        new_pose, ok = _resolve_substep(cand.xy, sub, p_state, obstacles, params)
        if ok:
            ee_pose = cand
            p_state = BodyState(new_pose, p_state.shape, p_state.role)
            continue
        # jammed: advance by the largest admissible fraction, then stall
        frac = 0.5
        for _ in range(5):
            part = sub * frac
            cand2 = Pose2D(ee_pose.x + part[0], ee_pose.y + part[1],
                           wrap_angle(ee_pose.theta + sub_theta * frac))
            new_pose2, ok2 = _resolve_substep(cand2.xy, part, p_state, obstacles, params)
            if ok2:
                ee_pose = cand2
                p_state = BodyState(new_pose2, p_state.shape, p_state.role)
                break
            frac *= 0.5
        break  # the rest of the command is dropped

    out = world.with_body_pose(ee.role, ee_pose).with_body_pose(pushee.role, p_state.pose)
    out.time_step_index = world.time_step_index + 1
    report = detect_contacts(out)
    return StepOutcome(
        world=out,
        ee_object_contact=report.ee_object,
        object_obstacle_collision=report.object_obstacle,
        ee_obstacle_collision=report.ee_obstacle,
        out_of_bounds=check_out_of_bounds(out),
    )


def detect_contacts(world: WorldState) -> ContactReport:
    """Contact flags at separation <= 1e-3 m, with the smallest separation seen."""
    ee = world.ee
    pushee = world.pushee
    ee_obj = separation(ee.shape, ee.pose, pushee.shape, pushee.pose)
    obj_obs = math.inf
    ee_obs = math.inf
    for obs in world.obstacles:
        obj_obs = min(obj_obs, separation(pushee.shape, pushee.pose, obs.shape, obs.pose))
        ee_obs = min(ee_obs, separation(ee.shape, ee.pose, obs.shape, obs.pose))
    return ContactReport(
        ee_object=ee_obj <= CONTACT_EPSILON,
        object_obstacle=obj_obs <= CONTACT_EPSILON,
        ee_obstacle=ee_obs <= CONTACT_EPSILON,
        min_separation=min(ee_obj, obj_obs, ee_obs),
    )


def check_out_of_bounds(world: WorldState) -> bool:
    """True iff the pushee center left the (closed) workspace rectangle."""
    p = world.pushee.pose
    b = world.bounds
    return not (b.min_x <= p.x <= b.max_x and b.min_y <= p.y <= b.max_y)
