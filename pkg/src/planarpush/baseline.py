"""Adapted push/relocate baseline controller with a soft-cost path planner.

The controller aims the EE at a contact point behind the pushee (relative to
the direction toward a 20%-arc-length subgoal of a cost-weighted path) and
blends that push drive with an orbiting relocation term. Once the relocation
activation passes the threshold (the EE sits in front of the object, where
driving at the contact point would plow through it), the push drive is cut
and the pushing direction is treated as inverted: the controller only orbits
the object, never commanding motion toward it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .dynamics import ActionDelta, DTHETA_MAX, DXY_MAX
from .errors import DegenerateGeometry, GoalOccupied, NoPath, StartOccupied
from .geometry import wrap_angle
from .perception import OccupancyGrid
from .planning import Path, plan_path, point_at_fraction
from .world import EE_RADIUS


@dataclass(frozen=True)
class ControllerParams:
    psi_relocate_threshold: float = 0.6
    relocate_radius: float | None = None    # default: pushee circumradius + 2*ee + 1 cm
    # Contact target depth: the EE drives its center toward a point this far
    # from the pushee center. The default (the inradius) sits on the contact
    # face, so the EE keeps pressing instead of converging to a tangent kiss.
    approach_distance: float | None = None
    gain_push: float = 1.0
    gain_relocate: float = 1.0
    costmap_inflation: float | None = None  # default: pushee diameter
    costmap_falloff: float = 0.05
    costmap_weight: float = 10.0

    def __post_init__(self):
        if not 0.0 <= self.psi_relocate_threshold <= 1.0:
            raise ValueError("psi_relocate_threshold must lie in [0, 1]")
        if self.gain_push <= 0.0 or self.gain_relocate <= 0.0:
            raise ValueError("gains must be positive")


def params_to_dict(p: ControllerParams) -> dict:
    return {k: getattr(p, k) for k in (
        "psi_relocate_threshold", "relocate_radius", "approach_distance",
        "gain_push", "gain_relocate", "costmap_inflation", "costmap_falloff",
        "costmap_weight")}


def params_from_dict(d: dict) -> ControllerParams:
    return ControllerParams(**d)


def load_params(path) -> ControllerParams:
    with open(path) as f:
        return params_from_dict(json.load(f))


@dataclass
class CostGrid:
    cost: np.ndarray    # finite traversal cost >= 1
    lethal: np.ndarray  # bool; blocked for planning
    resolution: float
    origin: tuple[float, float]


def build_costmap(grid: OccupancyGrid, params: ControllerParams,
                  inflation: float | None = None) -> CostGrid:
    """Lethal core plus exponential falloff cost around obstacles."""
    res = grid.resolution
    infl = inflation if inflation is not None else (params.costmap_inflation or 0.0)
    if grid.cells.any():
        d_px = ndimage.distance_transform_edt(~grid.cells)
        d = d_px * res
    else:
        d = np.full(grid.cells.shape, np.inf)
    lethal = (d <= infl) | grid.cells
    cost = 1.0 + params.costmap_weight * np.exp(-d / params.costmap_falloff)
    cost = np.where(lethal, 1.0, cost)  # lethal cells are blocked, keep cost finite
    return CostGrid(cost=cost, lethal=lethal, resolution=res, origin=grid.origin)


def relocation_activation(ee_pos, pushee_pos, push_dir) -> float:
    """(1 - cos a)/2 for the angle between (pushee - ee) and the push direction.

    0 when the EE sits directly behind the pushee, 1 when directly in front.
    """
    v = np.asarray(pushee_pos, dtype=float) - np.asarray(ee_pos, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise DegenerateGeometry("EE and pushee coincide")
    d = np.asarray(push_dir, dtype=float)
    dn = float(np.linalg.norm(d))
    if dn == 0.0:
        raise DegenerateGeometry("push direction has zero length")
    cos_a = float(v @ d) / (n * dn)
    cos_a = max(-1.0, min(1.0, cos_a))
    return (1.0 - cos_a) / 2.0


def _clamp_planar(v: np.ndarray, dtheta: float) -> ActionDelta:
    # uniform scaling keeps the commanded direction (and the branch
    # invariants) intact while honoring the per-axis caps
    m = max(abs(v[0]), abs(v[1]))
    if m > DXY_MAX:
        v = v * (DXY_MAX / m)
    dth = max(-DTHETA_MAX, min(DTHETA_MAX, dtheta))
    return ActionDelta(float(v[0]), float(v[1]), dth)


def control_step(world, cost_path: Path, params: ControllerParams) -> ActionDelta:
    """One blended push/relocate command toward the cost path's subgoal."""
    pushee = world.pushee
    ee = world.ee
    p = pushee.pose.xy
    e = ee.pose.xy

    sg = point_at_fraction(cost_path, 0.2)
    to_sg = sg - p
    if float(np.linalg.norm(to_sg)) < 1e-9:
        return ActionDelta(0.0, 0.0, 0.0)
    push_dir = to_sg / float(np.linalg.norm(to_sg))

    psi = relocation_activation(e, p, push_dir)
    reloc_r = (params.relocate_radius if params.relocate_radius is not None
               else pushee.shape.circumradius + 2.0 * EE_RADIUS + 0.01)
    approach = (params.approach_distance if params.approach_distance is not None
                else pushee.shape.inradius)

    u = e - p
    dist = float(np.linalg.norm(u))
    if dist == 0.0:
        raise DegenerateGeometry("EE and pushee coincide")
    rhat = u / dist
    that = np.array([-rhat[1], rhat[0]])
    phi = math.atan2(u[1], u[0])
    phi_back = math.atan2(-push_dir[1], -push_dir[0])
    dphi = wrap_angle(phi_back - phi)
    sign = 1.0 if dphi >= 0.0 else -1.0
    tangential = sign * abs(dphi) * reloc_r * that

    if psi < params.psi_relocate_threshold:
        target_contact = p - push_dir * approach
        push_term = params.gain_push * (target_contact - e)
        reloc_term = params.gain_relocate * (tangential + (reloc_r - dist) * rhat)
        v = (1.0 - psi) * push_term + psi * reloc_term
    else:
        # inverted regime: orbit only, radial drive never points at the pushee
        radial = max(reloc_r - dist, 0.0) * rhat
        v = params.gain_relocate * (tangential + radial)

    dtheta = wrap_angle(math.atan2(push_dir[1], push_dir[0]) - ee.pose.theta)
    return _clamp_planar(v, dtheta)


class BaselineController:
    """Closed-loop policy: weighted replanning plus the push/relocate blend."""

    def __init__(self, params: ControllerParams | None = None):
        self.params = params if params is not None else ControllerParams()
        self._cost: CostGrid | None = None
        self._path: Path | None = None

    def reset(self, env, obs=None) -> None:
        pushee = env.world.pushee
        params = self.params
        if params.costmap_inflation is None:
            params = replace(params, costmap_inflation=pushee.shape.diameter)
        self._resolved = params
        from .perception import inflate, occupancy_from_depth, render_depth

        depth = render_depth(env.world)
        base = occupancy_from_depth(depth, env.world.pushee, env.world.ee)
        self._cost = build_costmap(base, params)
        self._grid = OccupancyGrid(cells=self._cost.lethal, resolution=base.resolution,
                                   origin=base.origin)
        # snap budget scaled to the larger baseline inflation; plus a thin
        # fallback grid for starts / goals the big costmap swallows
        self._snap_cells = int(math.ceil(params.costmap_inflation / base.resolution)) + 2
        self._fallback_grid = inflate(base, pushee.shape.circumradius)
        self._path = None

    def act(self, env, obs=None) -> ActionDelta:
        p = env.world.pushee.pose
        g = env.world.goal
        try:
            self._path = plan_path(self._grid, (p.x, p.y), (g.x, g.y),
                                   cost=self._cost.cost,
                                   start_snap_cells=self._snap_cells)
        except (NoPath, StartOccupied, GoalOccupied):
            try:
                self._path = plan_path(self._fallback_grid, (p.x, p.y), (g.x, g.y))
            except (NoPath, StartOccupied, GoalOccupied):
                if self._path is None:
                    raise
        return control_step(env.world, self._path, self._resolved)
