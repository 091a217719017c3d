"""Quasi-static pushing mechanics in isolation.

Shows the limit-surface behavior: center pushes translate, off-center
pushes rotate, tangential EE motion does nothing, and a wall stalls the EE.
"""

import math

from planarpush.dynamics import ActionDelta, LimitSurfaceParams, detect_contacts, step_ee
from planarpush.geometry import Pose2D, box, disk
from planarpush.world import BodyState, Bounds, WorldState, ROLE_EE, ROLE_OBSTACLE, ROLE_PUSHEE

params = LimitSurfaceParams()       # c = 0.05 m, EE radius 0.01 m


def fresh(pushee_shape, pushee_pose, ee_pose, obstacles=()):
    bodies = [BodyState(pushee_pose, pushee_shape, ROLE_PUSHEE),
              BodyState(ee_pose, disk(params.ee_radius), ROLE_EE)]
    bodies += [BodyState(p, s, ROLE_OBSTACLE) for p, s in obstacles]
    return WorldState(bodies=bodies, bounds=Bounds(0, 0, 1, 1), goal=Pose2D(0.9, 0.5, 0))


print("== center-line push of a disk: pure translation ==")
w = fresh(disk(0.025), Pose2D(0.5, 0.5, 0.0), Pose2D(0.46, 0.5, 0.0))
for _ in range(20):
    w = step_ee(w, ActionDelta(0.01, 0.0, 0.0), params).world
p = w.pushee.pose
print(f"  after 20 steps: x={p.x:.4f} y={p.y:.4f} theta={p.theta:.6f} (theta stays 0)")

print("\n== off-center push of a box: rotation appears ==")
w = fresh(box(0.025, 0.025), Pose2D(0.5, 0.5, 0.0), Pose2D(0.462, 0.51, 0.0))
for k in range(60):
    w = step_ee(w, ActionDelta(0.008, 0.0, 0.0), params).world
    if k % 20 == 19:
        p = w.pushee.pose
        print(f"  step {k+1:3d}: x={p.x:.4f} y={p.y:.4f} theta={math.degrees(p.theta):+.1f} deg")

print("\n== tangential EE slide: no push (frictionless probe) ==")
w = fresh(disk(0.025), Pose2D(0.5, 0.5, 0.0), Pose2D(0.465, 0.5, 0.0))
before = w.pushee.pose
w = step_ee(w, ActionDelta(0.0, 0.008, 0.0), params).world
print(f"  pushee moved by {abs(w.pushee.pose.x - before.x):.2e} m (expected ~0)")

print("\n== pushing against a wall: the EE stalls, nothing tunnels ==")
wall = (Pose2D(0.58, 0.5, 0.0), box(0.02, 0.1))
w = fresh(box(0.025, 0.025), Pose2D(0.5, 0.5, 0.0), Pose2D(0.462, 0.5, 0.0), [wall])
for _ in range(40):
    out = step_ee(w, ActionDelta(0.01, 0.0, 0.0), params)
    w = out.world
rep = detect_contacts(w)
print(f"  pushee x={w.pushee.pose.x:.4f} (wall face at 0.56, half box 0.025 -> max 0.535)")
print(f"  contacts: ee-object={rep.ee_object} object-obstacle={rep.object_obstacle}")
print(f"  min separation {rep.min_separation:.2e} m (never below -1e-4)")
